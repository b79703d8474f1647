"""Pseudo-log-likelihood scoring and its approximation ladder.

A conditional profile holds, for one template sequence and one softmax
temperature, the exact single-mask conditional distribution at every
position. The exact PLL re-queries the model once per position of the scored
sequence; the cheaper approximations reuse the template's profile (or skip
masking entirely) and differ in what the model gets to see at the
substitution site.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .seqcore import (
    AA_INDEX,
    ALPHABET,
    CandidateSequence,
    EmptyMask,
    PositionMask,
    SeqError,
    apply_edit,
    hamming,
)
from .provider import MaskedLogitProvider

# Softmax probabilities cannot be exactly zero, but extreme temperatures can
# underflow; floor before taking logs.
PROB_FLOOR = 1e-300


class NotSingleSubstitution(SeqError):
    pass


@dataclass(frozen=True)
class PllScore:
    """Sum-convention PLL plus its per-residue and pseudo-perplexity forms."""

    sum_log: float
    length: int

    @property
    def per_residue(self) -> float:
        return self.sum_log / self.length

    @property
    def pseudo_perplexity(self) -> float:
        return float(np.exp(-self.per_residue))


def softmax_tau(logits: np.ndarray, tau: float) -> np.ndarray:
    if tau <= 0:
        raise SeqError("temperature must be positive")
    z = np.asarray(logits, dtype=float) / tau
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _log_probs(logits: np.ndarray, tau: float) -> np.ndarray:
    return np.log(np.maximum(softmax_tau(logits, tau), PROB_FLOOR))


class ConditionalProfile:
    """Exact single-mask conditionals of a template at temperature tau.

    rows[i] = softmax_tau of the logits returned with only position i masked.
    Costs L forward passes to build; scoring any single-substitution neighbor
    from it is then free.
    """

    def __init__(self, template: str, tau: float, rows: np.ndarray):
        self.template = template
        self.tau = tau
        self.rows = rows
        self.log_rows = np.log(np.maximum(rows, PROB_FLOOR))
        idx = np.array([AA_INDEX[c] for c in template])
        self.template_log_terms = self.log_rows[np.arange(len(template)), idx]
        self.template_sum = float(self.template_log_terms.sum())

    @property
    def length(self) -> int:
        return len(self.template)

    def template_score(self) -> PllScore:
        return PllScore(self.template_sum, self.length)


def build_profile(
    provider: MaskedLogitProvider, template: str, tau: float, threads: int = 1
) -> ConditionalProfile:
    """One single-mask query per position; L forward passes."""
    L = len(template)

    def one(i: int) -> np.ndarray:
        return provider.query(template, {i})[i]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            logit_rows = list(pool.map(one, range(L)))
    else:
        logit_rows = [one(i) for i in range(L)]
    rows = np.stack([softmax_tau(r, tau) for r in logit_rows])
    return ConditionalProfile(template, tau, rows)


class ProfileCache:
    """Per-run memo of profiles keyed by (template, tau)."""

    def __init__(self, provider: MaskedLogitProvider, threads: int = 1):
        self.provider = provider
        self.threads = threads
        self._cache: dict[tuple[str, float], ConditionalProfile] = {}

    def get(self, template: str, tau: float) -> ConditionalProfile:
        key = (template, tau)
        if key not in self._cache:
            self._cache[key] = build_profile(self.provider, template, tau, self.threads)
        return self._cache[key]


def _single_diff_position(template: str, child: str) -> int:
    if len(template) != len(child):
        raise NotSingleSubstitution("template and child lengths differ")
    diffs = [i for i, (a, b) in enumerate(zip(template, child)) if a != b]
    if len(diffs) > 1:
        raise NotSingleSubstitution(f"{len(diffs)} substitutions, expected at most 1")
    return diffs[0] if diffs else -1


def exact_pll(provider: MaskedLogitProvider, sequence: str, tau: float) -> PllScore:
    """Exact PLL: one single-mask query per position of `sequence` itself."""
    total = 0.0
    for i, aa in enumerate(sequence):
        row = provider.query(sequence, {i})[i]
        total += _log_probs(row, tau)[AA_INDEX[aa]]
    return PllScore(float(total), len(sequence))


def approx_pll_wt(profile: ConditionalProfile, child: str) -> PllScore:
    """Wild-type marginal: every term read off the template's profile.

    Only the substituted position's term differs from the template's own PLL,
    so this costs zero additional forward passes.
    """
    k = _single_diff_position(profile.template, child)
    if k < 0:
        return profile.template_score()
    sum_log = (
        profile.template_sum
        - profile.template_log_terms[k]
        + profile.log_rows[k, AA_INDEX[child[k]]]
    )
    return PllScore(float(sum_log), profile.length)


def double_mask_base(
    provider: MaskedLogitProvider, profile: ConditionalProfile, k: int, tau: float
) -> float:
    """Sum of the i != k double-mask terms for substitution site k.

    These terms score the template residue at i with both i and k masked, so
    they are shared by all 19 children at k; L-1 forward passes.
    """
    template = profile.template
    total = 0.0
    for i in range(len(template)):
        if i == k:
            continue
        row = provider.query(template, {i, k})[i]
        total += _log_probs(row, tau)[AA_INDEX[template[i]]]
    return float(total)


def approx_pll_double_mask(
    provider: MaskedLogitProvider,
    profile: ConditionalProfile,
    child: str,
    tau: float,
    base: float | None = None,
) -> PllScore:
    """Double-mask approximation: mask both i and the substitution site k.

    The k term is the profile's exact single-mask conditional; pass `base`
    (from double_mask_base) to amortize the i != k queries across the 19
    children at a fixed k.
    """
    k = _single_diff_position(profile.template, child)
    if k < 0:
        return profile.template_score()
    if base is None:
        base = double_mask_base(provider, profile, k, tau)
    sum_log = base + profile.log_rows[k, AA_INDEX[child[k]]]
    return PllScore(float(sum_log), profile.length)


def unmasked_log_rows(
    provider: MaskedLogitProvider, sequence: str, tau: float
) -> np.ndarray:
    """Log-probability rows from a single no-mask forward pass."""
    L = len(sequence)
    rows = provider.query(sequence, frozenset(), report_positions=range(L))
    return np.stack([_log_probs(rows[i], tau) for i in range(L)])


def score_from_log_rows(log_rows: np.ndarray, sequence: str) -> PllScore:
    idx = np.array([AA_INDEX[c] for c in sequence])
    return PllScore(float(log_rows[np.arange(len(sequence)), idx].sum()), len(sequence))


def approx_pll_nomask_child(
    provider: MaskedLogitProvider, child: str, tau: float
) -> PllScore:
    """No-masking (child): one unmasked pass on the child itself."""
    return score_from_log_rows(unmasked_log_rows(provider, child, tau), child)


def approx_pll_nomask_template(
    template_log_rows: np.ndarray, template: str, child: str
) -> PllScore:
    """No-masking (template): score the child against the template's unmasked
    rows; the single pass is amortized over every neighbor."""
    k = _single_diff_position(template, child)
    del k  # validity check only; scoring reads all positions
    return score_from_log_rows(template_log_rows, child)


def expand_neighborhood(
    profile: ConditionalProfile, candidate: CandidateSequence, mask: PositionMask
) -> list[tuple[CandidateSequence, PllScore]]:
    """Score the full 1-substitution neighborhood of `candidate` for free.

    One entry per (eligible position k, residue != current residue at k),
    each scored with the wild-type marginal against `candidate` as template.
    Already-edited positions are excluded (each position is edited at most
    once per candidate).
    """
    if profile.template != candidate.sequence:
        raise SeqError("profile template must match the candidate being expanded")
    eligible = sorted(mask.eligible - candidate.edited_positions())
    if not eligible:
        raise EmptyMask("no eligible positions to expand")
    out = []
    for k in eligible:
        current = candidate.sequence[k]
        base = profile.template_sum - profile.template_log_terms[k]
        for r in ALPHABET:
            if r == current:
                continue
            child = apply_edit(candidate, k, r)
            score = PllScore(float(base + profile.log_rows[k, AA_INDEX[r]]), profile.length)
            out.append((child, score))
    return out


APPROXIMATIONS = ("exact", "double-mask", "wt", "nomask-child", "nomask-template")


def score_neighborhood(
    provider: MaskedLogitProvider,
    candidate: CandidateSequence,
    tau: float,
    method: str,
    mask: PositionMask | None = None,
    fixed_k: int | None = None,
    profile_cache: ProfileCache | None = None,
) -> list[tuple[CandidateSequence, PllScore]]:
    """Score 1-substitution children of `candidate` with one ladder rung.

    `fixed_k` restricts to the 19 children at one site (the natural unit for
    the double-mask budget). Forward-pass costs per full neighborhood:
    wt = L, double-mask = L + |eligible|*(L-1), nomask-child = 19*L,
    nomask-template = 1, exact = L + 19*|eligible|*L.
    """
    if method not in APPROXIMATIONS:
        raise SeqError(f"unknown approximation {method!r}")
    template = candidate.sequence
    L = len(template)
    if mask is None:
        mask = PositionMask.full(L)
    eligible = sorted(mask.eligible - candidate.edited_positions())
    if fixed_k is not None:
        if fixed_k not in eligible:
            raise SeqError(f"position {fixed_k} not eligible")
        eligible = [fixed_k]
    if not eligible:
        raise EmptyMask("no eligible positions")

    def children_at(k: int):
        for r in ALPHABET:
            if r != template[k]:
                yield apply_edit(candidate, k, r)

    if method == "nomask-template":
        log_rows = unmasked_log_rows(provider, template, tau)
        return [
            (c, approx_pll_nomask_template(log_rows, template, c.sequence))
            for k in eligible
            for c in children_at(k)
        ]
    if method == "nomask-child":
        return [
            (c, approx_pll_nomask_child(provider, c.sequence, tau))
            for k in eligible
            for c in children_at(k)
        ]

    # wt and double-mask read from the profile; the exact ladder rung also
    # builds it (its stated budget is the children plus the template profile).
    if profile_cache is not None:
        profile = profile_cache.get(template, tau)
    else:
        profile = build_profile(provider, template, tau)
    if method == "wt":
        return [
            (c, approx_pll_wt(profile, c.sequence))
            for k in eligible
            for c in children_at(k)
        ]
    if method == "double-mask":
        out = []
        for k in eligible:
            base = double_mask_base(provider, profile, k, tau)
            for c in children_at(k):
                out.append((c, approx_pll_double_mask(provider, profile, c.sequence, tau, base=base)))
        return out
    # exact
    return [
        (c, exact_pll(provider, c.sequence, tau))
        for k in eligible
        for c in children_at(k)
    ]
