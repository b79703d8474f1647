"""Samplers: temperature-annealed stochastic beam search and the three
mutation-centric baselines (denoising, Gibbs, and their argmax variants).

All randomness is drawn from counter-based streams keyed by the run seed and
the candidate's identity, so results are bit-reproducible and independent of
scheduling order. Every output sits at Hamming distance exactly E from its
seed: identity decodes are redrawn from the 19 non-identity residues and a
position, once edited, is retired.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .seqcore import (
    AA_INDEX,
    ALPHABET,
    N_RESIDUES,
    CandidateSequence,
    PositionMask,
    SeqError,
    apply_edit,
)
from .provider import MaskedLogitProvider
from .pll import PllScore, ProfileCache, expand_neighborhood, softmax_tau


class EditBudgetExceedsMask(SeqError):
    pass


class RetryBudgetExhausted(SeqError):
    pass


POSITION_STRATEGIES = ("random", "lowest_entropy", "max_probability")
DECODES = ("sample", "argmax")


@dataclass(frozen=True)
class BeamConfig:
    edit_budget: int
    rng_seed: int
    beam_size: int = 5
    tau: float = 1.5
    gumbel_scale: float = 1.0
    mask: Optional[PositionMask] = None
    dedup: bool = True

    def to_dict(self) -> dict:
        return {
            "sampler_family": "beam",
            "beam_size": self.beam_size,
            "edit_budget": self.edit_budget,
            "tau": self.tau,
            "gumbel_scale": self.gumbel_scale,
            "rng_seed": self.rng_seed,
            "mask": sorted(self.mask.eligible) if self.mask else None,
            "dedup": self.dedup,
        }


@dataclass(frozen=True)
class MutationSamplerConfig:
    edit_budget: int
    rng_seed: int
    tau: float = 1.0
    mask: Optional[PositionMask] = None
    position_strategy: str = "random"
    decode: str = "sample"

    def __post_init__(self):
        if self.position_strategy not in POSITION_STRATEGIES:
            raise SeqError(f"unknown position strategy {self.position_strategy!r}")
        if self.decode not in DECODES:
            raise SeqError(f"unknown decode {self.decode!r}")

    def to_dict(self) -> dict:
        return {
            "sampler_family": "mutation",
            "edit_budget": self.edit_budget,
            "tau": self.tau,
            "rng_seed": self.rng_seed,
            "mask": sorted(self.mask.eligible) if self.mask else None,
            "position_strategy": self.position_strategy,
            "decode": self.decode,
        }


@dataclass
class RunEntry:
    candidate: CandidateSequence
    clean: Optional[PllScore] = None
    perturbed: Optional[float] = None
    step: Optional[int] = None
    guidance_score: Optional[float] = None


@dataclass
class GenerationRun:
    """Full reproducible record of one generation command."""

    sampler: str
    seeds: list[tuple[str, str]]
    config: dict
    provider_name: str
    entries: list[RunEntry] = field(default_factory=list)
    ledger: dict = field(default_factory=dict)
    requested: Optional[int] = None
    achieved: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Deterministic, order-independent randomness


def _hash_u64(*parts) -> int:
    payload = "\x1f".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "big")


def gumbel_noise(rng_seed: int, *key) -> float:
    """Standard Gumbel(0,1) draw from a counter-based stream."""
    u = (_hash_u64(rng_seed, *key) + 0.5) / 2.0**64
    return -math.log(-math.log(u))


def chain_rng(rng_seed: int, *key) -> np.random.Generator:
    return np.random.default_rng(_hash_u64(rng_seed, *key))


def _choose_positions(rng: np.random.Generator, pool: list[int], k: int) -> list[int]:
    idx = rng.choice(len(pool), size=k, replace=False)
    return [pool[int(i)] for i in np.atleast_1d(idx)]


# ---------------------------------------------------------------------------
# Decoding helpers


def _decode_residue(
    rng: np.random.Generator, probs: np.ndarray, current: str, decode: str
) -> str:
    """Decode one residue, redrawing identity decodes from the 19 others."""
    if decode == "argmax":
        r = int(np.argmax(probs))
        if ALPHABET[r] == current:
            restricted = probs.copy()
            restricted[AA_INDEX[current]] = -np.inf
            r = int(np.argmax(restricted))
        return ALPHABET[r]
    r = int(rng.choice(N_RESIDUES, p=probs))
    if ALPHABET[r] == current:
        restricted = probs.copy()
        restricted[AA_INDEX[current]] = 0.0
        restricted /= restricted.sum()
        r = int(rng.choice(N_RESIDUES, p=restricted))
    return ALPHABET[r]


def _pick_position(
    rng: np.random.Generator,
    strategy: str,
    candidates: list[int],
    rows_tau1: dict[int, np.ndarray] | None,
) -> int:
    """Choose the next position to decode. Model-confidence strategies are
    computed from softmax rows at tau=1 regardless of the sampler tau."""
    if len(candidates) == 1:
        return candidates[0]
    if strategy == "random":
        return _choose_positions(rng, sorted(candidates), 1)[0]
    scored = []
    for p in sorted(candidates):
        probs = rows_tau1[p]
        if strategy == "lowest_entropy":
            ent = -float(np.sum(probs * np.log(np.maximum(probs, 1e-300))))
            scored.append((ent, p))
        else:  # max_probability
            scored.append((-float(probs.max()), p))
    scored.sort()
    return scored[0][1]


def _check_mutation_config(seed: str, config: MutationSamplerConfig) -> PositionMask:
    mask = config.mask or PositionMask.full(len(seed))
    mask.check_against(len(seed))
    if config.edit_budget > len(mask):
        raise EditBudgetExceedsMask(
            f"edit budget {config.edit_budget} exceeds mask size {len(mask)}"
        )
    if config.edit_budget < 1:
        raise SeqError("edit budget must be >= 1")
    return mask


# ---------------------------------------------------------------------------
# Mutation-centric samplers


def _gibbs_chain(
    provider: MaskedLogitProvider,
    seed_id: str,
    seed: str,
    config: MutationSamplerConfig,
    chain_index: int,
) -> CandidateSequence:
    """One Gibbs chain: E single-position mask-and-unmask iterations."""
    mask = _check_mutation_config(seed, config)
    rng = chain_rng(config.rng_seed, "gibbs", seed_id, chain_index)
    cand = CandidateSequence.from_seed(seed_id, seed)
    eligible = set(mask.eligible)
    for _ in range(config.edit_budget):
        remaining = sorted(eligible - cand.edited_positions())
        if config.position_strategy == "random":
            pos = _pick_position(rng, "random", remaining, None)
        else:
            # Confidence-based selection needs the current rows; this costs one
            # extra unmasked pass per iteration on top of the E masked passes.
            rows = provider.query(cand.sequence, frozenset(), report_positions=remaining)
            rows_tau1 = {p: softmax_tau(rows[p], 1.0) for p in remaining}
            pos = _pick_position(rng, config.position_strategy, remaining, rows_tau1)
        row = provider.query(cand.sequence, {pos})[pos]
        probs = softmax_tau(row, config.tau)
        res = _decode_residue(rng, probs, cand.sequence[pos], config.decode)
        cand = apply_edit(cand, pos, res)
    return cand


def _denoise_chain(
    provider: MaskedLogitProvider,
    seed_id: str,
    seed: str,
    config: MutationSamplerConfig,
    chain_index: int,
) -> CandidateSequence:
    """One denoising chain: mask all E positions, then unmask one per step."""
    mask = _check_mutation_config(seed, config)
    # Shares the Gibbs stream key so that E=1 denoising reduces to Gibbs
    # draw-for-draw.
    rng = chain_rng(config.rng_seed, "gibbs", seed_id, chain_index)
    cand = CandidateSequence.from_seed(seed_id, seed)
    chosen = _choose_positions(rng, sorted(mask.eligible), config.edit_budget)
    masked = set(chosen)
    while masked:
        rows = provider.query(cand.sequence, masked)
        rows_tau1 = {p: softmax_tau(rows[p], 1.0) for p in masked}
        pos = _pick_position(rng, config.position_strategy, sorted(masked), rows_tau1)
        probs = softmax_tau(rows[pos], config.tau)
        res = _decode_residue(rng, probs, cand.sequence[pos], config.decode)
        cand = apply_edit(cand, pos, res)
        masked.remove(pos)
    return cand


def gibbs_sample(
    provider: MaskedLogitProvider,
    seed_id: str,
    seed: str,
    config: MutationSamplerConfig,
) -> GenerationRun:
    cand = _gibbs_chain(provider, seed_id, seed, config, chain_index=0)
    return GenerationRun(
        sampler="gibbs",
        seeds=[(seed_id, seed)],
        config=config.to_dict(),
        provider_name=provider.name,
        entries=[RunEntry(candidate=cand)],
        ledger=provider.ledger.snapshot(),
        requested=1,
        achieved={seed_id: 1},
    )


def denoise_sample(
    provider: MaskedLogitProvider,
    seed_id: str,
    seed: str,
    config: MutationSamplerConfig,
) -> GenerationRun:
    cand = _denoise_chain(provider, seed_id, seed, config, chain_index=0)
    return GenerationRun(
        sampler="denoise",
        seeds=[(seed_id, seed)],
        config=config.to_dict(),
        provider_name=provider.name,
        entries=[RunEntry(candidate=cand)],
        ledger=provider.ledger.snapshot(),
        requested=1,
        achieved={seed_id: 1},
    )


# ---------------------------------------------------------------------------
# Stochastic beam search


def beam_search(
    provider: MaskedLogitProvider,
    seed_id: str,
    seed: str,
    config: BeamConfig,
    objectives=None,
    threads: int = 1,
    scorer_cache: dict | None = None,
) -> GenerationRun:
    """Temperature-annealed stochastic beam search from one seed.

    Each step expands every surviving template (building that template's own
    conditional profile), scores the full 1-edit neighborhood with the
    wild-type marginal, perturbs the summed log score with Gumbel noise, and
    keeps the top B by perturbed score. Every scored candidate at every step
    enters the (deduplicated) output pool; delivery re-ranks the pool by
    clean score, or by the guidance score when objectives are supplied.

    Logical forward passes: L * (1 + B*(E-1)) when the beam stays full.
    """
    mask = config.mask or PositionMask.full(len(seed))
    mask.check_against(len(seed))
    if config.edit_budget > len(mask):
        raise EditBudgetExceedsMask(
            f"edit budget {config.edit_budget} exceeds mask size {len(mask)}"
        )
    if config.beam_size < 1 or config.edit_budget < 1:
        raise SeqError("beam size and edit budget must be >= 1")

    cache = ProfileCache(provider, threads=threads)
    if scorer_cache is None:
        scorer_cache = {}
    root = CandidateSequence.from_seed(seed_id, seed)
    beam: list[CandidateSequence] = [root]
    pool: dict[str, RunEntry] = {}

    for step in range(1, config.edit_budget + 1):
        step_children: dict[str, tuple[CandidateSequence, PllScore, float]] = {}
        for tmpl in beam:
            profile = cache.get(tmpl.sequence, config.tau)
            for child, score in expand_neighborhood(profile, tmpl, mask):
                g = gumbel_noise(config.rng_seed, "beam", step, child.sequence)
                pert = score.sum_log + config.gumbel_scale * g
                prev = step_children.get(child.sequence)
                if (
                    prev is None
                    or pert > prev[2]
                    or (pert == prev[2] and score.sum_log > prev[1].sum_log)
                ):
                    step_children[child.sequence] = (child, score, pert)
        items = list(step_children.values())
        if objectives is not None:
            from .guidance import guided_rank

            perm = guided_rank(
                [c.sequence for c, _, _ in items],
                [p for _, _, p in items],
                len(seed),
                objectives,
                scorer_cache=scorer_cache,
            )
            items = [items[i] for i in perm]
        else:
            items.sort(key=lambda t: (-t[2], t[0].sequence))
        for child, score, pert in items:
            prev = pool.get(child.sequence)
            if prev is None or pert > prev.perturbed:
                pool[child.sequence] = RunEntry(
                    candidate=child, clean=score, perturbed=pert, step=step
                )
        beam = [c for c, _, _ in items[: config.beam_size]]
        if not beam:
            break

    entries = list(pool.values())
    if objectives is not None:
        from .guidance import guided_rank

        perm = guided_rank(
            [e.candidate.sequence for e in entries],
            [e.perturbed for e in entries],
            len(seed),
            objectives,
            scorer_cache=scorer_cache,
        )
        entries = [entries[i] for i in perm]
    else:
        entries.sort(key=lambda e: (-e.clean.sum_log, e.candidate.sequence))

    return GenerationRun(
        sampler="beam",
        seeds=[(seed_id, seed)],
        config=config.to_dict(),
        provider_name=provider.name,
        entries=entries,
        ledger=provider.ledger.snapshot(),
        requested=None,
        achieved={seed_id: len(entries)},
    )


# ---------------------------------------------------------------------------
# Batch generation

SAMPLER_KINDS = ("beam", "gibbs", "gibbs-argmax", "denoise")


def batch_generate(
    sampler_kind: str,
    provider: MaskedLogitProvider,
    seeds: list[tuple[str, str]],
    per_seed_count: int,
    config,
    objectives=None,
    retry_factor: int = 10,
    threads: int = 1,
) -> GenerationRun:
    """Generate up to `per_seed_count` unique candidates per seed.

    Mutation samplers repeat independent chains (derived RNG streams) and
    deduplicate; the retry budget (retry_factor * requested chains) bounds the
    attempt count, and falling short is reported via `achieved`, not raised.
    The beam sampler's pool is already unique, so one run per seed suffices.
    """
    if sampler_kind not in SAMPLER_KINDS:
        raise SeqError(f"unknown sampler kind {sampler_kind!r}")
    if per_seed_count < 1:
        raise SeqError("per_seed_count must be >= 1")

    entries: list[RunEntry] = []
    achieved: dict[str, int] = {}

    if sampler_kind == "beam":
        for seed_id, seed in seeds:
            run = beam_search(
                provider, seed_id, seed, config, objectives=objectives, threads=threads
            )
            # the pool keeps lower-step intermediates for inspection; delivery
            # honors the exactly-E contract
            finished = [
                e for e in run.entries if len(e.candidate.edits) == config.edit_budget
            ]
            take = finished[:per_seed_count]
            entries.extend(take)
            achieved[seed_id] = len(take)
        sampler = "beam"
    else:
        if sampler_kind == "gibbs-argmax":
            config = MutationSamplerConfig(
                edit_budget=config.edit_budget,
                rng_seed=config.rng_seed,
                tau=config.tau,
                mask=config.mask,
                position_strategy=config.position_strategy,
                decode="argmax",
            )
        chain = _denoise_chain if sampler_kind == "denoise" else _gibbs_chain
        for seed_id, seed in seeds:
            seen: dict[str, CandidateSequence] = {}
            attempts = 0
            budget = retry_factor * per_seed_count
            while len(seen) < per_seed_count and attempts < budget:
                cand = chain(provider, seed_id, seed, config, chain_index=attempts)
                seen.setdefault(cand.sequence, cand)
                attempts += 1
            for seq in sorted(seen):
                entries.append(RunEntry(candidate=seen[seq]))
            achieved[seed_id] = len(seen)
        sampler = sampler_kind

    return GenerationRun(
        sampler=sampler,
        seeds=list(seeds),
        config=config.to_dict(),
        provider_name=provider.name,
        entries=entries,
        ledger=provider.ledger.snapshot(),
        requested=per_seed_count,
        achieved=achieved,
    )
