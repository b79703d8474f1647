"""Black-box multi-objective aggregation for guided search.

Raw objective scores over a candidate neighborhood are oriented so that lower
is better, standardized to z-scores over exactly that neighborhood, and then
aggregated either by weighted smooth Tchebycheff scalarization (a soft max of
the z-scored objectives: log sum_i c_i exp(f_i), lower preferred) or by
Pareto non-dominated sorting with an explicit tie-break objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from .seqcore import SeqError

PLL_OBJECTIVE_NAME = "pseudo_perplexity"


class ScorerFailure(SeqError):
    def __init__(self, objective_name: str, candidate: str, cause: Exception | str):
        super().__init__(f"scorer {objective_name!r} failed on {candidate!r}: {cause}")
        self.objective_name = objective_name
        self.candidate = candidate


@dataclass(frozen=True)
class ObjectiveSpec:
    name: str
    direction: str  # "minimize" | "maximize"
    scorer: Optional[Callable[[str], float]] = None
    weight: float = 1.0

    def __post_init__(self):
        if self.direction not in ("minimize", "maximize"):
            raise SeqError(f"unknown direction {self.direction!r}")
        if self.weight <= 0:
            raise SeqError("objective weight must be positive")


@dataclass(frozen=True)
class ObjectiveSet:
    objectives: tuple[ObjectiveSpec, ...]
    aggregation: str = "sts"  # "sts" | "nds"
    tie_break: Optional[str] = None  # nds only; defaults to the PLL objective

    def __post_init__(self):
        if not self.objectives:
            raise SeqError("objective set must be nonempty")
        names = [o.name for o in self.objectives]
        if len(names) != len(set(names)):
            raise SeqError("objective names must be unique")
        if self.aggregation not in ("sts", "nds"):
            raise SeqError(f"unknown aggregation {self.aggregation!r}")
        if self.tie_break is not None and self.tie_break not in names + [PLL_OBJECTIVE_NAME]:
            raise SeqError(f"tie_break {self.tie_break!r} names no objective")


@dataclass
class ScoreMatrix:
    candidates: list[str]
    names: list[str]
    raw: np.ndarray  # N x M, as produced by the scorers
    standardized: np.ndarray  # N x M, minimize-oriented z-scores


def _evaluate(
    candidates: list[str],
    objectives: list[ObjectiveSpec],
    scorer_cache: dict | None = None,
) -> np.ndarray:
    """Raw N x M score matrix; scorers run once per unique sequence."""
    raw = np.empty((len(candidates), len(objectives)))
    for j, obj in enumerate(objectives):
        for i, seq in enumerate(candidates):
            key = (obj.name, seq)
            if scorer_cache is not None and key in scorer_cache:
                raw[i, j] = scorer_cache[key]
                continue
            try:
                val = float(obj.scorer(seq))
            except Exception as e:  # noqa: BLE001 - contract: abort, never drop
                raise ScorerFailure(obj.name, seq, e) from e
            if not np.isfinite(val):
                raise ScorerFailure(obj.name, seq, f"non-finite score {val}")
            if scorer_cache is not None:
                scorer_cache[key] = val
            raw[i, j] = val
    return raw


def zscore_columns(oriented: np.ndarray) -> np.ndarray:
    """Population z-scores per column; constant columns become all zeros."""
    mean = oriented.mean(axis=0)
    std = oriented.std(axis=0)  # population convention
    out = np.zeros_like(oriented)
    nz = std > 1e-12
    out[:, nz] = (oriented[:, nz] - mean[nz]) / std[nz]
    return out


def orient_and_zscore(
    candidates: list[str],
    objectives: list[ObjectiveSpec],
    raw: np.ndarray | None = None,
    scorer_cache: dict | None = None,
) -> ScoreMatrix:
    """Orient every column to minimize, then z-score over the candidate set."""
    if not candidates:
        raise SeqError("need at least one candidate")
    if raw is None:
        raw = _evaluate(candidates, objectives, scorer_cache)
    raw = np.asarray(raw, dtype=float)
    signs = np.array([1.0 if o.direction == "minimize" else -1.0 for o in objectives])
    return ScoreMatrix(
        candidates=list(candidates),
        names=[o.name for o in objectives],
        raw=raw,
        standardized=zscore_columns(raw * signs),
    )


def sts_scalarize(matrix: ScoreMatrix, weights: np.ndarray | list[float]) -> np.ndarray:
    """Weighted smooth Tchebycheff score per candidate; lower preferred."""
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0):
        raise SeqError("STS weights must be positive")
    return logsumexp(matrix.standardized, axis=1, b=weights[None, :])


def nds_rank(values: np.ndarray, tie_break_column: int) -> list[tuple[int, int]]:
    """Non-dominated fronts over minimize-oriented columns.

    Returns (front_index, within_front_rank) per candidate; within a front,
    candidates are ordered by the tie-break column ascending.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    dominated_by = [
        {
            j
            for j in range(n)
            if j != i
            and np.all(values[j] <= values[i])
            and np.any(values[j] < values[i])
        }
        for i in range(n)
    ]
    result: list[tuple[int, int] | None] = [None] * n
    assigned = set()
    front = 0
    while len(assigned) < n:
        members = [
            i
            for i in range(n)
            if i not in assigned and dominated_by[i] <= assigned
        ]
        members.sort(key=lambda i: (values[i, tie_break_column], i))
        for rank, i in enumerate(members):
            result[i] = (front, rank)
        assigned.update(members)
        front += 1
    return result  # type: ignore[return-value]


def _with_pll_objective(objective_set: ObjectiveSet) -> tuple[list[ObjectiveSpec], int]:
    """Objective list with the PLL objective present exactly once.

    The PLL objective (named "pseudo_perplexity", minimize) is injected
    automatically; a user-declared spec of that name only overrides its
    weight. Returns the list and the PLL column index.
    """
    objectives = []
    pll_idx = None
    for obj in objective_set.objectives:
        if obj.name == PLL_OBJECTIVE_NAME:
            pll_idx = len(objectives)
            objectives.append(
                ObjectiveSpec(PLL_OBJECTIVE_NAME, "minimize", None, obj.weight)
            )
        else:
            objectives.append(obj)
    if pll_idx is None:
        pll_idx = 0
        objectives.insert(0, ObjectiveSpec(PLL_OBJECTIVE_NAME, "minimize", None, 1.0))
    return objectives, pll_idx


def guided_rank(
    candidates: list[str],
    pll_sum_logs: list[float],
    length: int,
    objective_set: ObjectiveSet,
    scorer_cache: dict | None = None,
) -> list[int]:
    """Permutation of candidate indices, best first, under the configured
    multi-objective aggregation.

    `pll_sum_logs` are sum-convention PLLs, Gumbel-perturbed upstream when the
    sampler has noise enabled; they are converted to pseudo-perplexity before
    orientation so reports match the delivered objective values.
    """
    objectives, pll_idx = _with_pll_objective(objective_set)
    ppl = np.exp(-np.asarray(pll_sum_logs, dtype=float) / length)
    others = [o for o in objectives if o.name != PLL_OBJECTIVE_NAME]
    raw = np.empty((len(candidates), len(objectives)))
    raw[:, pll_idx] = ppl
    if others:
        other_raw = _evaluate(candidates, others, scorer_cache)
        col = 0
        for j, obj in enumerate(objectives):
            if obj.name != PLL_OBJECTIVE_NAME:
                raw[:, j] = other_raw[:, col]
                col += 1
    matrix = orient_and_zscore(candidates, objectives, raw=raw)
    if objective_set.aggregation == "sts":
        scores = sts_scalarize(matrix, [o.weight for o in objectives])
        keys = [(float(s), seq) for s, seq in zip(scores, candidates)]
    else:
        tie_name = objective_set.tie_break or PLL_OBJECTIVE_NAME
        tie_col = matrix.names.index(tie_name)
        fronts = nds_rank(matrix.standardized, tie_col)
        keys = [(f, r, seq) for (f, r), seq in zip(fronts, candidates)]
    return sorted(range(len(candidates)), key=lambda i: keys[i])


def threshold_filter(
    candidates: list,
    scorer: Callable[[str], float],
    threshold: float,
    direction: str = "greater",
    key: Callable = lambda c: c,
) -> list:
    """Keep candidates strictly beyond the threshold, order preserved."""
    if direction not in ("greater", "less"):
        raise SeqError(f"unknown direction {direction!r}")
    kept = []
    for cand in candidates:
        seq = key(cand)
        try:
            val = float(scorer(seq))
        except Exception as e:  # noqa: BLE001
            raise ScorerFailure("threshold", seq, e) from e
        if (direction == "greater" and val > threshold) or (
            direction == "less" and val < threshold
        ):
            kept.append(cand)
    return kept
