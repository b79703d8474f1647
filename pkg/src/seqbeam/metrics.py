"""Post-hoc evaluation and filtering of generated variants.

Covers pairwise diversity (a per-child distribution, never a single scalar),
germline-frequency mutation delta, isoelectric point by bisection on the
Henderson-Hasselbalch net charge, sequence-liability scanning relative to the
seed, and mask-region mutation counts.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .seqcore import (
    AA_INDEX,
    N_RESIDUES,
    CandidateSequence,
    LengthMismatch,
    PositionMask,
    SeqError,
    hamming,
)


class PositionNotInTable(SeqError):
    pass


# ---------------------------------------------------------------------------
# Pairwise diversity


def pairwise_diversity(
    children: list[CandidateSequence], mode: str = "intra_seed"
) -> list[Optional[float]]:
    """Mean Hamming distance of each child to its peers.

    intra_seed: peers are the other children of the same seed; inter_seed:
    peers are children of different seeds. A child with no peers gets None
    (not zero). All children must share one length.
    """
    if mode not in ("intra_seed", "inter_seed"):
        raise SeqError(f"unknown diversity mode {mode!r}")
    if not children:
        return []
    L = len(children[0].sequence)
    for c in children:
        if len(c.sequence) != L:
            raise LengthMismatch("diversity requires equal-length children")
    out: list[Optional[float]] = []
    for i, c in enumerate(children):
        if mode == "intra_seed":
            peers = [d for j, d in enumerate(children) if j != i and d.seed_id == c.seed_id]
        else:
            peers = [d for d in children if d.seed_id != c.seed_id]
        if not peers:
            out.append(None)
        else:
            out.append(
                sum(hamming(c.sequence, d.sequence) for d in peers) / len(peers)
            )
    return out


# ---------------------------------------------------------------------------
# Germline frequency delta


class FrequencyTable:
    """Per-position residue frequencies (0-based positions internally)."""

    def __init__(self, rows: dict[int, np.ndarray]):
        self.rows = {}
        for pos, freqs in rows.items():
            freqs = np.asarray(freqs, dtype=float)
            if freqs.shape != (N_RESIDUES,):
                raise SeqError(f"frequency row at {pos} must have 20 entries")
            if np.any(freqs < 0) or np.any(freqs > 1) or freqs.sum() > 1 + 1e-9:
                raise SeqError(f"frequency row at {pos} outside [0,1] / sums past 1")
            self.rows[pos] = freqs

    def frequency(self, position: int, residue: str) -> float:
        if position not in self.rows:
            raise PositionNotInTable(f"position {position} not in frequency table")
        return float(self.rows[position][AA_INDEX[residue]])


def germline_delta(child: CandidateSequence, table: FrequencyTable) -> float:
    """Sum over mutated positions of freq(child residue) - freq(seed residue).

    Positive means the mutations moved toward more germline-typical residues.
    """
    return sum(
        table.frequency(pos, to) - table.frequency(pos, frm)
        for pos, frm, to in child.edits
    )


# ---------------------------------------------------------------------------
# Isoelectric point

# Classic electrophoresis-derived pKa constants (EMBOSS convention). pI values
# are defined relative to this table, not to any external package.
@dataclass(frozen=True)
class PkaSet:
    n_terminus: float = 8.6
    c_terminus: float = 3.6
    side_chains_acidic: dict = field(
        default_factory=lambda: {"C": 8.5, "D": 3.9, "E": 4.1, "Y": 10.1}
    )
    side_chains_basic: dict = field(
        default_factory=lambda: {"H": 6.5, "K": 10.8, "R": 12.5}
    )


DEFAULT_PKA = PkaSet()


def net_charge(sequence: str, ph: float, pka: PkaSet = DEFAULT_PKA) -> float:
    """Henderson-Hasselbalch net charge at pH, termini included.

    Strictly decreasing in pH, so the isoelectric point is unique.
    """
    counts = Counter(sequence)
    charge = 1.0 / (1.0 + 10.0 ** (ph - pka.n_terminus))
    for aa, pk in pka.side_chains_basic.items():
        charge += counts[aa] / (1.0 + 10.0 ** (ph - pk))
    charge -= 1.0 / (1.0 + 10.0 ** (pka.c_terminus - ph))
    for aa, pk in pka.side_chains_acidic.items():
        charge -= counts[aa] / (1.0 + 10.0 ** (pk - ph))
    return charge


def isoelectric_point(
    sequence: str, pka: PkaSet = DEFAULT_PKA, tolerance: float = 1e-3
) -> float:
    """pH at which net charge crosses zero, by bisection on [0, 14]."""
    if not sequence:
        raise SeqError("empty sequence")
    lo, hi = 0.0, 14.0
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if net_charge(sequence, mid, pka) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Liability scanning

LIABILITY_CLASSES = (
    "asp_pro",
    "deamidation",
    "isomerization",
    "n_glycosylation",
    "oxidation_met_trp",
    "unpaired_cysteine",
)

_DEAMIDATION_FOLLOWERS = set("GHNST")
_ISOMERIZATION_FOLLOWERS = set("GDHST")


@dataclass(frozen=True)
class LiabilityHit:
    motif_class: str
    start: int  # 1-based, inclusive
    end: int  # 1-based, inclusive
    text: str


@dataclass
class LiabilityReport:
    introduced: list[LiabilityHit] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.introduced)

    def classes(self) -> set[str]:
        return {h.motif_class for h in self.introduced}


def _motif_spans(seq: str, motif_class: str) -> set[tuple[int, int]]:
    """0-based (start, end_exclusive) spans matching one motif class."""
    spans = set()
    L = len(seq)
    if motif_class == "asp_pro":
        spans.update((i, i + 2) for i in range(L - 1) if seq[i : i + 2] == "DP")
    elif motif_class == "deamidation":
        spans.update(
            (i, i + 2)
            for i in range(L - 1)
            if seq[i] == "N" and seq[i + 1] in _DEAMIDATION_FOLLOWERS
        )
    elif motif_class == "isomerization":
        spans.update(
            (i, i + 2)
            for i in range(L - 1)
            if seq[i] == "D" and seq[i + 1] in _ISOMERIZATION_FOLLOWERS
        )
    elif motif_class == "n_glycosylation":
        spans.update(
            (i, i + 3)
            for i in range(L - 2)
            if seq[i] == "N" and seq[i + 1] != "P" and seq[i + 2] in "ST"
        )
    else:
        raise SeqError(f"no span scanner for class {motif_class!r}")
    return spans


def liability_scan(seed: str, child: str) -> LiabilityReport:
    """Liabilities present in the child but absent from the seed.

    Motif classes: Asp-Pro cleavage (DP), deamidation (N[GHNST]),
    isomerization (D[GDHST]), N-linked glycosylation sequons (N-X-S/T with
    X != P), introduced Met/Trp (sequence-level proxy for exposed oxidation
    sites), and unpaired cysteine (odd total count newly odd, or an
    introduced C). A motif counts as introduced only where the seed does not
    match the same class at the same span.
    """
    if len(seed) != len(child):
        raise LengthMismatch("seed and child lengths differ")
    report = LiabilityReport()
    for cls in ("asp_pro", "deamidation", "isomerization", "n_glycosylation"):
        seed_spans = _motif_spans(seed, cls)
        for start, end in sorted(_motif_spans(child, cls)):
            if (start, end) not in seed_spans:
                report.introduced.append(
                    LiabilityHit(cls, start + 1, end, child[start:end])
                )
    for i, (s, c) in enumerate(zip(seed, child)):
        if c in "MW" and s not in "MW":
            report.introduced.append(
                LiabilityHit("oxidation_met_trp", i + 1, i + 1, c)
            )
        if c == "C" and s != "C":
            report.introduced.append(
                LiabilityHit("unpaired_cysteine", i + 1, i + 1, c)
            )
    child_cys = child.count("C")
    if child_cys % 2 == 1 and seed.count("C") % 2 == 0:
        report.introduced.append(
            LiabilityHit(
                "unpaired_cysteine", 1, len(child), f"odd_cysteine_count={child_cys}"
            )
        )
    return report


# ---------------------------------------------------------------------------
# Region mutation counts


def region_mutation_count(
    child: CandidateSequence, mask: PositionMask
) -> tuple[int, int]:
    """Partition of the child's edits by mask membership: (in_mask, out_mask)."""
    inside = sum(1 for p, _, _ in child.edits if p in mask)
    return inside, len(child.edits) - inside
