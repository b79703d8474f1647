"""Core sequence types: alphabet, edit traces, and position masks.

Everything here is an immutable value; all other modules build on these.
Positions are 0-based internally and 1-based in files (see io.py).
"""

from __future__ import annotations

from dataclasses import dataclass, field

# The 20 canonical amino acids, fixed ordering. Providers must declare the
# same ordering at handshake.
ALPHABET = "ACDEFGHIKLMNPQRSTVWY"
AA_INDEX = {aa: i for i, aa in enumerate(ALPHABET)}
N_RESIDUES = len(ALPHABET)


class SeqError(Exception):
    """Base class for domain errors."""


class PositionOutOfRange(SeqError):
    pass


class PositionAlreadyEdited(SeqError):
    pass


class IdentitySubstitution(SeqError):
    pass


class LengthMismatch(SeqError):
    pass


class InvalidResidue(SeqError):
    pass


class EmptyMask(SeqError):
    pass


def check_sequence(seq: str) -> str:
    """Validate a protein sequence string (nonempty, canonical residues only)."""
    if not seq:
        raise InvalidResidue("empty sequence")
    for ch in seq:
        if ch not in AA_INDEX:
            raise InvalidResidue(f"residue {ch!r} not in canonical alphabet")
    return seq


@dataclass(frozen=True)
class PositionMask:
    """Set of 0-based positions eligible for mutation."""

    eligible: frozenset[int]

    @classmethod
    def full(cls, length: int) -> "PositionMask":
        return cls(frozenset(range(length)))

    @classmethod
    def of(cls, positions) -> "PositionMask":
        return cls(frozenset(positions))

    def check_against(self, length: int) -> None:
        for p in self.eligible:
            if not (0 <= p < length):
                raise PositionOutOfRange(f"mask position {p} outside [0, {length})")

    def __len__(self) -> int:
        return len(self.eligible)

    def __contains__(self, pos: int) -> bool:
        return pos in self.eligible


Edit = tuple[int, str, str]  # (position, from_residue, to_residue)


@dataclass(frozen=True)
class CandidateSequence:
    """A sequence plus its edit trace relative to a named seed.

    Invariant: applying `edits` to `seed` reproduces `sequence`, edit
    positions are distinct, and |edits| == hamming(seed, sequence).
    """

    seed_id: str
    seed: str
    sequence: str
    edits: frozenset[Edit] = field(default_factory=frozenset)

    def __post_init__(self):
        if len(self.seed) != len(self.sequence):
            raise LengthMismatch("seed and sequence lengths differ")
        positions = [p for p, _, _ in self.edits]
        if len(positions) != len(set(positions)):
            raise SeqError("duplicate edit positions")
        rebuilt = list(self.seed)
        for p, frm, to in self.edits:
            if not (0 <= p < len(self.seed)):
                raise PositionOutOfRange(f"edit position {p} out of range")
            if rebuilt[p] != frm:
                raise SeqError(f"edit ({p},{frm}>{to}) does not match seed residue {rebuilt[p]}")
            if frm == to:
                raise IdentitySubstitution(f"edit at {p} substitutes {frm} for itself")
            rebuilt[p] = to
        if "".join(rebuilt) != self.sequence:
            raise SeqError("edits do not reproduce sequence from seed")

    @classmethod
    def from_seed(cls, seed_id: str, seed: str) -> "CandidateSequence":
        check_sequence(seed)
        return cls(seed_id=seed_id, seed=seed, sequence=seed)

    @property
    def edit_count(self) -> int:
        return len(self.edits)

    def edited_positions(self) -> frozenset[int]:
        return frozenset(p for p, _, _ in self.edits)


def apply_edit(candidate: CandidateSequence, position: int, to: str) -> CandidateSequence:
    """Return a new candidate with one more substitution; the input is unchanged."""
    if not (0 <= position < len(candidate.sequence)):
        raise PositionOutOfRange(f"position {position} outside [0, {len(candidate.sequence)})")
    if to not in AA_INDEX:
        raise InvalidResidue(f"residue {to!r} not in canonical alphabet")
    if position in candidate.edited_positions():
        raise PositionAlreadyEdited(f"position {position} already edited")
    current = candidate.sequence[position]
    if current == to:
        raise IdentitySubstitution(f"substituting {to} for itself at {position}")
    new_seq = candidate.sequence[:position] + to + candidate.sequence[position + 1:]
    new_edits = candidate.edits | {(position, current, to)}
    return CandidateSequence(
        seed_id=candidate.seed_id, seed=candidate.seed, sequence=new_seq, edits=new_edits
    )


def hamming(a: str, b: str) -> int:
    """Number of differing positions between two equal-length sequences."""
    if len(a) != len(b):
        raise LengthMismatch(f"lengths differ: {len(a)} vs {len(b)}")
    return sum(x != y for x, y in zip(a, b))
