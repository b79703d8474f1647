"""Black-box masked-logit providers.

A provider answers: given a sequence and a set of masked positions, what are
the 20-way logits at each requested position? Two built-in desk-scale
providers (a context-free PSSM and a pairwise-coupled model) make every
downstream computation verifiable; RemoteProvider speaks the HTTP wire
protocol for real model servers.

Providers report raw logits; softmax temperature is applied downstream so
one query serves all temperatures.
"""

from __future__ import annotations

import threading
from typing import Iterable, Mapping

import numpy as np
import requests

from .seqcore import ALPHABET, AA_INDEX, N_RESIDUES, LengthMismatch, SeqError, check_sequence


class ProviderUnavailable(SeqError):
    pass


class AlphabetMismatch(SeqError):
    pass


class ForwardPassLedger:
    """Thread-safe counter of provider invocations.

    `logical` counts every query call; `physical` counts only cache misses.
    Cost claims are always stated in logical passes.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.logical = 0
        self.physical = 0

    def record(self, cached: bool) -> None:
        with self._lock:
            self.logical += 1
            if not cached:
                self.physical += 1

    def reset(self) -> None:
        with self._lock:
            self.logical = 0
            self.physical = 0

    def snapshot(self) -> dict:
        with self._lock:
            return {"logical": self.logical, "physical": self.physical}


class MaskedLogitProvider:
    """Base provider: validates queries, keeps the ledger and a per-run memo.

    Subclasses implement `_compute_rows`. A query with a nonempty mask set
    returns one row per masked position (true conditionals); a query with an
    empty mask set plus `report_positions` returns unmasked rows (the single
    forward-pass regime).
    """

    name = "provider"
    alphabet_order = ALPHABET
    expected_length: int | None = None  # None = any length accepted

    def __init__(self, memoize: bool = True):
        self.ledger = ForwardPassLedger()
        self._memo: dict | None = {} if memoize else None
        self._memo_lock = threading.Lock()

    def query(
        self,
        sequence: str,
        masked_positions: Iterable[int],
        report_positions: Iterable[int] | None = None,
    ) -> dict[int, np.ndarray]:
        check_sequence(sequence)
        masked = frozenset(masked_positions)
        L = len(sequence)
        if self.expected_length is not None and L != self.expected_length:
            raise LengthMismatch(
                f"provider expects length {self.expected_length}, got {L}"
            )
        for p in masked:
            if not (0 <= p < L):
                raise SeqError(f"masked position {p} outside [0, {L})")
        if masked:
            report = tuple(sorted(masked))
        else:
            if report_positions is None:
                raise SeqError("empty mask set requires explicit report_positions")
            report = tuple(sorted(set(report_positions)))
            for p in report:
                if not (0 <= p < L):
                    raise SeqError(f"report position {p} outside [0, {L})")

        key = (sequence, masked, report)
        if self._memo is not None:
            with self._memo_lock:
                hit = self._memo.get(key)
            if hit is not None:
                self.ledger.record(cached=True)
                return {p: row.copy() for p, row in hit.items()}

        rows = self._compute_rows(sequence, masked, report)
        out = {}
        for p in report:
            row = np.asarray(rows[p], dtype=float)
            if row.shape != (N_RESIDUES,) or not np.all(np.isfinite(row)):
                raise SeqError(f"provider returned an invalid row at position {p}")
            out[p] = row
        if self._memo is not None:
            with self._memo_lock:
                self._memo[key] = {p: row.copy() for p, row in out.items()}
        self.ledger.record(cached=False)
        return out

    def _compute_rows(
        self, sequence: str, masked: frozenset[int], report: tuple[int, ...]
    ) -> Mapping[int, np.ndarray]:
        raise NotImplementedError


class PssmProvider(MaskedLogitProvider):
    """Context-independent provider: position i always answers table row i.

    The designated "easy" oracle: independent positions make every PLL
    approximation coincide exactly.
    """

    name = "pssm"

    def __init__(self, table: np.ndarray, memoize: bool = True):
        super().__init__(memoize=memoize)
        table = np.asarray(table, dtype=float)
        if table.ndim != 2 or table.shape[1] != N_RESIDUES:
            raise SeqError("PSSM table must be L x 20")
        self.table = table
        self.expected_length = table.shape[0]

    @classmethod
    def random(cls, length: int, rng_seed: int, scale: float = 1.0) -> "PssmProvider":
        rng = np.random.default_rng(rng_seed)
        return cls(scale * rng.standard_normal((length, N_RESIDUES)))

    def _compute_rows(self, sequence, masked, report):
        return {p: self.table[p] for p in report}


class CoupledProvider(MaskedLogitProvider):
    """Pairwise-coupled provider (fields h, symmetric couplings J).

    Logit for residue r at a masked position i is
        h[i, r] + sum over unmasked j != i of J[i, r, j, s_j];
    masked positions contribute nothing to each other's logits, so masked
    rows are exact single-site conditionals of the pairwise Boltzmann joint.

    For an unmasked reported position (empty-mask regime) the model can see
    the residue at i itself; `self_weight` is added to the observed residue's
    logit, mimicking an MLM's near-copy behavior on visible tokens. This makes
    the no-masking approximations measurably different from the exact PLL.
    """

    name = "coupled"

    def __init__(self, h: np.ndarray, J: np.ndarray, self_weight: float = 4.0,
                 memoize: bool = True):
        super().__init__(memoize=memoize)
        h = np.asarray(h, dtype=float)
        J = np.asarray(J, dtype=float)
        L = h.shape[0]
        if h.shape != (L, N_RESIDUES) or J.shape != (L, N_RESIDUES, L, N_RESIDUES):
            raise SeqError("need h of shape (L,20) and J of shape (L,20,L,20)")
        if not np.allclose(J, np.transpose(J, (2, 3, 0, 1))):
            raise SeqError("couplings must be symmetric: J[i,r,j,s] == J[j,s,i,r]")
        self.h = h
        self.J = J
        self.self_weight = float(self_weight)
        self.expected_length = L

    @classmethod
    def random(cls, length: int, rng_seed: int, coupling_scale: float = 0.5,
               self_weight: float = 4.0) -> "CoupledProvider":
        rng = np.random.default_rng(rng_seed)
        h = rng.standard_normal((length, N_RESIDUES))
        J = coupling_scale * rng.standard_normal((length, N_RESIDUES, length, N_RESIDUES))
        J = 0.5 * (J + np.transpose(J, (2, 3, 0, 1)))
        for i in range(length):
            J[i, :, i, :] = 0.0
        return cls(h, J, self_weight=self_weight)

    def _compute_rows(self, sequence, masked, report):
        idx = np.array([AA_INDEX[c] for c in sequence])
        rows = {}
        for i in report:
            visible = [j for j in range(len(sequence)) if j != i and j not in masked]
            row = self.h[i].copy()
            if visible:
                vj = np.array(visible)
                row += self.J[i][:, vj, idx[vj]].sum(axis=1)
            if i not in masked:
                row[idx[i]] += self.self_weight
            rows[i] = row
        return rows


class RemoteProvider(MaskedLogitProvider):
    """Client for the HTTP/JSON wire protocol (see the model server).

    Handshake fetches /info and checks the alphabet ordering against the
    local canonical ordering.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, max_batch: int = 64,
                 memoize: bool = True):
        super().__init__(memoize=memoize)
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.max_batch = max_batch
        self._session = requests.Session()
        info = self._get("/info")
        if info.get("alphabet") != ALPHABET:
            raise AlphabetMismatch(
                f"remote alphabet {info.get('alphabet')!r} != {ALPHABET!r}"
            )
        self.name = f"remote:{info.get('name', 'unknown')}"
        self.max_length = info.get("max_length")  # advisory; server enforces

    def _get(self, path: str) -> dict:
        try:
            resp = self._session.get(self.endpoint + path, timeout=self.timeout)
        except requests.RequestException as e:
            raise ProviderUnavailable(str(e)) from e
        if resp.status_code != 200:
            raise ProviderUnavailable(f"GET {path} -> {resp.status_code}")
        return resp.json()

    def _post(self, path: str, body: dict) -> dict:
        try:
            resp = self._session.post(self.endpoint + path, json=body, timeout=self.timeout)
        except requests.RequestException as e:
            raise ProviderUnavailable(str(e)) from e
        if resp.status_code == 422:
            raise LengthMismatch(resp.json().get("error", "422"))
        if resp.status_code != 200:
            raise ProviderUnavailable(f"POST {path} -> {resp.status_code}")
        return resp.json()

    def _compute_rows(self, sequence, masked, report):
        body = {"sequence": sequence, "masked_positions": sorted(masked)}
        if not masked:
            body["report_positions"] = list(report)
        data = self._post("/logits", body)
        logits = data["logits"]
        if len(logits) != len(report):
            raise ProviderUnavailable("row count mismatch in /logits response")
        return {p: np.asarray(row, dtype=float) for p, row in zip(report, logits)}


def coupled_joint_logprobs(provider: CoupledProvider) -> np.ndarray:
    """Exact log joint of the pairwise model over all 20**L sequences.

    Brute-force enumeration; only usable for tiny L. Intended for tests that
    check masked rows against true single-site conditionals.
    """
    import itertools

    L = provider.expected_length
    h, J = provider.h, provider.J
    energies = []
    for combo in itertools.product(range(N_RESIDUES), repeat=L):
        e = sum(h[i, combo[i]] for i in range(L))
        e += sum(
            J[i, combo[i], j, combo[j]] for i in range(L) for j in range(i + 1, L)
        )
        energies.append(e)
    energies = np.array(energies)
    from scipy.special import logsumexp

    return energies - logsumexp(energies)
