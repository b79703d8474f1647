"""File formats: FASTA, mask files, frequency tables, objective configs,
TSV interchange, and run manifests.

All positions in files are 1-based; the in-memory types are 0-based.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import requests

from .guidance import ObjectiveSet, ObjectiveSpec, ScorerFailure
from .metrics import DEFAULT_PKA, FrequencyTable, isoelectric_point, _motif_spans
from .seqcore import AA_INDEX, ALPHABET, N_RESIDUES, CandidateSequence, PositionMask, SeqError, check_sequence

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# FASTA


def read_fasta(path) -> list[tuple[str, str, str]]:
    """Return (record_id, description, sequence) triples."""
    records = []
    rec_id, desc, chunks = None, "", []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith(">"):
            if rec_id is not None:
                records.append((rec_id, desc, "".join(chunks)))
            header = line[1:].split(None, 1)
            rec_id = header[0]
            desc = header[1] if len(header) > 1 else ""
            chunks = []
        else:
            chunks.append(line)
    if rec_id is not None:
        records.append((rec_id, desc, "".join(chunks)))
    for _, _, seq in records:
        check_sequence(seq)
    return records


def edits_to_desc(candidate: CandidateSequence) -> str:
    if not candidate.edits:
        return ""
    parts = [
        f"{p + 1}:{frm}>{to}" for p, frm, to in sorted(candidate.edits)
    ]
    return "edits=" + ";".join(parts)


def desc_to_edits(desc: str) -> frozenset[tuple[int, str, str]]:
    """Parse an `edits=POS:FROM>TO;...` description field (1-based)."""
    for token in desc.split():
        if token.startswith("edits="):
            edits = set()
            for part in token[len("edits="):].split(";"):
                if not part:
                    continue
                pos_s, sub = part.split(":")
                frm, to = sub.split(">")
                edits.add((int(pos_s) - 1, frm, to))
            return frozenset(edits)
    return frozenset()


def write_fasta(path, candidates: list[CandidateSequence]) -> None:
    lines = []
    for i, cand in enumerate(candidates):
        desc = edits_to_desc(cand)
        header = f">{cand.seed_id}_v{i:05d}"
        if desc:
            header += " " + desc
        lines.append(header)
        lines.append(cand.sequence)
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Mask files


def read_mask(path, length: int | None = None) -> PositionMask:
    """One 1-based position or inclusive range (`10-15`) per line; # comments."""
    positions = set()
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "-" in line:
            lo_s, hi_s = line.split("-")
            lo, hi = int(lo_s), int(hi_s)
            if lo < 1 or hi < lo:
                raise SeqError(f"bad mask range {line!r}")
            positions.update(range(lo - 1, hi))
        else:
            p = int(line)
            if p < 1:
                raise SeqError(f"bad mask position {line!r}")
            positions.add(p - 1)
    mask = PositionMask.of(positions)
    if length is not None:
        mask.check_against(length)
    return mask


# ---------------------------------------------------------------------------
# Frequency tables


def read_frequency_table(path) -> FrequencyTable:
    """TSV: position (1-based) followed by 20 frequency columns in alphabet order."""
    rows = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or line.lower().startswith("position"):
            continue
        fields = line.split("\t")
        if len(fields) != 1 + N_RESIDUES:
            raise SeqError(f"frequency row needs 1+20 columns, got {len(fields)}")
        rows[int(fields[0]) - 1] = np.array([float(x) for x in fields[1:]])
    return FrequencyTable(rows)


# ---------------------------------------------------------------------------
# Objective configs


def _table_scorer(path):
    table = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        seq, val = line.split("\t")
        table[seq] = float(val)

    def scorer(sequence: str) -> float:
        if sequence not in table:
            raise KeyError(f"sequence not in score table: {sequence}")
        return table[sequence]

    return scorer


def _remote_scorer(url: str, timeout: float = 30.0):
    session = requests.Session()

    def scorer(sequence: str) -> float:
        resp = session.post(url, json={"sequences": [sequence]}, timeout=timeout)
        resp.raise_for_status()
        return float(resp.json()["scores"][0])

    return scorer


def _liability_count_scorer(sequence: str) -> float:
    """Total liability motif matches in the sequence itself (absolute count,
    not seed-relative; seed-relative filtering lives in the filter command)."""
    count = 0
    for cls in ("asp_pro", "deamidation", "isomerization", "n_glycosylation"):
        count += len(_motif_spans(sequence, cls))
    count += sum(1 for c in sequence if c in "MW")
    count += sequence.count("C") % 2
    return float(count)


def build_scorer(spec: dict, base_dir: Path | None = None):
    kind = spec.get("kind")
    if kind == "table":
        path = Path(spec["file"])
        if base_dir and not path.is_absolute():
            path = base_dir / path
        return _table_scorer(path)
    if kind == "remote":
        return _remote_scorer(spec["url"])
    if kind == "builtin_pi":
        return lambda seq: isoelectric_point(seq, DEFAULT_PKA)
    if kind == "builtin_liability_count":
        return _liability_count_scorer
    raise SeqError(f"unknown scorer kind {kind!r}")


def read_objectives(path, aggregation: str = "sts", tie_break: str | None = None) -> ObjectiveSet:
    """JSON list of objective specs, or an object {"aggregation", "tie_break",
    "objectives": [...]}. Each spec: name, direction, weight, scorer."""
    data = json.loads(Path(path).read_text())
    base_dir = Path(path).parent
    if isinstance(data, dict):
        aggregation = data.get("aggregation", aggregation)
        tie_break = data.get("tie_break", tie_break)
        specs = data["objectives"]
    else:
        specs = data
    objectives = []
    for spec in specs:
        scorer = None
        if spec["name"] != "pseudo_perplexity":
            scorer = build_scorer(spec["scorer"], base_dir)
        objectives.append(
            ObjectiveSpec(
                name=spec["name"],
                direction=spec.get("direction", "minimize"),
                scorer=scorer,
                weight=float(spec.get("weight", 1.0)),
            )
        )
    return ObjectiveSet(tuple(objectives), aggregation=aggregation, tie_break=tie_break)


# ---------------------------------------------------------------------------
# Provider specs


def build_provider(spec: str, memoize: bool = True):
    """Parse `pssm:FILE`, `coupled:FILE`, or `remote:URL`.

    PSSM file: TSV of L rows x 20 logit columns, or JSON
    {"length", "rng_seed", "scale"}. Coupled file: JSON either with explicit
    {"h": [[...]], "J": [[[[...]]]]} or generated from
    {"length", "rng_seed", "coupling_scale", "self_weight"}.
    """
    from .provider import CoupledProvider, PssmProvider, RemoteProvider

    if ":" not in spec:
        raise SeqError(f"provider spec needs kind:source, got {spec!r}")
    kind, source = spec.split(":", 1)
    if kind == "pssm":
        text = Path(source).read_text()
        if source.endswith(".json"):
            cfg = json.loads(text)
            return PssmProvider.random(
                cfg["length"], cfg["rng_seed"], scale=cfg.get("scale", 1.0)
            )
        table = np.array(
            [[float(x) for x in line.split("\t")] for line in text.splitlines() if line.strip()]
        )
        return PssmProvider(table, memoize=memoize)
    if kind == "coupled":
        cfg = json.loads(Path(source).read_text())
        if "h" in cfg:
            return CoupledProvider(
                np.array(cfg["h"]),
                np.array(cfg["J"]),
                self_weight=cfg.get("self_weight", 4.0),
                memoize=memoize,
            )
        return CoupledProvider.random(
            cfg["length"],
            cfg["rng_seed"],
            coupling_scale=cfg.get("coupling_scale", 0.5),
            self_weight=cfg.get("self_weight", 4.0),
        )
    if kind == "remote":
        return RemoteProvider(source, memoize=memoize)
    raise SeqError(f"unknown provider kind {kind!r}")


# ---------------------------------------------------------------------------
# TSV + manifests


def format_float(x: float) -> str:
    return f"{x:.10g}"


def write_tsv(path, header: list[str], rows: list[list]) -> None:
    lines = ["\t".join(header)]
    for row in rows:
        lines.append(
            "\t".join(
                format_float(v) if isinstance(v, float) else str(v) for v in row
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_tsv(path) -> tuple[list[str], list[dict]]:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split("\t")
    rows = [dict(zip(header, line.split("\t"))) for line in lines[1:] if line.strip()]
    return header, rows


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, command: str, config: dict, provider_info: dict,
                   ledger: dict, outputs: list, wall_time: float,
                   extra: dict | None = None) -> None:
    manifest = {
        "format_version": FORMAT_VERSION,
        "command": command,
        "config": config,
        "provider": provider_info,
        "ledger": ledger,
        "outputs": {str(p): file_digest(p) for p in outputs},
        "wall_time_s": wall_time,
    }
    if extra:
        manifest.update(extra)
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
