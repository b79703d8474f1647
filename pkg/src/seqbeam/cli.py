"""Command-line interface: generate / score / rank / filter / metrics.

Every subcommand is a pure function of its inputs, config, and provider
responses; a JSON manifest (command echo, resolved config, ledger counts,
output digests) is written alongside the outputs. TSV is the inter-command
interchange format. Exit codes: 0 ok, 2 config error, 3 provider error,
4 retry budget exhausted (partial results flushed), 5 scorer failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

from . import io as sio
from .guidance import ScorerFailure, threshold_filter
from .metrics import (
    DEFAULT_PKA,
    germline_delta,
    isoelectric_point,
    liability_scan,
    pairwise_diversity,
    region_mutation_count,
)
from .pll import APPROXIMATIONS, exact_pll, score_neighborhood
from .provider import AlphabetMismatch, ProviderUnavailable
from .samplers import (
    SAMPLER_KINDS,
    BeamConfig,
    MutationSamplerConfig,
    batch_generate,
)
from .seqcore import CandidateSequence, PositionMask, SeqError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROVIDER = 3
EXIT_RETRY = 4
EXIT_SCORER = 5

GENERATE_COLUMNS = [
    "id", "seed_id", "sequence", "edits", "step",
    "sum_log", "per_residue", "pseudo_perplexity", "perturbed",
]


def _default_threads() -> int:
    return os.cpu_count() or 1


def _load_candidates(tsv_path, seeds_path) -> list[dict]:
    """Rebuild CandidateSequence objects from a candidates TSV + seeds FASTA."""
    seeds = {rid: seq for rid, _, seq in sio.read_fasta(seeds_path)}
    _, rows = sio.read_tsv(tsv_path)
    out = []
    for row in rows:
        seed_id = row["seed_id"]
        if seed_id not in seeds:
            raise SeqError(f"seed {seed_id!r} not in seeds FASTA")
        edits = sio.desc_to_edits("edits=" + row.get("edits", ""))
        cand = CandidateSequence(
            seed_id=seed_id, seed=seeds[seed_id],
            sequence=row["sequence"], edits=edits,
        )
        out.append({"row": row, "candidate": cand})
    return out


def _candidate_rows(entries, start_rank: int = 0) -> list[list]:
    rows = []
    for i, e in enumerate(entries):
        cand = e.candidate
        rows.append([
            f"{cand.seed_id}_v{start_rank + i:05d}",
            cand.seed_id,
            cand.sequence,
            sio.edits_to_desc(cand).removeprefix("edits="),
            e.step if e.step is not None else "",
            float(e.clean.sum_log) if e.clean else "",
            float(e.clean.per_residue) if e.clean else "",
            float(e.clean.pseudo_perplexity) if e.clean else "",
            float(e.perturbed) if e.perturbed is not None else "",
        ])
    return rows


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args) -> int:
    started = time.time()
    seeds = [(rid, seq) for rid, _, seq in sio.read_fasta(args.seeds)]
    provider = sio.build_provider(args.provider)
    mask = sio.read_mask(args.mask) if args.mask else None
    for _, seq in seeds:
        (mask or PositionMask.full(len(seq))).check_against(len(seq))
        if args.edits > len(mask or PositionMask.full(len(seq))):
            raise SeqError(f"edit budget {args.edits} exceeds mask")

    objectives = sio.read_objectives(args.objectives) if args.objectives else None
    if args.sampler == "beam":
        config = BeamConfig(
            edit_budget=args.edits,
            rng_seed=args.rng_seed,
            beam_size=args.beam,
            tau=args.tau,
            gumbel_scale=args.gumbel_scale,
            mask=mask,
        )
    else:
        config = MutationSamplerConfig(
            edit_budget=args.edits,
            rng_seed=args.rng_seed,
            tau=args.tau,
            mask=mask,
            position_strategy=args.position_strategy,
            decode="argmax" if args.sampler == "gibbs-argmax" else "sample",
        )

    run = batch_generate(
        args.sampler, provider, seeds, args.count, config,
        objectives=objectives, threads=args.threads,
    )
    if not args.no_score:
        for entry in run.entries:
            if entry.clean is None:
                entry.clean = exact_pll(provider, entry.candidate.sequence, args.tau)
    run.ledger = provider.ledger.snapshot()

    out = Path(args.out)
    tsv_path = out.with_suffix(".tsv")
    fasta_path = out.with_suffix(".fasta")
    sio.write_tsv(tsv_path, GENERATE_COLUMNS, _candidate_rows(run.entries))
    sio.write_fasta(fasta_path, [e.candidate for e in run.entries])
    sio.write_manifest(
        out.with_suffix(".manifest.json"),
        command="generate",
        config={**run.config, "sampler": run.sampler, "count": args.count,
                "provider_spec": args.provider, "threads": args.threads,
                "objectives": args.objectives, "scored": not args.no_score},
        provider_info={"name": provider.name},
        ledger=run.ledger,
        outputs=[tsv_path, fasta_path],
        wall_time=time.time() - started,
        extra={"requested": run.requested, "achieved": run.achieved},
    )
    if run.requested and any(v < run.requested for v in run.achieved.values()):
        return EXIT_RETRY
    return EXIT_OK


# ---------------------------------------------------------------------------
# score


def cmd_score(args) -> int:
    started = time.time()
    seeds = [(rid, seq) for rid, _, seq in sio.read_fasta(args.seeds)]
    provider = sio.build_provider(args.provider)
    mask = sio.read_mask(args.mask) if args.mask else None
    approximations = (
        list(APPROXIMATIONS) if args.approximation == "all" else [args.approximation]
    )

    rows = []
    for approx in approximations:
        before = provider.ledger.snapshot()["logical"]
        scored = []
        for seed_id, seed in seeds:
            root = CandidateSequence.from_seed(seed_id, seed)
            scored.extend(
                score_neighborhood(
                    provider, root, args.tau, approx,
                    mask=mask, fixed_k=args.k,
                )
            )
        passes = provider.ledger.snapshot()["logical"] - before
        for i, (cand, score) in enumerate(scored):
            rows.append([
                f"{cand.seed_id}_{approx}_{i:05d}",
                sio.edits_to_desc(cand).removeprefix("edits="),
                float(score.sum_log),
                float(score.per_residue),
                float(score.pseudo_perplexity),
                approx,
                passes,
            ])

    tsv_path = Path(args.out)
    sio.write_tsv(
        tsv_path,
        ["id", "edits", "sum_log", "per_residue", "pseudo_perplexity",
         "approximation_name", "forward_passes"],
        rows,
    )
    sio.write_manifest(
        tsv_path.with_suffix(".manifest.json"),
        command="score",
        config={"provider_spec": args.provider, "tau": args.tau,
                "approximations": approximations, "k": args.k,
                "mask": args.mask, "threads": args.threads},
        provider_info={"name": provider.name},
        ledger=provider.ledger.snapshot(),
        outputs=[tsv_path],
        wall_time=time.time() - started,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# rank


def cmd_rank(args) -> int:
    started = time.time()
    import numpy as np

    from .guidance import PLL_OBJECTIVE_NAME, nds_rank, orient_and_zscore, sts_scalarize

    header, rows = sio.read_tsv(args.input)
    del header
    rows = rows[: args.top_k]
    objective_set = sio.read_objectives(args.objectives)

    sequences = [r["sequence"] for r in rows]
    raw_cols = []
    for obj in objective_set.objectives:
        if obj.name == PLL_OBJECTIVE_NAME:
            raw_cols.append([float(r["pseudo_perplexity"]) for r in rows])
        else:
            raw_cols.append(None)
    raw = None
    if all(c is not None for c in raw_cols):
        raw = np.array(raw_cols).T
    elif any(c is not None for c in raw_cols):
        # Mixed: evaluate scorer-backed columns, splice in the PLL column.
        from .guidance import _evaluate

        scored = _evaluate(
            sequences,
            [o for o in objective_set.objectives if o.name != PLL_OBJECTIVE_NAME],
        )
        raw = np.empty((len(rows), len(objective_set.objectives)))
        col = 0
        for j, c in enumerate(raw_cols):
            if c is not None:
                raw[:, j] = c
            else:
                raw[:, j] = scored[:, col]
                col += 1
    matrix = orient_and_zscore(sequences, list(objective_set.objectives), raw=raw)
    if objective_set.aggregation == "sts":
        scores = sts_scalarize(matrix, [o.weight for o in objective_set.objectives])
        keys = [(float(s), seq) for s, seq in zip(scores, sequences)]
    else:
        tie_name = objective_set.tie_break or PLL_OBJECTIVE_NAME
        tie_col = matrix.names.index(tie_name)
        fronts = nds_rank(matrix.standardized, tie_col)
        keys = [(f, r, seq) for (f, r), seq in zip(fronts, sequences)]
    order = sorted(range(len(rows)), key=lambda i: keys[i])

    out_path = Path(args.out)
    out_header = list(rows[0].keys()) + ["rank_score"] if rows else ["rank_score"]
    out_rows = []
    for rank, i in enumerate(order):
        del rank
        score_repr = (
            keys[i][0] if objective_set.aggregation == "sts" else f"{keys[i][0]}.{keys[i][1]}"
        )
        out_rows.append(list(rows[i].values()) + [score_repr])
    sio.write_tsv(out_path, out_header, out_rows)
    sio.write_manifest(
        out_path.with_suffix(".manifest.json"),
        command="rank",
        config={"input": args.input, "objectives": args.objectives,
                "top_k": args.top_k},
        provider_info={},
        ledger={},
        outputs=[out_path],
        wall_time=time.time() - started,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# filter


def cmd_filter(args) -> int:
    started = time.time()
    loaded = _load_candidates(args.input, args.seeds)
    scorer = None
    if args.scorer:
        import json

        spec = json.loads(Path(args.scorer).read_text())
        scorer = sio.build_scorer(spec, Path(args.scorer).parent)

    kept, rejects = [], []
    for item in loaded:
        cand = item["candidate"]
        reason = None
        if not args.no_pi_filter:
            pi = isoelectric_point(cand.sequence, DEFAULT_PKA)
            if pi > args.pi_max:
                reason = f"pi>{sio.format_float(args.pi_max)}"
        if reason is None and not args.no_liability_filter:
            report = liability_scan(cand.seed, cand.sequence)
            if report.introduced:
                reason = ",".join(sorted(report.classes()))
        if reason is None and scorer is not None:
            passed = threshold_filter(
                [cand.sequence], scorer, args.threshold, args.direction
            )
            if not passed:
                reason = f"score_threshold_{args.direction}_{sio.format_float(args.threshold)}"
        if reason is None:
            kept.append(item)
        else:
            rejects.append((item, reason))

    out_path = Path(args.out)
    header = list(loaded[0]["row"].keys()) if loaded else GENERATE_COLUMNS
    sio.write_tsv(out_path, header, [list(i["row"].values()) for i in kept])
    rejects_path = out_path.with_suffix(".rejects.tsv")
    sio.write_tsv(
        rejects_path,
        header + ["reject_reason"],
        [list(i["row"].values()) + [reason] for i, reason in rejects],
    )
    sio.write_manifest(
        out_path.with_suffix(".manifest.json"),
        command="filter",
        config={"input": args.input, "seeds": args.seeds,
                "pi_max": args.pi_max, "no_pi_filter": args.no_pi_filter,
                "no_liability_filter": args.no_liability_filter,
                "scorer": args.scorer, "threshold": args.threshold,
                "direction": args.direction},
        provider_info={},
        ledger={},
        outputs=[out_path, rejects_path],
        wall_time=time.time() - started,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# metrics


def cmd_metrics(args) -> int:
    started = time.time()
    import json

    loaded = _load_candidates(args.input, args.seeds)
    candidates = [i["candidate"] for i in loaded]
    mask = sio.read_mask(args.mask) if args.mask else None
    freq_table = sio.read_frequency_table(args.germline) if args.germline else None

    intra = pairwise_diversity(candidates, "intra_seed") if candidates else []
    inter = pairwise_diversity(candidates, "inter_seed") if candidates else []

    rows = []
    liability_details = {}
    for idx, item in enumerate(loaded):
        cand = item["candidate"]
        rid = item["row"].get("id", f"cand_{idx:05d}")
        report = liability_scan(cand.seed, cand.sequence)
        liability_details[rid] = [
            {"class": h.motif_class, "start": h.start, "end": h.end, "text": h.text}
            for h in report.introduced
        ]
        row = [
            rid,
            cand.seed_id,
            cand.sequence,
            len(cand.edits),
            "" if intra[idx] is None else float(intra[idx]),
            "" if inter[idx] is None else float(inter[idx]),
            float(isoelectric_point(cand.sequence, DEFAULT_PKA)),
            len(report.introduced),
        ]
        if freq_table is not None:
            row.append(float(germline_delta(cand, freq_table)))
        if mask is not None:
            in_m, out_m = region_mutation_count(cand, mask)
            row.extend([in_m, out_m])
        rows.append(row)

    header = ["id", "seed_id", "sequence", "n_edits", "intra_diversity",
              "inter_diversity", "pi", "introduced_liabilities"]
    if freq_table is not None:
        header.append("germline_delta")
    if mask is not None:
        header.extend(["mask_mutations", "non_mask_mutations"])

    out_path = Path(args.out)
    sio.write_tsv(out_path, header, rows)
    sidecar = out_path.with_suffix(".liabilities.json")
    sidecar.write_text(json.dumps(liability_details, indent=2, sort_keys=True) + "\n")
    sio.write_manifest(
        out_path.with_suffix(".manifest.json"),
        command="metrics",
        config={"input": args.input, "seeds": args.seeds, "mask": args.mask,
                "germline": args.germline},
        provider_info={},
        ledger={},
        outputs=[out_path, sidecar],
        wall_time=time.time() - started,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqbeam",
        description="MLM-guided protein sequence optimization toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample candidate sequences from seeds")
    g.add_argument("--sampler", choices=SAMPLER_KINDS, default="beam")
    g.add_argument("--seeds", required=True)
    g.add_argument("--mask")
    g.add_argument("--edits", type=int, default=3)
    g.add_argument("--beam", type=int, default=5)
    g.add_argument("--tau", type=float, default=1.5)
    g.add_argument("--gumbel-scale", type=float, default=1.0)
    g.add_argument("--rng-seed", type=int, default=0)
    g.add_argument("--count", type=int, default=100)
    g.add_argument("--provider", required=True)
    g.add_argument("--objectives")
    g.add_argument("--position-strategy", default="random",
                   choices=("random", "lowest_entropy", "max_probability"))
    g.add_argument("--no-score", action="store_true",
                   help="skip exact-PLL scoring of mutation-sampler outputs")
    g.add_argument("--threads", type=int, default=_default_threads())
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("score", help="score 1-edit neighborhoods of seeds")
    s.add_argument("--provider", required=True)
    s.add_argument("--seeds", required=True)
    s.add_argument("--mask")
    s.add_argument("--tau", type=float, default=1.0)
    s.add_argument("--approximation", default="wt",
                   choices=list(APPROXIMATIONS) + ["all"])
    s.add_argument("--k", type=int, help="restrict to one substitution site (0-based)")
    s.add_argument("--threads", type=int, default=_default_threads())
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_score)

    r = sub.add_parser("rank", help="re-rank a candidates TSV by objectives")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--objectives", required=True)
    r.add_argument("--top-k", type=int, default=1000)
    r.add_argument("--threads", type=int, default=_default_threads())
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_rank)

    f = sub.add_parser("filter", help="apply developability filters")
    f.add_argument("--in", dest="input", required=True)
    f.add_argument("--seeds", required=True)
    f.add_argument("--pi-max", type=float, default=9.0)
    f.add_argument("--no-pi-filter", action="store_true")
    f.add_argument("--no-liability-filter", action="store_true")
    f.add_argument("--scorer", help="JSON scorer spec for threshold filtering")
    f.add_argument("--threshold", type=float, default=0.6)
    f.add_argument("--direction", choices=("greater", "less"), default="greater")
    f.add_argument("--threads", type=int, default=_default_threads())
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_filter)

    m = sub.add_parser("metrics", help="evaluate candidates")
    m.add_argument("--in", dest="input", required=True)
    m.add_argument("--seeds", required=True)
    m.add_argument("--mask")
    m.add_argument("--germline")
    m.add_argument("--threads", type=int, default=_default_threads())
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_metrics)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ProviderUnavailable, AlphabetMismatch) as e:
        print(f"provider error: {e}", file=sys.stderr)
        return EXIT_PROVIDER
    except ScorerFailure as e:
        print(f"scorer error: {e}", file=sys.stderr)
        return EXIT_SCORER
    except (SeqError, FileNotFoundError, ValueError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
