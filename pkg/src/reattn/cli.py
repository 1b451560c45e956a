"""Command-line front end: rank, eval, synth, diff.

Exit codes are part of the contract so shell pipelines can branch on the
failure class: 0 success, 1 validation/usage failure, 2 I/O or parse
failure.  All outputs are deterministic for identical inputs and flags, and
files are written atomically.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .aggregate import ModeError, ShapeError
from .core import (
    HeadSet,
    ParseError,
    Run,
    SchemaError,
    load_instance,
    load_runs,
    save_instance,
    save_runs,
    _atomic_write_text,
)
from .evaluation import compare_runs, load_qrels, ndcg_at_k, recall_at_k
from .pipeline import PipelineConfig, breakdown_report, reattn_pipeline
from .synth import ParamError, SynthParams, generate_instance

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2

_METHOD_FLAGS = {
    "icr": "icr",
    "idf-only": "idf_only",
    "entropy-only": "entropy_only",
    "reattn": "reattn",
}

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract wants 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def _load_head_set(path: str | None) -> HeadSet:
    if path is None:
        return HeadSet.all_heads()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(raw, list) or not all(
        isinstance(p, list) and len(p) == 2 for p in raw
    ):
        raise SchemaError(f"{path}: head mask must be a list of [layer, head] pairs")
    return HeadSet.of(raw)


def _rank_one(path: Path, method: str, heads: HeadSet) -> tuple[Run, dict]:
    inst = load_instance(path)
    run, breakdowns = reattn_pipeline(inst, PipelineConfig(method=method, heads=heads))
    if "query_id" not in inst.metadata:
        # Dumps without an explicit query id fall back to their file name.
        run = Run(query_id=path.stem, entries=run.entries)
    return run, breakdown_report(run, breakdowns, method)


def cmd_rank(args) -> int:
    method = _METHOD_FLAGS[args.method]
    heads = _load_head_set(args.heads)
    root = Path(args.input)
    if root.is_dir():
        paths = sorted(root.glob("*.json"))
        if not paths:
            raise FileNotFoundError(f"no *.json dump files under {root}")
        if len(paths) > 1:
            with concurrent.futures.ProcessPoolExecutor() as pool:
                results = list(pool.map(_rank_one, paths, [method] * len(paths),
                                        [heads] * len(paths)))
        else:
            results = [_rank_one(paths[0], method, heads)]
    else:
        results = [_rank_one(root, method, heads)]

    results.sort(key=lambda pair: pair[0].query_id)
    runs = [run for run, _ in results]
    save_runs(runs, args.output, format=args.format, tag=args.tag)
    if args.explain:
        reports = [report for _, report in results]
        payload = reports[0] if len(reports) == 1 else reports
        _atomic_write_text(args.explain, json.dumps(payload, sort_keys=True, indent=2))
    log.info("ranked %d quer%s -> %s", len(runs), "y" if len(runs) == 1 else "ies",
             args.output)
    return EXIT_OK


def cmd_eval(args) -> int:
    runs = load_runs(args.run, format=args.run_format)
    qrels = load_qrels(args.qrels)
    by_id = {r.query_id: r for r in runs}
    ks = args.k or [10]

    header = ["query"]
    for k in ks:
        header += [f"nDCG@{k}", f"Recall@{k}"]
    rows = [header]
    sums = [0.0] * (2 * len(ks))
    query_ids = qrels.query_ids()
    if not query_ids:
        print("no judged queries", file=sys.stderr)
        return EXIT_OK
    for qid in query_ids:
        run = by_id.get(qid)
        if run is None:
            print(f"warning: query {qid} judged but absent from run; scoring 0",
                  file=sys.stderr)
            run = Run(query_id=qid, entries=())
        row = [qid]
        for j, k in enumerate(ks):
            nd, rc = ndcg_at_k(run, qrels, k), recall_at_k(run, qrels, k)
            sums[2 * j] += nd
            sums[2 * j + 1] += rc
            row += [f"{nd:.4f}", f"{rc:.4f}"]
        rows.append(row)
    rows.append(["mean"] + [f"{s / len(query_ids):.4f}" for s in sums])
    widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
    for row in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return EXIT_OK


def cmd_synth(args) -> int:
    params = SynthParams(
        seed=args.seed,
        n_docs=args.docs,
        tokens_per_doc=(args.tokens_min, args.tokens_max),
        n_layers=args.layers,
        n_heads=args.attn_heads,
        query_len=args.query_len,
        overlap_rate=args.overlap_rate,
        concentration=args.concentration,
        relevant_doc_count=args.relevant,
        attention_mode=args.mode,
    )
    result = generate_instance(params)
    save_instance(result.instance, args.out)
    qrels_path = args.qrels_out or str(args.out) + ".qrels"
    lines = []
    for qid in result.qrels.query_ids():
        for doc_id in sorted(result.qrels.judged(qid)):
            lines.append(f"{qid} 0 {doc_id} {result.qrels.relevance(qid, doc_id)}")
    _atomic_write_text(qrels_path, "".join(line + "\n" for line in lines))
    log.info("wrote %s and %s", args.out, qrels_path)
    return EXIT_OK


def cmd_diff(args) -> int:
    runs_a = load_runs(args.run_a, format=args.run_format)
    runs_b = load_runs(args.run_b, format=args.run_format)
    qrels = load_qrels(args.qrels)
    metrics = []
    for k in args.k or [10]:
        metrics += [f"ndcg@{k}", f"recall@{k}"]
    comparison = compare_runs(runs_a, runs_b, qrels, metrics)
    print(comparison.format_table(label_a=Path(args.run_a).name,
                                  label_b=Path(args.run_b).name))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="reattn", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    rank = sub.add_parser("rank", parents=[], help="score a dump file (or directory) and write a run")
    rank.add_argument("--input", required=True, help="dump file, or directory of *.json dumps")
    rank.add_argument("--method", choices=sorted(_METHOD_FLAGS), default="reattn")
    rank.add_argument("--heads", help="JSON file with a list of [layer, head] pairs")
    rank.add_argument("--output", required=True)
    rank.add_argument("--format", choices=("trec", "json"), default="trec")
    rank.add_argument("--explain", help="also write a per-document score breakdown (JSON)")
    rank.add_argument("--tag", default="reattn", help="tag column for TREC output")
    rank.set_defaults(func=cmd_rank)

    ev = sub.add_parser("eval", help="nDCG@k and Recall@k of a run against qrels")
    ev.add_argument("--run", required=True)
    ev.add_argument("--qrels", required=True)
    ev.add_argument("--k", type=int, action="append", help="cutoff; repeatable (default 10)")
    ev.add_argument("--run-format", choices=("auto", "trec", "json"), default="auto")
    ev.set_defaults(func=cmd_eval)

    synth = sub.add_parser("synth", help="generate a synthetic dump plus sidecar qrels")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--docs", type=int, default=8)
    synth.add_argument("--tokens-min", type=int, default=8)
    synth.add_argument("--tokens-max", type=int, default=24)
    synth.add_argument("--layers", type=int, default=2)
    synth.add_argument("--attn-heads", type=int, default=2)
    synth.add_argument("--query-len", type=int, default=4)
    synth.add_argument("--overlap-rate", type=float, default=0.25)
    synth.add_argument("--concentration", type=float, default=0.3)
    synth.add_argument("--relevant", type=int, default=1)
    synth.add_argument("--mode", choices=("per_head", "aggregated"), default="per_head")
    synth.add_argument("--out", required=True)
    synth.add_argument("--qrels-out")
    synth.set_defaults(func=cmd_synth)

    diff = sub.add_parser("diff", help="compare two runs metric by metric")
    diff.add_argument("run_a")
    diff.add_argument("run_b")
    diff.add_argument("--qrels", required=True)
    diff.add_argument("--k", type=int, action="append")
    diff.add_argument("--run-format", choices=("auto", "trec", "json"), default="auto")
    diff.set_defaults(func=cmd_diff)
    return parser


def main(argv=None) -> int:
    level = _LOG_LEVELS.get(os.environ.get("REATTN_LOG", "warn").lower())
    logging.basicConfig(level=level if level is not None else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (OSError, ParseError) as exc:
        print(f"reattn {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except KeyError as exc:
        # compare_runs raises KeyError for mismatched query sets; the eval
        # contract files that under I/O-class failures.
        print(f"reattn {args.command}: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_IO
    except (SchemaError, ModeError, ShapeError, ParamError, ValueError) as exc:
        print(f"reattn {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
