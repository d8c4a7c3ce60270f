"""Command line interface: ``gubm simulate|split|train|evaluate|rerank|analyze``.

Exit status: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import analysis, logio
from .baselines import UBM, load_ubm_params
from .inference import GAMMA_TYINGS, load_params, read_table, save_params
from .metrics import evaluate_ndcg, original_rankings, perplexity, rerank, resolve_annotations
from .model import GUBM
from .simulate import SimConfig, simulate_log, truth_params

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _depths(text: str) -> list[int]:
    try:
        depths = [int(d) for d in text.split(",") if d]
    except ValueError:
        raise argparse.ArgumentTypeError(f"depths must be comma-separated integers, got {text!r}") from None
    if not depths or min(depths) < 1:
        raise argparse.ArgumentTypeError("depths must be positive")
    return depths


def _add_log_filters(p):
    p.add_argument("--log", required=True, help="session log file")
    p.add_argument("--manifest", help="split manifest written by `gubm split`")
    p.add_argument("--split", choices=["train", "test"], help="fold to use from --manifest")
    p.add_argument("--k", type=int, default=100, help="keep the first K cells of each page (default 100)")
    p.add_argument("--min-sessions", type=int, default=10, help="drop queries with fewer sessions (default 10)")
    p.add_argument("--max-sessions", type=int, default=1000, help="sessions kept per query (default 1000)")
    p.add_argument("--min-hover-dwell", type=int, default=0, help="drop hovers shorter than this many ms")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gubm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a synthetic log and its true relevance")
    p.add_argument("--config", help="JSON simulation settings")
    p.add_argument("--out", required=True, help="log file to write")
    p.add_argument("--truth", help="ground-truth parameter file (default: <out>.truth.tsv)")
    p.add_argument("--seed", type=int, help="override the seed in --config")
    p.add_argument("--workers", type=int, default=0, help="worker processes (0 = all cores)")

    p = sub.add_parser("split", help="deterministic per-query train/test split")
    p.add_argument("--log", required=True)
    p.add_argument("--ratio", default="7:3")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="manifest file to write")

    p = sub.add_parser("train", help="fit a model and write its parameters")
    _add_log_filters(p)
    p.add_argument("--model", choices=["gubm", "gubm-c", "ubm"], default="gubm")
    p.add_argument("--direction", choices=["ltor", "rtol", "zshape"], default="zshape")
    p.add_argument("--gamma-tying", choices=GAMMA_TYINGS, default="direction")
    p.add_argument("--iters", type=int, default=40)
    p.add_argument("--init", type=float, default=0.5)
    p.add_argument("--exclude-empty", action="store_true", help="ignore sessions without interactions")
    p.add_argument("--workers", type=int, default=0, help="E-step threads (0 = all cores)")
    p.add_argument("--out", required=True, help="parameter file to write")

    p = sub.add_parser("evaluate", help="perplexity or NDCG reports")
    _add_log_filters(p)
    p.add_argument("--params", required=True)
    p.add_argument("--metric", choices=["perplexity", "ndcg"], default="perplexity")
    p.add_argument("--annotations", help="annotation TSV (required for ndcg)")
    p.add_argument("--depths", type=_depths, default=[5, 10, 15, 20])
    p.add_argument("--json", dest="json_out", help="also write a JSON summary here")

    p = sub.add_parser("rerank", help="order candidate images by estimated relevance")
    p.add_argument("--params", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--candidates", required=True, help="file with one image id per line, original order")

    p = sub.add_parser("analyze", help="descriptive log statistics")
    p.add_argument("--log", required=True)
    p.add_argument("--stat", choices=["directions", "distances", "counts"], required=True)
    return parser


def load_model(path):
    """Load a GUBM or UBM parameter file as a fitted estimator."""
    with open(path, encoding="utf-8") as fh:
        meta, _ = read_table(fh)
    if meta.get("model") == "ubm":
        return UBM.from_params(load_ubm_params(path))
    return GUBM.from_params(load_params(path))


def _sessions(args, drop_hovers=False):
    filters = logio.LogFilters(
        min_sessions_per_query=args.min_sessions,
        max_sessions_per_query=args.max_sessions,
        drop_hovers=drop_hovers,
        min_hover_dwell_ms=args.min_hover_dwell,
        truncation=args.k,
    )
    if args.split and not args.manifest:
        raise UsageError("--split needs --manifest")
    if args.manifest and not args.split:
        raise UsageError("--manifest needs --split")
    sessions = logio.load_sessions(args.log, filters)
    if args.manifest:
        sessions = logio.select_fold(sessions, logio.read_manifest(args.manifest), args.split)
    if not sessions:
        raise ValueError("no sessions left after filtering")
    return sessions


def cmd_simulate(args, out):
    config = SimConfig.from_json(args.config) if args.config else SimConfig()
    if args.seed is not None:
        config.seed = args.seed
    sessions, queries = simulate_log(config, n_jobs=args.workers or -1)
    n = logio.write_sessions(sessions, args.out)
    truth = args.truth or f"{args.out}.truth.tsv"
    save_params(truth_params(queries), truth)
    out.write(f"wrote {n} sessions to {args.out} and true relevance to {truth}\n")


def cmd_split(args, out):
    ratio = logio.parse_ratio(args.ratio)
    sessions = list(logio.iter_sessions(args.log))
    fold = logio.split_sessions(sessions, ratio, args.seed)
    logio.write_manifest(fold, args.out)
    n_train = sum(f == "train" for f in fold.values())
    out.write(f"train\t{n_train}\ntest\t{len(fold) - n_train}\n")


def cmd_train(args, out):
    if args.iters < 1:
        raise UsageError("--iters must be >= 1")
    if args.model == "ubm" and args.gamma_tying != "direction":
        raise UsageError("--gamma-tying applies to GUBM only")
    sessions = _sessions(args, drop_hovers=args.model == "gubm-c")
    common = dict(direction=args.direction, iterations=args.iters, init_value=args.init, truncation=args.k,
                  include_empty=not args.exclude_empty, n_jobs=args.workers)
    if args.model == "ubm":
        model = UBM(**common).fit(sessions)
    else:
        model = GUBM(gamma_tying=args.gamma_tying, **common).fit(sessions)
        if args.model == "gubm-c":
            model.params_.meta["training"] = "click-only"
    model.save(args.out)
    out.write(f"model\t{args.model}\nsessions\t{len(sessions)}\niterations\t{model.n_iter_}\n"
              f"log_likelihood\t{_fmt(model.loglik_history_[-1])}\n")


def cmd_evaluate(args, out):
    model = load_model(args.params)
    sessions = _sessions(args)
    summary: dict = {"metric": args.metric}
    if args.metric == "perplexity":
        report = perplexity(sessions, model.predict_interaction_proba, truncation=args.k)
        out.write("rank\tperplexity\tsessions\n")
        for r, (p, n) in enumerate(zip(report.per_rank, report.counts)):
            out.write(f"{r}\t{_fmt(p)}\t{n}\n")
        out.write(f"overall\t{_fmt(report.overall)}\t{len(sessions)}\n")
        summary["per_rank"] = {str(r): round(float(p), 6) for r, p in enumerate(report.per_rank)}
        summary["overall"] = round(float(report.overall), 6)
    else:
        if not args.annotations:
            raise UsageError("--metric ndcg needs --annotations")
        relevance = resolve_annotations(logio.load_annotations(args.annotations))
        rows = evaluate_ndcg(original_rankings(sessions), relevance, model.params_, args.depths)
        if not rows:
            raise ValueError("no annotated images for the queries in this log")
        cols = [f"ndcg@{d}" for d in args.depths] + [f"original_ndcg@{d}" for d in args.depths] + ["zero_gain"]
        out.write("query\t" + "\t".join(cols) + "\n")
        for q, row in rows.items():
            out.write(q + "\t" + "\t".join(_fmt(row[c]) for c in cols) + "\n")
        mean = {c: float(np.mean([row[c] for row in rows.values()])) for c in cols}
        out.write("mean\t" + "\t".join(_fmt(mean[c]) for c in cols) + "\n")
        summary["per_query"] = {q: {c: round(v, 6) for c, v in row.items()} for q, row in rows.items()}
        summary["mean"] = {c: round(v, 6) for c, v in mean.items()}
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(summary, fh, sort_keys=True, indent=1)
            fh.write("\n")


def cmd_rerank(args, out):
    model = load_model(args.params)
    with open(args.candidates, encoding="utf-8") as fh:
        candidates = [line.strip() for line in fh if line.strip()]
    for u in rerank(args.query, candidates, model.params_):
        out.write(u + "\n")


def cmd_analyze(args, out):
    sessions = list(logio.iter_sessions(args.log))
    if args.stat == "directions":
        st = analysis.direction_stats(sessions)
        out.write("# adjacent interaction pairs that change row\n")
        out.write(f"down\t{st.down}\t{_fmt(st.down_fraction) if not st.empty else 'nan'}\n")
        out.write(f"up\t{st.up}\t{_fmt(st.up_fraction) if not st.empty else 'nan'}\n")
        out.write(f"same_row\t{st.same_row}\n")
        if st.empty:
            out.write("# empty: no row-changing pairs\n")
    elif args.stat == "distances":
        out.write("# transition distance between adjacent interaction signals\ndistance\tfraction\n")
        for d, f in analysis.transition_distance_histogram(sessions).items():
            out.write(f"{d}\t{_fmt(f)}\n")
    else:
        for k, v in analysis.interaction_counts(sessions).items():
            out.write(f"{k}\t{_fmt(v) if isinstance(v, float) else v}\n")


COMMANDS = {
    "simulate": cmd_simulate,
    "split": cmd_split,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "rerank": cmd_rerank,
    "analyze": cmd_analyze,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"gubm {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArithmeticError as exc:
        print(f"gubm {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError, KeyError) as exc:
        print(f"gubm {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
