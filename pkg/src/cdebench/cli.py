"""Command-line front door: run, score, report, significance, splits."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dataset import load_csv_dataset
from .harness import (
    SplitPlan,
    format_float,
    json_line,
    load_config,
    make_splits,
    read_records,
    resolve_dataset,
    run_benchmark,
)
from .reports import QUALITY_METRICS, TIME_METRIC, heatmap_csv, significance_csv, significance_table
from .scoring import score_prediction_file


def _cmd_run(args) -> int:
    config = load_config(args.config)
    records = run_benchmark(config)
    failed = sum(1 for r in records if r.status == "failed")
    print(f"wrote {len(records)} records ({failed} failed) to {config.out}")
    return 0


def _cmd_score(args) -> int:
    ds = load_csv_dataset(args.truth, args.target)
    bundle = score_prediction_file(args.pred, ds.response)
    for name in QUALITY_METRICS:
        print(f"{name}: {format_float(getattr(bundle, name))}")
    print(f"{TIME_METRIC}: {format_float(bundle.fit_time_s + bundle.predict_time_s)}")
    return 0


def _cmd_report(args) -> int:
    store = Path(args.store)
    records = read_records(store / "records.jsonl")
    text = heatmap_csv(records, args.metric)
    (store / f"heatmap_{args.metric}.csv").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def _cmd_significance(args) -> int:
    store = Path(args.store)
    records = read_records(store / "records.jsonl")
    results, _ = significance_table(records, foundations=args.foundation, alpha=args.alpha)
    text = significance_csv(results)
    (store / "significance.csv").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def _cmd_splits(args) -> int:
    name, ds, _ = resolve_dataset(args.dataset, args.seed)
    plan = SplitPlan(args.n, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for rep, (train_idx, test_idx) in enumerate(make_splits(ds, plan)):
        obj = {
            "dataset": name,
            "n_train": plan.n_target,
            "rep": rep,
            "master_seed": plan.master_seed,
            "train": train_idx,
            "test": test_idx,
        }
        (out / f"splits_{plan.n_target}_{rep}.json").write_text(json_line(obj) + "\n", encoding="utf-8")
    print(f"wrote {plan.reps} split files to {out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cdebench", description="conditional density estimation benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a benchmark config end to end")
    run.add_argument("--config", required=True, help="JSON run config")
    run.set_defaults(handler=_cmd_run)

    score = sub.add_parser("score", help="score an interchange prediction file")
    score.add_argument("--pred", required=True, help="prediction JSONL")
    score.add_argument("--truth", required=True, help="CSV holding the test rows, in record order")
    score.add_argument("--target", required=True, help="response column in the truth CSV")
    score.set_defaults(handler=_cmd_score)

    report = sub.add_parser("report", help="rebuild one metric's heatmap from a store")
    report.add_argument("--store", required=True, help="directory holding records.jsonl")
    report.add_argument("--metric", required=True, choices=list(QUALITY_METRICS) + [TIME_METRIC])
    report.set_defaults(handler=_cmd_report)

    sig = sub.add_parser("significance", help="Welch/Holm comparisons from a store")
    sig.add_argument("--store", required=True, help="directory holding records.jsonl")
    sig.add_argument("--foundation", required=True, nargs="+", help="methods to test against the field")
    sig.add_argument("--alpha", type=float, default=0.1)
    sig.set_defaults(handler=_cmd_significance)

    splits = sub.add_parser("splits", help="export split indices for external predictors")
    splits.add_argument("--dataset", required=True, help="CSV path or synthetic dataset name")
    splits.add_argument("--n", required=True, type=int, help="training rows per split")
    splits.add_argument("--seed", type=int, default=0)
    splits.add_argument("--out", required=True, help="directory for the split files")
    splits.set_defaults(handler=_cmd_splits)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
