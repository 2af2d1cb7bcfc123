"""Command-line entry point: ``locut <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .errors import LocutError
from .generators import Family

EXIT_OK, EXIT_INVALID = 0, 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (generation, folds, forest)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes or threads")
    common.add_argument("--limits", default="", help="solver limits, e.g. work=200000,wall=120")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="locut", description="Learn when to use local cuts in branch and cut.")
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a corpus of MPS instances")
    g.add_argument("--family", required=True, choices=[f.value for f in Family])
    g.add_argument("--count", type=int, default=10)
    g.add_argument("--n", type=int, default=None, help="number of variables")
    g.add_argument("--m", type=int, default=None, help="number of constraints")
    g.add_argument("--out", required=True, type=Path)

    c = sub.add_parser("collect", parents=[common], help="run LC and NLC on every (instance, seed)")
    c.add_argument("--corpus", required=True, type=Path)
    c.add_argument("--seeds", default="0-5")
    c.add_argument("--out", required=True, type=Path, help="runs.jsonl")

    f = sub.add_parser("featurize", parents=[common], help="build dataset.csv from runs")
    f.add_argument("--corpus", required=True, type=Path)
    f.add_argument("--runs", required=True, type=Path)
    f.add_argument("--label-metric", default="work", choices=["work", "wall"])
    f.add_argument("--out", required=True, type=Path, help="dataset.csv")

    t = sub.add_parser("train", parents=[common], help="cross-validate and fit the forest")
    t.add_argument("--dataset", required=True, type=Path)
    t.add_argument("--trees", type=int, default=None, help="default: 500 (lab) or 50 (deployment)")
    t.add_argument("--cv", type=int, default=5, help="number of folds")
    t.add_argument("--cv-trees", type=int, default=None, help="trees per forest during the grid search")
    t.add_argument("--profile", default="lab", choices=["lab", "deployment"])
    t.add_argument("--mode", default="regression", choices=["regression", "classification"])
    t.add_argument("--tau", type=float, default=0.0)
    t.add_argument("--out", required=True, type=Path, help="model.json")

    pr = sub.add_parser("predict", parents=[common], help="decide LC/NLC for samples or MPS files")
    pr.add_argument("--model", required=True, type=Path)
    pr.add_argument("--dataset", type=Path, default=None)
    pr.add_argument("instances", nargs="*", type=Path)
    pr.add_argument("--out", type=Path, default=None, help="CSV output (default stdout)")

    e = sub.add_parser("evaluate", parents=[common], help="compare AlwaysLC, NeverLC, RF and Oracle")
    e.add_argument("--dataset", required=True, type=Path)
    e.add_argument("--runs", required=True, type=Path)
    e.add_argument("--model", required=True, type=Path)
    e.add_argument("--split", default="test", choices=["test", "train", "all"])
    e.add_argument("--out", required=True, type=Path, help="stats.json")

    r = sub.add_parser("report", parents=[common], help="write report.md and scatter.csv")
    r.add_argument("--stats", required=True, type=Path)
    r.add_argument("--dataset", required=True, type=Path)
    r.add_argument("--runs", required=True, type=Path)
    r.add_argument("--out", required=True, type=Path, help="output directory")
    return p


def _run(args) -> None:
    if args.cmd == "gen":
        paths = pipeline.cmd_gen(args.out, args.family, args.count, args.n, args.m, args.seed)
        print(f"wrote {len(paths)} instances to {args.out}")
    elif args.cmd == "collect":
        cfg = pipeline.parse_limits(args.limits)
        recs = pipeline.cmd_collect(args.corpus, args.out, pipeline.parse_seeds(args.seeds), cfg, args.jobs)
        print(f"{len(recs)} records in {args.out}")
    elif args.cmd == "featurize":
        ds = pipeline.cmd_featurize(args.corpus, args.runs, args.out, args.label_metric)
        print(json.dumps(ds.report, sort_keys=True))
    elif args.cmd == "train":
        model, cv = pipeline.cmd_train(
            args.dataset, args.out, args.trees, args.cv, args.cv_trees, args.profile, args.seed, args.mode,
            args.tau, args.jobs,
        )
        print(f"mtry={cv.mtry} min_leaf={cv.min_leaf} cv_rmse={cv.rmse:.4f} trees={model.n_trees}")
    elif args.cmd == "predict":
        if args.dataset is None and not args.instances:
            raise ValueError("give --dataset or at least one MPS file")
        rows = pipeline.cmd_predict(args.model, args.dataset, args.instances, pipeline.parse_limits(args.limits))
        fh = open(args.out, "w", newline="") if args.out else sys.stdout
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["problem_id", "seed", "prediction", "decision"])
            w.writerows(rows)
        finally:
            if args.out:
                fh.close()
    elif args.cmd == "evaluate":
        stats = pipeline.cmd_evaluate(args.dataset, args.runs, args.model, args.out, args.split)
        print(f"{stats['n']} instances evaluated; stats in {args.out}")
    elif args.cmd == "report":
        path = pipeline.cmd_report(args.stats, args.dataset, args.runs, args.out)
        print(f"wrote {path}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _run(args)
    except (LocutError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"locut: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
