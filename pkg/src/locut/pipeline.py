"""File-based experiment stages: generate, collect, featurize, train,
predict, evaluate, report.

Every artifact records a lineage hash of the configuration and inputs that
produced it, and downstream stages refuse inputs whose hashes disagree.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset, build_dataset, split_by_seed
from .errors import LineageMismatch, SchemaMismatch, TooFewPairs
from .evaluation import (
    METRICS,
    STRATEGIES,
    affected,
    bracket,
    comparison_table,
    corpus_stats,
    outcomes_from_runs,
    scatter_export,
    strategy_values,
    wilcoxon_signed_rank,
)
from .features import FEATURE_VERSION, featurize
from .forest import load_model, model_to_json, train
from .generators import generate_instance
from .instance import permute_instance, read_mps, save_mps
from .solver.bnc import branch_and_cut, root_stats
from .solver.records import ERROR, LC, NLC, RootStats, RunRecord, SolverConfig, read_runs, write_runs

log = logging.getLogger("locut")

STATS_VERSION = 1
BRACKET_STARTS = (0, 10_000, 100_000, 1_000_000)


def lineage_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _file_sha(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _meta_path(runs_path) -> Path:
    return Path(str(runs_path) + ".meta.json")


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def parse_seeds(text: str) -> list:
    """``"0-5"`` or ``"0,2,4"`` into a sorted list of unique seeds."""
    seeds = set()
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.update(range(int(lo), int(hi) + 1))
        else:
            seeds.add(int(part))
    if not seeds or min(seeds) < 0:
        raise ValueError(f"bad seed list {text!r}")
    return sorted(seeds)


def parse_limits(text: str | None) -> SolverConfig:
    """``"work=50000,wall=60"`` into a :class:`SolverConfig`."""
    if not text:
        return SolverConfig()
    names = {"work": ("work_limit", int), "wall": ("wall_limit_s", float), "rounds": ("max_root_rounds", int),
             "cuts": ("max_cuts_per_round", int), "node_rounds": ("node_cut_rounds", int)}
    kw = {}
    for part in text.split(","):
        if not part.strip():
            continue
        key, _, val = part.partition("=")
        key = key.strip()
        if key not in names:
            raise ValueError(f"unknown limit {key!r}; expected one of {sorted(names)}")
        field_name, conv = names[key]
        kw[field_name] = conv(val)
    return SolverConfig(**kw)


@dataclass
class ExperimentConfig:
    corpus_dir: Path
    out_dir: Path
    seeds: list = field(default_factory=lambda: list(range(6)))
    solver: SolverConfig = field(default_factory=SolverConfig)
    label_metric: str = "work"
    n_trees: int = 500
    cv_folds: int = 5
    cv_trees: int | None = None
    profile: str = "lab"
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be unique")
        if 0 not in self.seeds:
            raise ValueError("seed 0 is required for the test split")


# --------------------------------------------------------------------------
# gen
# --------------------------------------------------------------------------


def corpus_files(corpus_dir) -> list:
    files = sorted(Path(corpus_dir).glob("*.mps"))
    if not files:
        raise FileNotFoundError(f"no .mps files in {corpus_dir}")
    return files


def corpus_hash(corpus_dir) -> str:
    return lineage_hash([(f.name, _file_sha(f)) for f in corpus_files(corpus_dir)])


def cmd_gen(out_dir, family: str, count: int, n=None, m=None, seed: int = 0) -> list:
    """Write ``count`` generated instances as MPS files; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        inst = generate_instance(family, n=n, m=m, seed=seed + i)
        p = out / f"{inst.name}.mps"
        save_mps(inst, p)
        paths.append(p)
    return paths


# --------------------------------------------------------------------------
# collect
# --------------------------------------------------------------------------


def _solve_job(path: str, seed: int, strategy: str, config: dict) -> dict:
    inst = permute_instance(read_mps(path), seed)
    cfg = SolverConfig(**config).with_strategy(strategy)
    try:
        rec = branch_and_cut(inst, cfg, problem_id=inst.name, seed=seed)
    except Exception as exc:  # a crashed run is data, not a reason to stop the sweep
        rec = RunRecord(inst.name, seed, strategy, ERROR, 0, 0.0, 0, 0.0, None, None, RootStats(), repr(exc))
    return rec.to_json()


def cmd_collect(corpus_dir, runs_path, seeds=range(6), config: SolverConfig | None = None, jobs: int = 1) -> list:
    """Run LC and NLC on every (instance, seed); resumable.

    Records are appended as they finish, so an interrupted sweep can be
    restarted; at the end the file is rewritten in sorted order.
    """
    config = config or SolverConfig()
    seeds = sorted(set(int(s) for s in seeds))
    files = corpus_files(corpus_dir)
    cfg = asdict(config)
    cfg.pop("local_cuts")
    chash = corpus_hash(corpus_dir)
    meta = {"v": 1, "corpus": chash, "config": cfg, "seeds": seeds}
    meta["lineage"] = lineage_hash(meta)
    mpath = _meta_path(runs_path)
    if mpath.exists():
        old = json.loads(mpath.read_text())
        if old.get("lineage") != meta["lineage"]:
            raise LineageMismatch(f"{runs_path} was collected with a different corpus or configuration")
    _write_json(mpath, meta)

    names = {}
    for f in files:
        name = read_mps(f).name
        if name in names:
            raise SchemaMismatch(f"duplicate problem name {name!r} in {names[name]} and {f}")
        names[name] = f
    done = {(r.problem_id, r.seed, r.strategy) for r in read_runs(runs_path)}
    todo = [
        (str(names[name]), s, strat)
        for name in sorted(names)
        for s in seeds
        for strat in (LC, NLC)
        if (name, s, strat) not in done
    ]
    log.info("collect: %d runs to do, %d already present", len(todo), len(done))
    # drop any truncated tail before appending
    write_runs(read_runs(runs_path), runs_path)
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            futs = [ex.submit(_solve_job, p, s, st, cfg) for p, s, st in todo]
            for fut in futs:
                write_runs([RunRecord.from_json(fut.result())], runs_path, append=True)
    else:
        for p, s, st in todo:
            write_runs([RunRecord.from_json(_solve_job(p, s, st, cfg))], runs_path, append=True)
    records = sorted(read_runs(runs_path), key=lambda r: (r.problem_id, r.seed, r.strategy))
    write_runs(records, runs_path)
    return records


def _runs_meta(runs_path) -> dict:
    mpath = _meta_path(runs_path)
    if not mpath.exists():
        raise SchemaMismatch(f"{mpath} is missing; was {runs_path} written by collect?")
    return json.loads(mpath.read_text())


# --------------------------------------------------------------------------
# featurize
# --------------------------------------------------------------------------


def cmd_featurize(corpus_dir, runs_path, out_csv, label_metric: str = "work") -> Dataset:
    """Static features of each permuted instance plus the run's root statistics."""
    meta = _runs_meta(runs_path)
    if corpus_hash(corpus_dir) != meta["corpus"]:
        raise LineageMismatch(f"{corpus_dir} does not match the corpus {runs_path} was collected on")
    runs = read_runs(runs_path)
    insts = {}
    for f in corpus_files(corpus_dir):
        inst = read_mps(f)
        insts[inst.name] = inst
    feats = {}
    for r in runs:
        if r.strategy != LC or r.key in feats or r.problem_id not in insts:
            continue
        feats[r.key] = featurize(permute_instance(insts[r.problem_id], r.seed), r.root)
    lineage = lineage_hash({"runs": meta["lineage"], "label": label_metric, "features": FEATURE_VERSION})
    ds = build_dataset(runs, feats, label_metric, {"lineage": lineage, "upstream": meta["lineage"]})
    ds.to_csv(out_csv)
    _write_json(_cleaning_path(out_csv), dict(ds.report, lineage=lineage))
    return ds


def _cleaning_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".cleaning.json")


# --------------------------------------------------------------------------
# train / predict
# --------------------------------------------------------------------------


def cmd_train(
    dataset_csv,
    out_model,
    n_trees: int | None = None,
    cv_folds: int = 5,
    cv_trees: int | None = None,
    profile: str = "lab",
    seed: int = 0,
    mode: str = "regression",
    tau: float = 0.0,
    jobs: int = 1,
):
    """Train on the permuted copies (seeds != 0); writes the model and a CV log."""
    ds = Dataset.from_csv(dataset_csv)
    train_ds, _ = split_by_seed(ds)
    if len(train_ds) == 0:
        raise SchemaMismatch(f"{dataset_csv} has no training samples (seeds other than 0)")
    model, cv = train(
        train_ds.X, train_ds.y, profile, n_trees, cv_folds, cv_trees, seed, mode, tau, jobs
    )
    params = {"n_trees": model.n_trees, "cv": cv_folds, "cv_trees": cv_trees, "profile": profile, "seed": seed,
              "mode": mode, "tau": tau}
    model.meta.update(dataset_lineage=ds.lineage, lineage=lineage_hash({"dataset": ds.lineage, "train": params}))
    Path(out_model).write_text(model_to_json(model))
    cv_log = dict(cv.as_dict(), lineage=model.meta["lineage"], n_train=len(train_ds), oob_rmse=model.oob_rmse)
    _write_json(Path(out_model).with_suffix(".cv.json"), cv_log)
    return model, cv


def root_features(inst, config: SolverConfig | None = None) -> np.ndarray:
    """Feature vector of a fresh instance; runs presolve and the root cut loop."""
    return featurize(inst, root_stats(inst, config))


def cmd_predict(model_path, dataset_csv=None, instances=(), config: SolverConfig | None = None) -> list:
    """Rows of (problem_id, seed, prediction, decision)."""
    model = load_model(model_path)
    rows = []
    if dataset_csv is not None:
        ds = Dataset.from_csv(dataset_csv)
        if model.meta.get("dataset_lineage") not in (None, ds.lineage):
            log.warning("model was trained on a different dataset lineage")
        if len(ds):
            preds = model.predict(ds.X)
            decs = model.decide(ds.X)
            rows += [(s.problem_id, s.seed, float(p), str(d)) for s, p, d in zip(ds.samples, preds, decs)]
    for path in instances:
        inst = read_mps(path)
        x = root_features(inst, config).reshape(1, -1)
        rows.append((inst.name, 0, float(model.predict(x)[0]), str(model.decide(x)[0])))
    return rows


# --------------------------------------------------------------------------
# evaluate / report
# --------------------------------------------------------------------------


def _wilcoxon(outcomes, decisions, metric, best) -> dict | None:
    vals = strategy_values(outcomes, decisions, metric)
    try:
        res = wilcoxon_signed_rank(vals[best], vals["RF"], alternative="greater")
    except TooFewPairs:
        return None
    return {"W": res.W, "p": res.p, "n": res.n, "method": res.method}


def cmd_evaluate(dataset_csv, runs_path, model_path, out_json, split: str = "test") -> dict:
    """Decide on every sample of the split and compare the four strategies."""
    ds = Dataset.from_csv(dataset_csv)
    meta = _runs_meta(runs_path)
    if ds.meta.get("upstream") != meta["lineage"]:
        raise LineageMismatch(f"{dataset_csv} was not built from {runs_path}")
    model = load_model(model_path)
    if model.meta.get("dataset_lineage") != ds.lineage:
        raise LineageMismatch(f"{model_path} was not trained on {dataset_csv}")
    train_ds, test_ds = split_by_seed(ds)
    part = {"test": test_ds, "train": train_ds, "all": ds}[split]
    keys = set(part.keys)
    outcomes = [o for o in outcomes_from_runs(read_runs(runs_path), ds.meta.get("label_metric", "work"))
                if o.key in keys]
    decisions = dict(zip(part.keys, (str(d) for d in model.decide(part.X)))) if len(part) else {}

    T = meta["config"]["work_limit"]
    tables = []
    for t1 in BRACKET_STARTS:
        sub = bracket(outcomes, t1, T) if t1 <= T else []
        tables.append({"subset": f"[{t1 // 1000}k,T]" if t1 else "[0,T]", "rows": comparison_table(sub, decisions)})
    aff = affected(decisions, outcomes)
    tables.append({"subset": "affected", "rows": comparison_table(aff, decisions)})

    full = comparison_table(outcomes, decisions)
    stats = {
        "v": STATS_VERSION,
        "lineage": lineage_hash({"dataset": ds.lineage, "model": model.meta.get("lineage"), "split": split}),
        "dataset_lineage": ds.lineage,
        "model_lineage": model.meta.get("lineage"),
        "split": split,
        "work_limit": T,
        "n": len(outcomes),
        "n_nlc_decisions": sum(1 for d in decisions.values() if d == NLC),
        "corpus": corpus_stats(outcomes) if outcomes else None,
        "tables": tables,
        "wilcoxon": {r["metric"]: _wilcoxon(outcomes, decisions, r["metric"], r["best"]) for r in full if r["best"]},
        "decisions": [[k[0], k[1], decisions[k]] for k in sorted(decisions)],
    }
    Path(out_json).write_text(json.dumps(stats, sort_keys=True, indent=2) + "\n")
    return stats


def _pct(v) -> str:
    return "n/a" if v is None else f"{100 * v:.1f}%"


def _num(v) -> str:
    return "n/a" if v is None else f"{v:.2f}"


def render_report(stats: dict) -> str:
    lines = [
        "# LC vs NLC report",
        "",
        f"Split: {stats['split']}, {stats['n']} instances, work limit T = {stats['work_limit']} pivots.",
        f"RF chose NLC on {stats['n_nlc_decisions']} instances.",
        "",
    ]
    corp = stats.get("corpus")
    if corp:
        lines += [
            "## Corpus",
            "",
            f"- LC faster than NLC by {_pct(corp['lc_faster_by'])} (shifted geometric mean of Time)",
            f"- NLC significantly faster on {_pct(corp['nlc_significant'])} of instances",
            f"- LC significantly faster on {_pct(corp['lc_significant'])} of instances",
            f"- a perfect chooser would gain {_pct(corp['oracle_gain'])} over AlwaysLC",
            "",
        ]
    for metric in METRICS:
        lines += [f"## {metric}", ""]
        lines.append("| subset | N | " + " | ".join(STRATEGIES) + " | Imp. | Pot. | Achiev. |")
        lines.append("|---" * (len(STRATEGIES) + 5) + "|")
        for table in stats["tables"]:
            row = next(r for r in table["rows"] if r["metric"] == metric)
            shm = row["shm"] or {}
            cells = [_num(shm.get(s)) for s in STRATEGIES]
            lines.append(
                f"| {table['subset']} | {row['n']} | " + " | ".join(cells)
                + f" | {_pct(row['imp'])} | {_pct(row['pot'])} | {_pct(row['achiev'])} |"
            )
        w = stats["wilcoxon"].get(metric)
        lines.append("")
        if w:
            lines.append(f"Wilcoxon signed-rank (best competitor > RF): W = {w['W']:g}, p = {w['p']:.3g} ({w['method']}, n = {w['n']})")
        else:
            lines.append("Wilcoxon signed-rank: too few non-zero differences")
        lines.append("")
    return "\n".join(lines)


def cmd_report(stats_json, dataset_csv, runs_path, out_dir) -> Path:
    """Write report.md and scatter.csv; refuses inputs from different lineages."""
    stats = json.loads(Path(stats_json).read_text())
    if stats.get("v") != STATS_VERSION:
        raise SchemaMismatch(f"{stats_json}: unsupported stats version")
    ds = Dataset.from_csv(dataset_csv)
    if stats["dataset_lineage"] != ds.lineage:
        raise LineageMismatch(f"{stats_json} was not computed from {dataset_csv}")
    if ds.meta.get("upstream") != _runs_meta(runs_path)["lineage"]:
        raise LineageMismatch(f"{dataset_csv} was not built from {runs_path}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    keys = set(ds.keys)
    outcomes = [o for o in outcomes_from_runs(read_runs(runs_path), ds.meta.get("label_metric", "work"))
                if o.key in keys]
    scatter_export(outcomes, out / "scatter.csv")
    report = out / "report.md"
    report.write_text(render_report(stats) + f"\nlineage: {stats['lineage']}\n")
    return report


def run_pipeline(cfg: ExperimentConfig, mode: str = "regression") -> dict:
    """collect → featurize → train → evaluate → report into ``cfg.out_dir``."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs = out / "runs.jsonl"
    cmd_collect(cfg.corpus_dir, runs, cfg.seeds, cfg.solver, cfg.jobs)
    cmd_featurize(cfg.corpus_dir, runs, out / "dataset.csv", cfg.label_metric)
    cmd_train(out / "dataset.csv", out / "model.json", cfg.n_trees, cfg.cv_folds, cfg.cv_trees, cfg.profile,
              cfg.seed, mode, jobs=cfg.jobs)
    stats = cmd_evaluate(out / "dataset.csv", runs, out / "model.json", out / "stats.json")
    cmd_report(out / "stats.json", out / "dataset.csv", runs, out)
    return stats
