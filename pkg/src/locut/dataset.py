"""Speedup labels, dataset assembly and cleaning, seed-based split."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MissingPair, SchemaMismatch
from .features import FEATURE_COLUMNS, FEATURE_VERSION, N_FEATURES
from .solver.records import ERROR, LC, NLC, OPTIMAL, RunRecord

DATASET_VERSION = 1
LABEL_METRICS = ("work", "wall")


def label(time_lc: float, time_nlc: float) -> float:
    """``log2((time_lc + 1) / (time_nlc + 1))``; negative when LC is faster."""
    if time_lc < 0 or time_nlc < 0:
        raise ValueError("times must be non-negative")
    return math.log2((time_lc + 1.0) / (time_nlc + 1.0))


def run_time(rec: RunRecord, metric: str = "work") -> float:
    if metric == "work":
        return float(rec.work)
    if metric == "wall":
        return float(rec.wall_s)
    raise ValueError(f"unknown time metric {metric!r}")


def metrics_of(rec: RunRecord, time_metric: str = "work") -> dict:
    return {
        "Time": run_time(rec, time_metric),
        "wall": float(rec.wall_s),
        "Nodes": float(rec.nodes),
        "PDI": float(rec.pdi),
    }


@dataclass
class LabeledSample:
    problem_id: str
    seed: int
    features: np.ndarray
    y: float
    met_lc: dict = field(default_factory=dict)
    met_nlc: dict = field(default_factory=dict)
    status_lc: str = ""
    status_nlc: str = ""

    @property
    def key(self):
        return (self.problem_id, self.seed)


@dataclass
class Dataset:
    """Labeled samples plus provenance.

    ``meta`` holds ``lineage`` (this dataset's hash), ``upstream`` (the runs
    it was built from) and ``label_metric``; all three go into the CSV header.
    """

    samples: list
    report: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def lineage(self) -> str:
        return self.meta.get("lineage", "")

    def __len__(self):
        return len(self.samples)

    @property
    def X(self) -> np.ndarray:
        if not self.samples:
            return np.zeros((0, N_FEATURES))
        return np.vstack([s.features for s in self.samples])

    @property
    def y(self) -> np.ndarray:
        return np.array([s.y for s in self.samples], dtype=float)

    @property
    def keys(self) -> list:
        return [s.key for s in self.samples]

    def subset(self, pred) -> "Dataset":
        return Dataset([s for s in self.samples if pred(s)], dict(self.report), dict(self.meta))

    # -- csv ---------------------------------------------------------------

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        extra = "".join(f" {k}={self.meta[k]}" for k in sorted(self.meta))
        buf.write(f"# locut-dataset v={DATASET_VERSION} features={FEATURE_VERSION}{extra}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(FEATURE_COLUMNS) + ["label", "problem_id", "seed"])
        for s in self.samples:
            w.writerow([repr(float(v)) for v in s.features] + [repr(float(s.y)), s.problem_id, s.seed])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        text = Path(path).read_text()
        lines = text.splitlines()
        meta = {}
        if lines and lines[0].startswith("#"):
            meta = dict(tok.split("=", 1) for tok in lines[0][1:].split() if "=" in tok)
            if meta.pop("v", None) != str(DATASET_VERSION) or meta.pop("features", None) != str(FEATURE_VERSION):
                raise SchemaMismatch(f"{path}: unsupported dataset header {lines[0]!r}")
            lines = lines[1:]
        reader = csv.reader(lines)
        header = next(reader, None)
        if header is None or tuple(header[:N_FEATURES]) != FEATURE_COLUMNS:
            raise SchemaMismatch(f"{path}: unexpected columns")
        samples = []
        for lineno, row in enumerate(reader, start=3):
            if len(row) != N_FEATURES + 3:
                raise SchemaMismatch(f"{path}:{lineno}: expected {N_FEATURES + 3} fields")
            feats = np.array([float(v) for v in row[:N_FEATURES]])
            samples.append(LabeledSample(row[N_FEATURES + 1], int(row[N_FEATURES + 2]), feats, float(row[N_FEATURES])))
        return cls(samples, {}, meta)


def pair_runs(runs) -> dict:
    """Group records into ``{(problem_id, seed): {"LC": rec, "NLC": rec}}``.

    Raises :class:`MissingPair` if a key has only one strategy.
    """
    pairs: dict = {}
    for r in runs:
        pairs.setdefault(r.key, {})[r.strategy] = r
    for key, d in pairs.items():
        if LC not in d or NLC not in d:
            missing = NLC if LC in d else LC
            raise MissingPair(f"{key[0]} seed {key[1]}: no {missing} run")
    return pairs


def build_dataset(runs, features: dict, label_metric: str = "work", meta: dict | None = None) -> Dataset:
    """One labeled sample per (problem, seed) after cleaning.

    Pairs where either run hit an ERROR are dropped, as are pairs that both
    strategies solved to optimality at the root.  ``features`` maps
    ``(problem_id, seed)`` to its 32-vector.
    """
    if label_metric not in LABEL_METRICS:
        raise ValueError(f"label metric must be one of {LABEL_METRICS}")
    pairs = pair_runs(runs)
    errors = root = 0
    samples = []
    for key in sorted(pairs):
        lc, nlc = pairs[key][LC], pairs[key][NLC]
        if lc.status == ERROR or nlc.status == ERROR:
            errors += 1
            continue
        if lc.nodes == 1 and nlc.nodes == 1 and lc.status == OPTIMAL and nlc.status == OPTIMAL:
            root += 1
            continue
        if key not in features:
            raise MissingPair(f"{key[0]} seed {key[1]}: no feature vector")
        y = label(run_time(lc, label_metric), run_time(nlc, label_metric))
        samples.append(
            LabeledSample(
                key[0],
                key[1],
                np.asarray(features[key], dtype=float),
                y,
                metrics_of(lc, label_metric),
                metrics_of(nlc, label_metric),
                lc.status,
                nlc.status,
            )
        )
    report = {"errors_dropped": errors, "root_solved_dropped": root, "kept": len(samples)}
    meta = dict(meta or {})
    meta["label_metric"] = label_metric
    return Dataset(samples, report, meta)


def split_by_seed(ds: Dataset) -> tuple[Dataset, Dataset]:
    """Train on the permuted copies (seeds 1..5), test on the originals (seed 0)."""
    train = ds.subset(lambda s: s.seed != 0)
    test = ds.subset(lambda s: s.seed == 0)
    return train, test
