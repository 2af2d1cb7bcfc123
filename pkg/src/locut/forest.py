"""Random forest of CART regression trees, grown from scratch.

Trees are kept as flat node arrays so the whole forest can be evaluated by a
single compiled kernel.  Every tree draws its bootstrap sample and its
per-node feature candidates from its own generator seeded by
``(seed, tree_index)``, so the model does not depend on how many threads
grew it.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import SchemaMismatch, TooFewSamples
from .features import N_FEATURES

MODEL_VERSION = 1
REGRESSION = "regression"
CLASSIFICATION = "classification"
MTRY_GRID = (5, 10, 32)
MIN_LEAF_GRID = (1, 5)
LC, NLC = "LC", "NLC"


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = kernels.predict_trees(
            X, self.feature, self.threshold, self.left, self.right, self.value, np.zeros(1, dtype=np.int64)
        )
        return out[:, 0]

    def to_nested(self) -> dict:
        """Nested dict form: splits ``{f, t, g, l, r}``, leaves ``{v, n}``."""
        nodes = [None] * self.n_nodes
        for i in range(self.n_nodes - 1, -1, -1):
            if self.feature[i] == kernels.LEAF:
                nodes[i] = {"v": float(self.value[i]), "n": int(self.count[i])}
            else:
                nodes[i] = {
                    "f": int(self.feature[i]),
                    "t": float(self.threshold[i]),
                    "g": float(self.gain[i]),
                    "v": float(self.value[i]),
                    "n": int(self.count[i]),
                    "l": nodes[self.left[i]],
                    "r": nodes[self.right[i]],
                }
        return nodes[0]

    @classmethod
    def from_nested(cls, root: dict) -> "Tree":
        rows = []
        stack = [(root, 0)]
        rows.append(None)
        while stack:
            node, pos = stack.pop()
            if "f" in node:
                li, ri = len(rows), len(rows) + 1
                rows.extend([None, None])
                rows[pos] = (int(node["f"]), float(node["t"]), li, ri, float(node["v"]), int(node["n"]), float(node["g"]))
                stack.append((node["r"], ri))
                stack.append((node["l"], li))
            else:
                rows[pos] = (kernels.LEAF, 0.0, -1, -1, float(node["v"]), int(node["n"]), 0.0)
        cols = list(zip(*rows))
        ints = lambda a: np.array(a, dtype=np.int64)  # noqa: E731
        flt = lambda a: np.array(a, dtype=float)  # noqa: E731
        return cls(ints(cols[0]), flt(cols[1]), ints(cols[2]), ints(cols[3]), flt(cols[4]), ints(cols[5]), flt(cols[6]))

    def split_features(self) -> set:
        return {int(f) for f in self.feature if f != kernels.LEAF}


def fit_tree(X, y, mtry, min_leaf, rng, sample_idx=None, allowed=None, classify=False) -> Tree:
    """Grow one variance-reduction tree on ``X[sample_idx]``.

    With ``classify`` the labels must be 0/1 and each leaf stores its
    majority class (ties go to 0) instead of the mean.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if sample_idx is None:
        sample_idx = np.arange(X.shape[0])
    sample_idx = np.asarray(sample_idx, dtype=np.int64)
    if sample_idx.size == 0:
        raise TooFewSamples("cannot grow a tree on zero samples")
    allowed = np.arange(X.shape[1], dtype=np.int64) if allowed is None else np.asarray(allowed, dtype=np.int64)
    mtry = int(min(max(mtry, 1), allowed.size))
    max_nodes = max(2 * sample_idx.size - 1, 1)
    keys = rng.random((max_nodes, allowed.size))
    out = kernels.build_tree(X, y, sample_idx, allowed, mtry, int(min_leaf), keys)
    k = int(out[7])
    tree = Tree(*(np.array(a[:k]) for a in out[:7]))
    if classify:
        tree.value = np.where(tree.value > 0.5, 1.0, 0.0)
    return tree


@dataclass
class ForestModel:
    trees: list
    mtry: int
    min_leaf: int
    seed: int = 0
    feature_subset: tuple | None = None
    tau: float = 0.0
    majority_quota: float | None = None
    mode: str = REGRESSION
    bootstrap: bool = True
    oob_rmse: float | None = None
    meta: dict = field(default_factory=dict)
    _flat: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def _arrays(self):
        if self._flat is None:
            offs = np.cumsum([0] + [t.n_nodes for t in self.trees[:-1]]).astype(np.int64)
            cat = lambda name: np.concatenate([getattr(t, name) for t in self.trees])  # noqa: E731
            left = np.concatenate([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(self.trees, offs)])
            right = np.concatenate([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(self.trees, offs)])
            self._flat = (cat("feature"), cat("threshold"), left, right, cat("value"), offs)
        return self._flat

    def tree_predictions(self, X) -> np.ndarray:
        """Shape ``(n_samples, n_trees)``."""
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
        expected = self.meta.get("n_features", N_FEATURES)
        if X.shape[1] != expected:
            raise ValueError(f"expected {expected} features, got {X.shape[1]}")
        f, t, l, r, v, roots = self._arrays()
        return kernels.predict_trees(X, f, t, l, r, v, roots)

    def predict(self, X) -> np.ndarray:
        """Mean tree output: the regression estimate, or the NLC vote share."""
        return self.tree_predictions(X).mean(axis=1)

    def decide(self, X, tau: float | None = None) -> np.ndarray:
        """Vectorised :func:`decide`; returns an array of ``"LC"``/``"NLC"``."""
        P = self.tree_predictions(X)
        if self.mode == CLASSIFICATION:
            thr = 0.5
        else:
            thr = self.tau if tau is None else tau
        nlc = P.mean(axis=1) > thr
        if self.majority_quota is not None:
            nlc &= (P > thr).mean(axis=1) > self.majority_quota
        return np.where(nlc, NLC, LC)

    def importance(self) -> np.ndarray:
        """Total variance reduction per feature, summed over all splits."""
        imp = np.zeros(self.meta.get("n_features", N_FEATURES))
        for t in self.trees:
            split = t.feature != kernels.LEAF
            np.add.at(imp, t.feature[split], t.gain[split])
        return imp

    def params(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "mtry": self.mtry,
            "min_leaf": self.min_leaf,
            "seed": self.seed,
            "feature_subset": None if self.feature_subset is None else list(self.feature_subset),
            "tau": self.tau,
            "majority_quota": self.majority_quota,
            "mode": self.mode,
            "bootstrap": self.bootstrap,
            "oob_rmse": self.oob_rmse,
            "meta": self.meta,
        }


def predict(model: ForestModel, x) -> float:
    """Forest prediction for a single feature vector."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("feature vector must be finite")
    return float(model.predict(x.reshape(1, -1))[0])


def decide(model: ForestModel, x, tau: float | None = None) -> str:
    """``"NLC"`` iff the forest predicts above ``tau`` and, when a quota is
    set, more than that share of individual trees agree; ``"LC"`` otherwise."""
    return str(model.decide(np.asarray(x, dtype=float).reshape(1, -1), tau)[0])


def _tree_job(X, y, n, i, seed, mtry, min_leaf, allowed, bootstrap, classify):
    rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
    idx = rng.integers(0, n, n) if bootstrap else np.arange(n)
    return fit_tree(X, y, mtry, min_leaf, rng, idx, allowed, classify), idx


def fit_forest(
    X,
    y,
    n_trees: int = 500,
    mtry: int = 10,
    min_leaf: int = 5,
    seed: int = 0,
    feature_subset=None,
    mode: str = REGRESSION,
    bootstrap: bool = True,
    jobs: int = 1,
) -> ForestModel:
    """Bagged forest; a pure function of (data, params, seed)."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n == 0:
        raise TooFewSamples("training set is empty")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if mode not in (REGRESSION, CLASSIFICATION):
        raise ValueError(f"unknown mode {mode!r}")
    classify = mode == CLASSIFICATION
    target = (y > 0).astype(float) if classify else y
    allowed = None if feature_subset is None else np.array(sorted(feature_subset), dtype=np.int64)
    args = [(X, target, n, i, seed, mtry, min_leaf, allowed, bootstrap, classify) for i in range(n_trees)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(lambda a: _tree_job(*a), args))
    else:
        results = [_tree_job(*a) for a in args]
    model = ForestModel(
        trees=[r[0] for r in results],
        mtry=mtry,
        min_leaf=min_leaf,
        seed=seed,
        feature_subset=None if allowed is None else tuple(int(i) for i in allowed),
        mode=mode,
        bootstrap=bootstrap,
        meta={"n_features": X.shape[1]} if X.shape[1] != N_FEATURES else {},
    )
    if bootstrap:
        model.oob_rmse = _oob_rmse(model, X, target, [r[1] for r in results])
    return model


def _oob_rmse(model, X, y, boots):
    n = X.shape[0]
    P = model.tree_predictions(X)
    inbag = np.zeros((n, len(boots)), dtype=bool)
    for t, idx in enumerate(boots):
        inbag[idx, t] = True
    oob = ~inbag
    k = oob.sum(axis=1)
    has = k > 0
    if not has.any():
        return None
    est = np.where(oob, P, 0.0).sum(axis=1)[has] / k[has]
    return float(np.sqrt(np.mean((est - y[has]) ** 2)))


def rmse(pred, y) -> float:
    return float(np.sqrt(np.mean((np.asarray(pred) - np.asarray(y)) ** 2)))


@dataclass
class CVResult:
    mtry: int
    min_leaf: int
    rmse: float
    table: list

    def as_dict(self) -> dict:
        return {"mtry": self.mtry, "min_leaf": self.min_leaf, "rmse": self.rmse, "grid": self.table}


def kfold_indices(n: int, k: int, seed: int) -> list:
    """Random partition of ``range(n)`` into ``k`` near-equal folds."""
    perm = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED])).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def cross_validate(
    X,
    y,
    mtry_grid=MTRY_GRID,
    min_leaf_grid=MIN_LEAF_GRID,
    k: int = 5,
    seed: int = 0,
    n_trees: int = 500,
    feature_subset=None,
    mode: str = REGRESSION,
    jobs: int = 1,
) -> CVResult:
    """Grid search by k-fold validation RMSE.

    Ties go to the smaller mtry, then the smaller min_leaf.  mtry values
    above the number of usable features are clipped and deduplicated.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n < k or k < 2:
        raise TooFewSamples(f"need at least k={k} samples (and k >= 2), got {n}")
    p = X.shape[1] if feature_subset is None else len(feature_subset)
    mtrys = sorted({min(int(m), p) for m in mtry_grid})
    leaves = sorted({int(v) for v in min_leaf_grid})
    folds = kfold_indices(n, k, seed)
    target = (y > 0).astype(float) if mode == CLASSIFICATION else y
    table = []
    for m in mtrys:
        for leaf in leaves:
            errs = []
            for j, val in enumerate(folds):
                tr = np.setdiff1d(np.arange(n), val)
                model = fit_forest(X[tr], y[tr], n_trees, m, leaf, seed + 1000 * (j + 1), feature_subset, mode, jobs=jobs)
                errs.append(rmse(model.predict(X[val]), target[val]))
            table.append({"mtry": m, "min_leaf": leaf, "fold_rmse": errs, "mean_rmse": float(np.mean(errs))})
    best = min(table, key=lambda r: (r["mean_rmse"], r["mtry"], r["min_leaf"]))
    return CVResult(best["mtry"], best["min_leaf"], best["mean_rmse"], table)


def select_features(model: ForestModel, max_features: int = 7) -> tuple:
    """Indices of the ``max_features`` most important features (ties by index)."""
    imp = model.importance()
    order = sorted(range(imp.size), key=lambda i: (-imp[i], i))
    return tuple(sorted(order[:max_features]))


@dataclass(frozen=True)
class Profile:
    n_trees: int
    max_features: int | None
    majority_quota: float | None


LAB = Profile(n_trees=500, max_features=None, majority_quota=None)
DEPLOYMENT = Profile(n_trees=50, max_features=7, majority_quota=0.7)
PROFILES = {"lab": LAB, "deployment": DEPLOYMENT}


def train(
    X,
    y,
    profile: str | Profile = "lab",
    n_trees: int | None = None,
    cv_folds: int = 5,
    cv_trees: int | None = None,
    seed: int = 0,
    mode: str = REGRESSION,
    tau: float = 0.0,
    jobs: int = 1,
    mtry_grid=MTRY_GRID,
    min_leaf_grid=MIN_LEAF_GRID,
) -> tuple[ForestModel, CVResult]:
    """CV-tune, fit, and apply a profile (feature subset, tree count, quota).

    For the deployment profile the full forest ranks features first, then a
    smaller forest is refit on the top ones.  ``cv_trees`` lets the grid
    search use smaller forests than the final model.
    """
    prof = PROFILES[profile] if isinstance(profile, str) else profile
    trees = n_trees if n_trees is not None else prof.n_trees
    cv_n = cv_trees if cv_trees is not None else trees
    cv = cross_validate(X, y, mtry_grid, min_leaf_grid, cv_folds, seed, cv_n, mode=mode, jobs=jobs)
    model = fit_forest(X, y, trees, cv.mtry, cv.min_leaf, seed, mode=mode, jobs=jobs)
    if prof.max_features is not None and prof.max_features < np.asarray(X).shape[1]:
        subset = select_features(model, prof.max_features)
        model = fit_forest(X, y, trees, min(cv.mtry, len(subset)), cv.min_leaf, seed, subset, mode, jobs=jobs)
    model.tau = float(tau)
    model.majority_quota = prof.majority_quota
    return model, cv


def model_to_json(model: ForestModel) -> str:
    doc = {"v": MODEL_VERSION, "params": model.params(), "trees": [t.to_nested() for t in model.trees]}
    return json.dumps(doc, separators=(",", ":"), sort_keys=True)


def model_from_json(text: str) -> ForestModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaMismatch(f"model file is not valid JSON: {e}") from None
    if not isinstance(doc, dict) or doc.get("v") != MODEL_VERSION:
        raise SchemaMismatch(f"unsupported model version {doc.get('v') if isinstance(doc, dict) else None!r}")
    try:
        p = doc["params"]
        trees = [Tree.from_nested(t) for t in doc["trees"]]
        model = ForestModel(
            trees=trees,
            mtry=int(p["mtry"]),
            min_leaf=int(p["min_leaf"]),
            seed=int(p["seed"]),
            feature_subset=None if p["feature_subset"] is None else tuple(p["feature_subset"]),
            tau=float(p["tau"]),
            majority_quota=p["majority_quota"],
            mode=p["mode"],
            bootstrap=bool(p["bootstrap"]),
            oob_rmse=p["oob_rmse"],
            meta=p.get("meta", {}),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaMismatch(f"malformed model file: {e!r}") from None
    if not trees:
        raise SchemaMismatch("model has no trees")
    return model


def save_model(model: ForestModel, path) -> None:
    Path(path).write_text(model_to_json(model))


def load_model(path) -> ForestModel:
    return model_from_json(Path(path).read_text())
