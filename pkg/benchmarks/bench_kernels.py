"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is called once untimed so numba compilation is excluded.  An
end-to-end row times a forest fit and a branch-and-cut solve in a fresh
interpreter per backend (the backend is chosen at import time).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from locut import kernels
from locut._accel import NUMBA_INSTALLED


def _pivot_case(rng):
    tab = rng.normal(size=(60, 160))

    def run(fn):
        t = tab.copy()
        for k in range(40):
            fn(t, k % 60, (7 * k) % 160)

    return run


def _tree_case(rng):
    n, p = 1000, 32
    X = rng.random((n, p))
    y = X[:, 2] + X[:, 12] * X[:, 28] + 0.1 * rng.standard_normal(n)
    idx = rng.integers(0, n, n)
    allowed = np.arange(p, dtype=np.int64)
    keys = rng.random((2 * n - 1, p))
    return lambda fn: fn(X, y, idx, allowed, 10, 5, keys)


def _predict_case(rng):
    from locut.forest import fit_forest

    X, y = rng.random((500, 32)), rng.random(500)
    arrays = fit_forest(X, y, 100, 10, 5, seed=0)._arrays()
    Xq = rng.random((2000, 32))
    return lambda fn: fn(Xq, *arrays)


CASES = {
    "pivot (60x160, 40 pivots)": (_pivot_case, "pivot"),
    "build_tree (n=1000, p=32)": (_tree_case, "build_tree"),
    "predict (100 trees, 2000 rows)": (_predict_case, "predict_trees"),
}

END_TO_END = (
    "import time;"
    "from locut.generators import generate_instance;"
    "from locut.solver import branch_and_cut, SolverConfig;"
    "from locut.planted import planted_dataset;"
    "from locut.forest import fit_forest;"
    "ds = planted_dataset(500, 0);"
    "fit_forest(ds.X[:50], ds.y[:50], 2, 10, 5);"
    "branch_and_cut(generate_instance('knapsack', seed=0), SolverConfig());"
    "t = time.perf_counter(); fit_forest(ds.X, ds.y, 100, 10, 5); a = time.perf_counter() - t;"
    "t = time.perf_counter();"
    "[branch_and_cut(generate_instance('knapsack', seed=s), SolverConfig()) for s in range(10)];"
    "print(a, time.perf_counter() - t)"
)


def _best(run, fn, repeat):
    run(fn)  # warm-up / compile
    return min(timeit.repeat(lambda: run(fn), number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not NUMBA_INSTALLED:
        sys.exit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for name, (make, stem) in CASES.items():
        run = make(rng)
        t_np = _best(run, getattr(kernels, f"{stem}_numpy"), args.repeat)
        t_nb = _best(run, getattr(kernels, f"{stem}_numba"), args.repeat)
        print(f"{name:34s} {t_np * 1e3:11.2f} {t_nb * 1e3:11.2f} {t_np / t_nb:7.1f}x")

    times = {}
    for label, flag in (("numpy", "1"), ("numba", "0")):
        env = dict(os.environ, LOCUT_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
        times[label] = [float(v) for v in out.stdout.split()]
    for i, name in enumerate(("fit_forest (100 trees, n=500)", "solve 10 knapsack instances")):
        t_np, t_nb = times["numpy"][i], times["numba"][i]
        print(f"{name:34s} {t_np * 1e3:11.1f} {t_nb * 1e3:11.1f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
