"""Synthetic labeled datasets with a known dependence on three features.

Used to check that the learning pipeline can recover a signal at all.  The
label depends on f03, f13 and f29 only; every other feature is noise.  NLC
wins big in a narrow diagonal band, LC wins mildly everywhere else, so
getting the magnitude right matters more than getting the sign right.
"""

from __future__ import annotations

import numpy as np

from .dataset import Dataset, LabeledSample
from .features import N_FEATURES
from .solver.records import OPTIMAL

PLANTED = (2, 12, 28)  # f03, f13, f29


def planted_signal(X: np.ndarray) -> np.ndarray:
    """Noise-free label for feature rows ``X`` (columns scaled to [0, 1])."""
    a, b, c = X[:, PLANTED[0]], X[:, PLANTED[1]], X[:, PLANTED[2]]
    band = (a + b > 1.3) & (a + b < 1.7)
    return np.where(band, 1.0 + 1.5 * c, -0.25 - 0.25 * c)


def planted_dataset(n: int, seed: int, noise: float = 0.1, base_time=(100.0, 10_000.0)) -> Dataset:
    """``n`` samples with uniform features, ``y = planted_signal + N(0, noise)``.

    Run metrics are synthesised so that the label formula reproduces ``y``
    exactly: NLC time is log-uniform in ``base_time`` and LC time follows.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x91A7]))
    X = rng.random((n, N_FEATURES))
    y = planted_signal(X) + noise * rng.standard_normal(n)
    t_nlc = np.exp(rng.uniform(np.log(base_time[0]), np.log(base_time[1]), n))
    t_lc = (t_nlc + 1.0) * np.exp2(y) - 1.0
    samples = []
    for i in range(n):
        met_lc = {"Time": float(t_lc[i]), "wall": 0.0, "Nodes": float(t_lc[i] / 10), "PDI": float(t_lc[i] / 100)}
        met_nlc = {"Time": float(t_nlc[i]), "wall": 0.0, "Nodes": float(t_nlc[i] / 10), "PDI": float(t_nlc[i] / 100)}
        samples.append(LabeledSample(f"planted{seed}_{i}", 0, X[i], float(y[i]), met_lc, met_nlc, OPTIMAL, OPTIMAL))
    return Dataset(samples, {"errors_dropped": 0, "root_solved_dropped": 0, "kept": n}, {"lineage": f"planted-{seed}"})
