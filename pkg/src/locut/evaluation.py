"""Comparison machinery: per-strategy metrics, shifted geometric means,
runtime brackets, affected instances, improvement accounting, Wilcoxon
signed-rank significance and scatter export."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .dataset import LabeledSample, label, metrics_of, pair_runs
from .errors import EmptySet, MissingPair, TooFewPairs
from .solver.records import LC, NLC, INFEASIBLE, OPTIMAL

METRICS = ("Time", "PDI", "Nodes")
SHIFTS = {"Time": 10.0, "PDI": 10.0, "Nodes": 1000.0}
STRATEGIES = ("AlwaysLC", "NeverLC", "RF", "Oracle")
COMPETITORS = ("AlwaysLC", "NeverLC")
SIGNIFICANT_SPEEDUP = 0.263  # |y| above this is roughly a 20% runtime difference


@dataclass(frozen=True)
class PairOutcome:
    """Both strategies' results on one (problem, seed)."""

    problem_id: str
    seed: int
    met_lc: dict
    met_nlc: dict
    solved_lc: bool
    solved_nlc: bool

    @property
    def key(self):
        return (self.problem_id, self.seed)

    @property
    def solved_any(self) -> bool:
        return self.solved_lc or self.solved_nlc

    @property
    def slower_time(self) -> float:
        return max(self.met_lc["Time"], self.met_nlc["Time"])

    @property
    def speedup(self) -> float:
        return label(self.met_lc["Time"], self.met_nlc["Time"])

    def value(self, choice: str, metric: str) -> float:
        if choice == LC:
            return float(self.met_lc[metric])
        if choice == NLC:
            return float(self.met_nlc[metric])
        raise ValueError(f"unknown choice {choice!r}")


def _solved(status: str) -> bool:
    return status in (OPTIMAL, INFEASIBLE)


def outcomes_from_runs(runs, time_metric: str = "work") -> list:
    pairs = pair_runs(runs)
    out = []
    for key in sorted(pairs):
        lc, nlc = pairs[key][LC], pairs[key][NLC]
        out.append(
            PairOutcome(key[0], key[1], metrics_of(lc, time_metric), metrics_of(nlc, time_metric), lc.solved, nlc.solved)
        )
    return out


def outcomes_from_samples(samples) -> list:
    """Outcomes for labeled samples that still carry their run metrics."""
    out = []
    for s in samples:
        s: LabeledSample
        if not s.met_lc or not s.met_nlc:
            raise MissingPair(f"{s.problem_id} seed {s.seed}: sample has no run metrics")
        out.append(
            PairOutcome(s.problem_id, s.seed, s.met_lc, s.met_nlc, _solved(s.status_lc), _solved(s.status_nlc))
        )
    return out


def strategy_metric(decisions: dict, outcomes, metric: str) -> np.ndarray:
    """Per-instance ``metric`` of the strategy that ``decisions`` chose.

    ``decisions`` maps ``(problem_id, seed)`` to ``"LC"``/``"NLC"`` and must
    cover every outcome.
    """
    vals = []
    for o in outcomes:
        if o.key not in decisions:
            raise MissingPair(f"{o.problem_id} seed {o.seed}: no decision")
        vals.append(o.value(decisions[o.key], metric))
    return np.array(vals, dtype=float)


def oracle_metric(outcomes, metric: str) -> np.ndarray:
    return np.array([min(o.value(LC, metric), o.value(NLC, metric)) for o in outcomes], dtype=float)


def strategy_values(outcomes, rf_decisions: dict, metric: str) -> dict:
    """Per-instance values of all four strategies for one metric."""
    return {
        "AlwaysLC": np.array([o.value(LC, metric) for o in outcomes], dtype=float),
        "NeverLC": np.array([o.value(NLC, metric) for o in outcomes], dtype=float),
        "RF": strategy_metric(rf_decisions, outcomes, metric),
        "Oracle": oracle_metric(outcomes, metric),
    }


def shifted_geomean(values, shift: float) -> float:
    """``(prod(v + shift))**(1/N) - shift`` evaluated in log space."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise EmptySet("shifted geometric mean of an empty set")
    if shift <= 0:
        raise ValueError("shift must be positive")
    if np.any(v < 0):
        raise ValueError("values must be non-negative")
    if np.all(v == v[0]):
        return float(v[0])
    return float(math.exp(float(np.mean(np.log(v + shift)))) - shift)


def bracket(outcomes, t1: float, t2: float) -> list:
    """Instances solved by at least one strategy whose slower time is in [t1, t2]."""
    if t1 > t2:
        raise ValueError("t1 must not exceed t2")
    return [o for o in outcomes if o.solved_any and t1 <= o.slower_time <= t2]


def affected(rf_decisions: dict, outcomes) -> list:
    """Instances solved by at least one strategy on which RF chooses NLC."""
    return [o for o in outcomes if o.solved_any and rf_decisions.get(o.key) == NLC]


def improvement(shm_rf: float, shm_oracle: float, shm_best: float) -> tuple:
    """``(Imp, Pot, Achiev)``; Achiev is ``None`` when Pot <= 0."""
    if shm_best <= 0:
        return 0.0, 0.0, None
    imp = 1.0 - shm_rf / shm_best
    pot = 1.0 - shm_oracle / shm_best
    achiev = imp / pot if pot > 0 else None
    return imp, pot, achiev


def comparison_table(outcomes, rf_decisions: dict, metrics=METRICS) -> list:
    """One row per metric: Shm of each strategy plus Imp./Pot./Achiev."""
    rows = []
    for metric in metrics:
        if not outcomes:
            rows.append({"metric": metric, "n": 0, "shm": None, "best": None, "imp": None, "pot": None, "achiev": None})
            continue
        vals = strategy_values(outcomes, rf_decisions, metric)
        shm = {s: shifted_geomean(vals[s], SHIFTS[metric]) for s in STRATEGIES}
        best = min(COMPETITORS, key=lambda s: (shm[s], COMPETITORS.index(s)))
        imp, pot, achiev = improvement(shm["RF"], shm["Oracle"], shm[best])
        rows.append(
            {"metric": metric, "n": len(outcomes), "shm": shm, "best": best, "imp": imp, "pot": pot, "achiev": achiev}
        )
    return rows


# --------------------------------------------------------------------------
# Wilcoxon signed-rank test
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WilcoxonResult:
    W: float  # sum of ranks of positive differences
    p: float
    n: int
    method: str


def _exact_upper_tail(ranks2: np.ndarray, w2: int) -> float:
    """P(W+ >= w) under random signs; ranks and w are doubled to integers."""
    total = int(ranks2.sum())
    counts = np.zeros(total + 1, dtype=float)
    counts[0] = 1.0
    for r in ranks2:
        r = int(r)
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    return float(counts[w2:].sum() / counts.sum())


def wilcoxon_signed_rank(a, b=None, alternative: str = "greater", method: str = "auto") -> WilcoxonResult:
    """Signed-rank test on ``d = a - b``.

    ``alternative="greater"`` tests whether ``a`` tends to exceed ``b``.
    Zero differences are dropped and tied magnitudes share their average
    rank.  ``method="auto"`` uses the exact null distribution for n <= 20
    and the normal approximation (continuity and tie corrected) above.
    """
    d = np.asarray(a, dtype=float) if b is None else np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = d[d != 0]
    n = int(d.size)
    if n < 5:
        raise TooFewPairs(f"need at least 5 non-zero differences, got {n}")
    if alternative not in ("greater", "less", "two-sided"):
        raise ValueError(f"unknown alternative {alternative!r}")
    if method == "auto":
        method = "exact" if n <= 20 else "normal"
    ranks = rankdata(np.abs(d))
    w = float(ranks[d > 0].sum())

    if method == "exact":
        ranks2 = np.rint(2 * ranks).astype(np.int64)
        w2 = int(round(2 * w))
        total2 = int(ranks2.sum())
        upper = _exact_upper_tail(ranks2, w2)
        lower = _exact_upper_tail(ranks2, total2 - w2)  # symmetry of the null
    elif method == "normal":
        mean = n * (n + 1) / 4.0
        _, tcounts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tcounts**3 - tcounts)) / 48.0
        sd = math.sqrt(var)
        upper = 0.5 * math.erfc(((w - mean - 0.5) / sd) / math.sqrt(2))
        lower = 0.5 * math.erfc((-(w - mean + 0.5) / sd) / math.sqrt(2))
    else:
        raise ValueError(f"unknown method {method!r}")

    if alternative == "greater":
        p = upper
    elif alternative == "less":
        p = lower
    else:
        p = min(1.0, 2.0 * min(upper, lower))
    return WilcoxonResult(w, min(1.0, p), n, method)


# --------------------------------------------------------------------------
# exports and corpus summaries
# --------------------------------------------------------------------------


def scatter_export(outcomes, path=None) -> str:
    """CSV of per-instance times and the speedup label."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["problem_id", "seed", "time_lc", "time_nlc", "speedup"])
    for o in outcomes:
        w.writerow([o.problem_id, o.seed, repr(float(o.met_lc["Time"])), repr(float(o.met_nlc["Time"])), repr(o.speedup)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def corpus_stats(outcomes) -> dict:
    """How the two strategies compare on a corpus, before any learning.

    ``lc_faster_by`` is ``1 - Shm(LC)/Shm(NLC)`` on Time; ``nlc_significant``
    the share of instances where NLC wins by more than the significance
    margin; ``oracle_gain`` the Time improvement a perfect chooser would
    get over AlwaysLC.
    """
    if not outcomes:
        raise EmptySet("no outcomes")
    t_lc = np.array([o.met_lc["Time"] for o in outcomes])
    t_nlc = np.array([o.met_nlc["Time"] for o in outcomes])
    y = np.array([o.speedup for o in outcomes])
    s_lc = shifted_geomean(t_lc, SHIFTS["Time"])
    s_nlc = shifted_geomean(t_nlc, SHIFTS["Time"])
    s_or = shifted_geomean(np.minimum(t_lc, t_nlc), SHIFTS["Time"])
    return {
        "n": len(outcomes),
        "lc_faster_by": 1.0 - s_lc / s_nlc if s_nlc > 0 else 0.0,
        "lc_significant": float(np.mean(y < -SIGNIFICANT_SPEEDUP)),
        "nlc_significant": float(np.mean(y > SIGNIFICANT_SPEEDUP)),
        "oracle_gain": 1.0 - s_or / s_lc if s_lc > 0 else 0.0,
    }
