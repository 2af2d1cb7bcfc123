"""Gomory mixed-integer cuts read off optimal simplex tableau rows."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lp import AT_LB, AT_UB, BASIC, FREE, LpSolution

INT_TOL = 1e-6
MIN_VIOLATION = 1e-4
MAX_DYNAMISM = 1e6
AWAY = 0.005
ZERO = 1e-9


@dataclass(frozen=True)
class Cut:
    """``coef . x >= rhs`` over the structural columns of the LP."""

    coef: np.ndarray
    rhs: float
    source: int  # basic column the tableau row belonged to

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.coef))

    def violation(self, x) -> float:
        return float(self.rhs - self.coef @ np.asarray(x, dtype=float))


def _frac(v: float) -> float:
    return v - math.floor(v)


def gomory_cuts(
    lp: LpSolution,
    A: np.ndarray,
    b: np.ndarray,
    int_mult: np.ndarray,
    max_cuts: int = 20,
) -> list[Cut]:
    """Separate the LP point with Gomory mixed-integer cuts.

    ``A``/``b`` are the LP rows the solution belongs to, in the same order as
    its slacks.  ``int_mult[j]`` is 0 for a continuous column (structural or
    slack) and otherwise a factor ``k`` such that ``k * (distance of the
    column from its bound)`` is integral; integer structurals use 1.  Cuts are
    valid for every integer-feasible point within the LP's current bounds
    and rows, so at a tree node they are locally valid.  Each cut is scaled to
    unit max-coefficient and cuts the LP point off by at least 1e-4.
    """
    if max_cuts <= 0 or lp.tableau is None:
        return []
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    x = lp.values
    xs = x[:n]
    is_int = int_mult[:n] > 0
    frac_dist = np.abs(xs - np.round(xs))
    if not np.any(is_int & (frac_dist > INT_TOL)):
        return []
    st = lp.nonbasic_status
    lo, hi = lp.lower, lp.upper
    movable = (st != BASIC) & (lo < hi)
    at_lb = movable & (st == AT_LB)
    at_ub = movable & (st == AT_UB)
    free = movable & (st == FREE)
    sign = np.where(at_ub, -1.0, 1.0)

    found: list[tuple[float, int, Cut]] = []
    for r in range(m):
        k = int(lp.basis[r])
        if k < 0 or k >= n or not is_int[k]:
            continue
        f0 = _frac(float(x[k]))
        if f0 < AWAY or f0 > 1.0 - AWAY:
            continue
        row = lp.tableau[r]
        a = row * sign  # coefficients on the distance-from-bound variables
        if np.any(free & (np.abs(row) > ZERO)):
            continue
        use = (at_lb | at_ub) & (np.abs(a) > ZERO)
        g = np.zeros(n + m)
        mult = int_mult
        integral = use & (mult > 0)
        cont = use & ~(mult > 0)
        alpha = np.zeros(n + m)
        alpha[integral] = a[integral] / mult[integral]
        fj = alpha - np.floor(alpha)
        small = integral & (fj <= f0)
        big = integral & (fj > f0)
        g[small] = mult[small] * fj[small] / f0
        g[big] = mult[big] * (1.0 - fj[big]) / (1.0 - f0)
        pos = cont & (a > 0)
        neg = cont & (a < 0)
        g[pos] = a[pos] / f0
        g[neg] = -a[neg] / (1.0 - f0)

        # back to structural space: sum g_j t_j >= 1
        coef = np.zeros(n)
        const = 0.0
        gs = g[:n]
        lo_s, hi_s = lo[:n], hi[:n]
        sel = gs != 0
        coef[sel & at_lb[:n]] += gs[sel & at_lb[:n]]
        coef[sel & at_ub[:n]] -= gs[sel & at_ub[:n]]
        const -= float(np.sum(gs[sel & at_lb[:n]] * lo_s[sel & at_lb[:n]]))
        const += float(np.sum(gs[sel & at_ub[:n]] * hi_s[sel & at_ub[:n]]))
        gsl = g[n:]
        # slack s_i = b_i - A_i x, nonbasic at its bound 0
        w = np.where(at_lb[n:], gsl, np.where(at_ub[n:], -gsl, 0.0))
        if np.any(w):
            coef -= w @ A
            const += float(w @ b)
        rhs = 1.0 - const

        scale = float(np.max(np.abs(coef), initial=0.0))
        if scale == 0.0 or not np.isfinite(scale) or not np.isfinite(rhs):
            continue
        coef = coef / scale
        rhs = rhs / scale
        tiny = (coef != 0) & (np.abs(coef) < ZERO)
        ok = True
        for j in np.flatnonzero(tiny):
            worst = max(coef[j] * lo_s[j], coef[j] * hi_s[j])
            if not np.isfinite(worst):
                ok = False
                break
            rhs -= worst
            coef[j] = 0.0
        if not ok:
            continue
        nz = np.abs(coef[coef != 0])
        if nz.size == 0 or nz.max() / nz.min() > MAX_DYNAMISM:
            continue
        rhs -= 1e-9 * max(1.0, abs(rhs))
        viol = rhs - float(coef @ xs)
        if viol < MIN_VIOLATION:
            continue
        found.append((viol, r, Cut(coef, float(rhs), k)))

    found.sort(key=lambda t: (-t[0], t[1]))
    out: list[Cut] = []
    seen = set()
    for _, _, cut in found:
        key = (tuple(np.round(cut.coef, 9)), round(cut.rhs, 9))
        if key in seen:
            continue
        seen.add(key)
        out.append(cut)
        if len(out) >= max_cuts:
            break
    return out
