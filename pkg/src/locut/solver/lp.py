"""Dense bounded-variable simplex with tableau access.

Rows are turned into equalities with one slack per row, ``A x + s = b``,
where the slack of an ``L`` row lives in [0, inf), of a ``G`` row in
(-inf, 0] and of an ``E`` row is fixed at 0.  A cold start runs a phase-1
primal simplex on artificial columns; a warm start from a basis hint runs
the dual simplex (the usual situation after a bound change or after adding
cuts).  Dantzig pricing falls back to Bland's rule on long degenerate
streaks.  Every pivot and bound flip costs one unit of work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import NumericalFailure, WorkLimitReached

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
REINVERT_EVERY = 64
DEGENERATE_STREAK = 50

BASIC, AT_LB, AT_UB, FREE = 0, 1, 2, 3

OPTIMAL = "OPTIMAL"
INFEASIBLE = "INFEASIBLE"
UNBOUNDED = "UNBOUNDED"


class WorkCounter:
    """Shared pivot counter; raises :class:`WorkLimitReached` past ``limit``."""

    def __init__(self, limit: int | None = None):
        self.pivots = 0
        self.limit = limit

    def tick(self, k: int = 1):
        self.pivots += k
        if self.limit is not None and self.pivots > self.limit:
            raise WorkLimitReached(f"work limit {self.limit} exceeded")


@dataclass
class LpSolution:
    status: str
    objective: float | None
    x: np.ndarray | None
    values: np.ndarray | None = None  # structurals then slacks
    basis: np.ndarray | None = None  # column per row; -1 marks an artificial
    nonbasic_status: np.ndarray | None = None
    tableau: np.ndarray | None = None  # B^-1 [A I], rows aligned with basis
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    pivots: int = 0

    @property
    def hint(self):
        if self.basis is None:
            return None
        return self.basis.copy(), self.nonbasic_status.copy()


def slack_bounds(sense) -> tuple[np.ndarray, np.ndarray]:
    sense = np.asarray(sense)
    lo = np.where(sense == "G", -np.inf, 0.0)
    hi = np.where(sense == "L", np.inf, 0.0)
    return lo, hi


class _Simplex:
    def __init__(self, A, b, sense, c, lb, ub, counter):
        A = np.asarray(A, dtype=float)
        self.m, self.n = A.shape
        m, n = self.m, self.n
        slo, shi = slack_bounds(sense)
        self.ncore = n + m
        self.M = np.hstack([A, np.eye(m)])
        self.b = np.asarray(b, dtype=float).copy()
        self.cost = np.concatenate([np.asarray(c, dtype=float), np.zeros(m)])
        self.lo = np.concatenate([np.asarray(lb, dtype=float), slo])
        self.hi = np.concatenate([np.asarray(ub, dtype=float), shi])
        self.counter = counter
        self.since_reinvert = 0
        self.pivots = 0
        self.basis = np.arange(n, n + m)
        self.status = np.full(self.ncore, AT_LB, dtype=np.int8)
        self.x = np.zeros(self.ncore)
        self.tab = None

    # -- bookkeeping -------------------------------------------------------

    @property
    def N(self):
        return self.M.shape[1]

    def _reinvert(self):
        B = self.M[:, self.basis]
        aug = np.hstack([self.M, self.b[:, None]])
        try:
            self.tab = np.linalg.solve(B, aug) if self.m else aug.copy()
        except np.linalg.LinAlgError:
            raise NumericalFailure("singular basis") from None
        if not np.all(np.isfinite(self.tab)):
            raise NumericalFailure("non-finite tableau after reinversion")
        self.since_reinvert = 0
        self._update_xb()

    def _update_xb(self):
        nb = self.x.copy()
        nb[self.basis] = 0.0
        if self.m:
            self.x[self.basis] = self.tab[:, -1] - self.tab[:, :-1] @ nb

    def _reduced(self, cost):
        if not self.m:
            return cost.copy()
        return cost - cost[self.basis] @ self.tab[:, :-1]

    def _pivot(self, r, q):
        self.counter.tick()
        self.pivots += 1
        kernels.pivot(self.tab, r, q)
        self.basis[r] = q
        self.status[q] = BASIC
        self.since_reinvert += 1
        if self.since_reinvert >= REINVERT_EVERY:
            self._reinvert()
        else:
            self._update_xb()

    def _place_nonbasic(self, j, prefer_upper=False):
        lo, hi = self.lo[j], self.hi[j]
        if prefer_upper and np.isfinite(hi):
            self.status[j], self.x[j] = AT_UB, hi
        elif np.isfinite(lo):
            self.status[j], self.x[j] = AT_LB, lo
        elif np.isfinite(hi):
            self.status[j], self.x[j] = AT_UB, hi
        else:
            self.status[j], self.x[j] = FREE, 0.0

    def _max_iter(self):
        return 50 * (self.m + self.N) + 1000

    def primal_infeasibility(self):
        if not self.m:
            return 0.0
        xb = self.x[self.basis]
        lo, hi = self.lo[self.basis], self.hi[self.basis]
        return float(max(np.max(lo - xb, initial=0.0), np.max(xb - hi, initial=0.0)))

    def dual_infeasible_mask(self, cost):
        d = self._reduced(cost)
        st = self.status
        movable = (st != BASIC) & (self.lo < self.hi)
        bad_up = ((st == AT_LB) | (st == FREE)) & (d < -OPT_TOL)
        bad_dn = ((st == AT_UB) | (st == FREE)) & (d > OPT_TOL)
        return movable & (bad_up | bad_dn), d

    # -- primal simplex ----------------------------------------------------

    def primal(self, cost):
        streak = 0
        bland = False
        for _ in range(self._max_iter()):
            bad, d = self.dual_infeasible_mask(cost)
            cand = np.flatnonzero(bad)
            if cand.size == 0:
                return OPTIMAL
            q = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            dirn = 1.0 if d[q] < 0 else -1.0
            rate = -self.tab[:, q] * dirn if self.m else np.zeros(0)
            xb = self.x[self.basis]
            lo_b, hi_b = self.lo[self.basis], self.hi[self.basis]
            lim = np.full(self.m, np.inf)
            dec = rate < -PIVOT_TOL
            inc = rate > PIVOT_TOL
            with np.errstate(invalid="ignore", divide="ignore"):
                lim[dec] = (xb[dec] - lo_b[dec]) / -rate[dec]
                lim[inc] = (hi_b[inc] - xb[inc]) / rate[inc]
            lim = np.where(np.isnan(lim), np.inf, np.maximum(lim, 0.0))
            flip = self.hi[q] - self.lo[q]
            r = -1
            theta = np.inf
            if self.m and np.isfinite(lim).any():
                theta = float(lim.min())
                ties = np.flatnonzero(lim <= theta + 1e-12)
                if bland:
                    r = int(ties[np.argmin(self.basis[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(rate[ties]))])
            if flip <= theta:
                if not np.isfinite(flip):
                    tiny = (np.abs(rate) > 1e-11) & (np.abs(rate) <= PIVOT_TOL)
                    if np.any(tiny & (np.isfinite(lo_b) | np.isfinite(hi_b))):
                        raise NumericalFailure("pivot element below tolerance")
                    return UNBOUNDED
                self.counter.tick()
                self.pivots += 1
                self.x[q] = self.hi[q] if dirn > 0 else self.lo[q]
                self.status[q] = AT_UB if dirn > 0 else AT_LB
                self._update_xb()
                streak = 0
                continue
            leave = self.basis[r]
            self.x[q] += dirn * theta
            if rate[r] < 0:
                self.status[leave], self.x[leave] = AT_LB, self.lo[leave]
            else:
                self.status[leave], self.x[leave] = AT_UB, self.hi[leave]
            self._pivot(r, q)
            if theta <= 1e-12:
                streak += 1
                if streak > DEGENERATE_STREAK:
                    bland = True
            else:
                streak = 0
        raise NumericalFailure("primal simplex iteration limit")

    # -- dual simplex ------------------------------------------------------

    def dual(self, cost):
        for _ in range(self._max_iter()):
            if not self.m:
                return OPTIMAL
            xb = self.x[self.basis]
            below = self.lo[self.basis] - xb
            above = xb - self.hi[self.basis]
            viol = np.maximum(below, above)
            r = int(np.argmax(viol))
            if viol[r] <= FEAS_TOL:
                return OPTIMAL
            is_below = below[r] >= above[r]
            d = self._reduced(cost)
            row = self.tab[r, :-1]
            st = self.status
            movable = (st != BASIC) & (self.lo < self.hi)
            up = (st == AT_LB) | (st == FREE)
            dn = (st == AT_UB) | (st == FREE)
            if is_below:
                elig = movable & ((up & (row < -PIVOT_TOL)) | (dn & (row > PIVOT_TOL)))
            else:
                elig = movable & ((up & (row > PIVOT_TOL)) | (dn & (row < -PIVOT_TOL)))
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                if self.since_reinvert:
                    self._reinvert()
                    continue
                return INFEASIBLE
            ratio = np.abs(d[cand]) / np.abs(row[cand])
            best = ratio.min()
            ties = cand[ratio <= best + 1e-12]
            q = int(ties[np.argmax(np.abs(row[ties]))])
            leave = self.basis[r]
            if is_below:
                self.status[leave], self.x[leave] = AT_LB, self.lo[leave]
            else:
                self.status[leave], self.x[leave] = AT_UB, self.hi[leave]
            self._pivot(r, q)
        raise NumericalFailure("dual simplex iteration limit")

    # -- drivers -----------------------------------------------------------

    def cold_start(self):
        m, n = self.m, self.n
        self.M = self.M[:, : self.ncore]
        self.cost = self.cost[: self.ncore]
        self.lo, self.hi = self.lo[: self.ncore], self.hi[: self.ncore]
        self.status = np.full(self.ncore, AT_LB, dtype=np.int8)
        self.x = np.zeros(self.ncore)
        for j in range(n):
            self._place_nonbasic(j)
        v = self.b - self.M[:, :n] @ self.x[:n]
        slo, shi = self.lo[n:], self.hi[n:]
        clipped = np.clip(v, slo, shi)
        resid = v - clipped
        need = np.flatnonzero(np.abs(resid) > 0)
        basis = np.arange(n, n + m)
        art = np.zeros((m, need.size))
        for k, i in enumerate(need):
            art[i, k] = 1.0 if resid[i] > 0 else -1.0
            basis[i] = self.ncore + k
            self.status[n + i] = AT_LB if clipped[i] == slo[i] else AT_UB
            self.x[n + i] = clipped[i]
        self.status[basis[basis < self.ncore]] = BASIC
        na = need.size
        self.M = np.hstack([self.M, art])
        self.lo = np.concatenate([self.lo, np.zeros(na)])
        self.hi = np.concatenate([self.hi, np.full(na, np.inf)])
        self.cost = np.concatenate([self.cost, np.zeros(na)])
        self.status = np.concatenate([self.status, np.full(na, BASIC, dtype=np.int8)])
        self.x = np.concatenate([self.x, np.abs(resid[need])])
        self.basis = basis
        self._reinvert()
        if na:
            phase1 = np.zeros(self.N)
            phase1[self.ncore :] = 1.0
            self.primal(phase1)
            self._reinvert()
            infeas = float(self.x[self.ncore :].sum())
            if infeas > 1e-7 * max(1.0, float(np.abs(self.b).max(initial=0.0))):
                return INFEASIBLE
            self.hi[self.ncore :] = 0.0
            self.x[self.ncore :] = np.where(self.status[self.ncore :] == BASIC, self.x[self.ncore :], 0.0)
            self._drive_out_artificials()
        return self.primal(self.cost)

    def _drive_out_artificials(self):
        for r in range(self.m):
            if self.basis[r] < self.ncore:
                continue
            row = self.tab[r, : self.ncore].copy()
            row[self.status[: self.ncore] == BASIC] = 0.0
            q = int(np.argmax(np.abs(row)))
            if abs(row[q]) > 1e-7:
                leave = self.basis[r]
                self.status[leave], self.x[leave] = AT_LB, 0.0
                self._pivot(r, q)

    def warm_start(self, basis, status):
        """Install a hinted basis; returns the phase to run or None if unusable."""
        basis = np.asarray(basis)
        if basis.shape != (self.m,) or np.any(basis < 0) or np.any(basis >= self.ncore):
            return None
        if len(set(basis.tolist())) != self.m:
            return None
        self.basis = basis.astype(np.int64).copy()
        self.status = np.full(self.ncore, AT_LB, dtype=np.int8)
        self.status[self.basis] = BASIC
        try:
            self._reinvert_structure_only()
        except NumericalFailure:
            return None
        d = self._reduced(self.cost)
        dual_ok = True
        for j in np.flatnonzero(self.status != BASIC):
            lo, hi = self.lo[j], self.hi[j]
            hinted_up = status is not None and j < len(status) and status[j] == AT_UB
            if lo == hi:
                self.status[j], self.x[j] = AT_LB, lo
            elif d[j] > OPT_TOL:
                if np.isfinite(lo):
                    self.status[j], self.x[j] = AT_LB, lo
                else:
                    dual_ok = False
                    self._place_nonbasic(j)
            elif d[j] < -OPT_TOL:
                if np.isfinite(hi):
                    self.status[j], self.x[j] = AT_UB, hi
                else:
                    dual_ok = False
                    self._place_nonbasic(j, prefer_upper=True)
            else:
                self._place_nonbasic(j, prefer_upper=hinted_up)
        self._update_xb()
        if dual_ok:
            return "dual"
        if self.primal_infeasibility() <= FEAS_TOL:
            return "primal"
        return None

    def _reinvert_structure_only(self):
        self.x = np.zeros(self.N)
        self._reinvert()


def _finish(sx: _Simplex, counter_start: int, counter: WorkCounter):
    """Reinvert and polish until primal and dual feasible after a fresh factorisation."""
    for _ in range(4):
        sx._reinvert()
        pinf = sx.primal_infeasibility()
        dbad, _ = sx.dual_infeasible_mask(sx.cost)
        if pinf <= 1e-8 and not dbad.any():
            return OPTIMAL
        if pinf <= 1e-8:
            res = sx.primal(sx.cost)
            if res != OPTIMAL:
                return res
        elif not dbad.any():
            res = sx.dual(sx.cost)
            if res != OPTIMAL:
                return res
        else:
            res = sx.cold_start()
            if res != OPTIMAL:
                return res
    raise NumericalFailure("simplex did not settle after reinversion")


def solve_lp(A, b, sense, c, lb, ub, hint=None, counter: WorkCounter | None = None) -> LpSolution:
    """Minimise ``c.x`` subject to ``A x (sense) b`` and ``lb <= x <= ub``.

    ``hint`` is a ``(basis, nonbasic_status)`` pair from an earlier solve on
    the same columns; rows appended since then must come last, their slacks
    are made basic automatically.
    """
    counter = counter or WorkCounter()
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        A = A.reshape(len(b), -1)
    m, n = A.shape
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if np.any(lb > ub):
        return LpSolution(INFEASIBLE, None, None)
    sx = _Simplex(A, b, sense, c, lb, ub, counter)
    start = counter.pivots
    res = None
    if hint is not None:
        hb, hs = hint
        hb = np.asarray(hb, dtype=np.int64)
        if hb.shape[0] <= m:
            basis = np.concatenate([hb, np.arange(n + hb.shape[0], n + m)])
            hs = None if hs is None else np.concatenate([np.asarray(hs), np.full(m - hb.shape[0], BASIC)])
            phase = sx.warm_start(basis, hs)
            if phase == "dual":
                res = sx.dual(sx.cost)
                if res == OPTIMAL:
                    res = None  # polished below
            elif phase == "primal":
                res = sx.primal(sx.cost)
                if res == OPTIMAL:
                    res = None
            else:
                res = "cold"
        else:
            res = "cold"
    if hint is None or res == "cold":
        sx = _Simplex(A, b, sense, c, lb, ub, counter)
        res = sx.cold_start()
        if res == OPTIMAL:
            res = None
    if res is None:
        res = _finish(sx, start, counter)
    if res != OPTIMAL:
        return LpSolution(res, None, None, pivots=counter.pivots - start)
    values = sx.x[: sx.ncore].copy()
    basis = sx.basis.copy()
    basis[basis >= sx.ncore] = -1
    tableau = sx.tab[:, : sx.ncore].copy() if m else np.zeros((0, sx.ncore))
    return LpSolution(
        status=OPTIMAL,
        objective=float(sx.cost[: sx.ncore] @ values),
        x=values[:n].copy(),
        values=values,
        basis=basis,
        nonbasic_status=sx.status[: sx.ncore].copy(),
        tableau=tableau,
        lower=sx.lo[: sx.ncore].copy(),
        upper=sx.hi[: sx.ncore].copy(),
        pivots=counter.pivots - start,
    )


def solve_lp_instance(inst, hint=None, counter=None) -> LpSolution:
    """LP relaxation of a :class:`~locut.instance.MipInstance`."""
    return solve_lp(inst.dense(), inst.b, inst.sense, inst.c, inst.lb, inst.ub, hint=hint, counter=counter)
