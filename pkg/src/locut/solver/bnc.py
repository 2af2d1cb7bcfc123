"""Root cutting loop, best-bound branch and cut, and the primal-dual integral."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalFailure, ProvenInfeasible, WorkLimitReached
from ..instance import MipInstance, magnitude_sets
from .cuts import Cut, gomory_cuts
from .lp import INFEASIBLE as LP_INFEASIBLE
from .lp import OPTIMAL as LP_OPTIMAL
from .lp import UNBOUNDED as LP_UNBOUNDED
from .lp import LpSolution, WorkCounter, solve_lp
from .presolve import PresolveResult, presolve
from .records import ERROR, INFEASIBLE, LIMIT, OPTIMAL, RootStats, RunRecord, SolverConfig
from .scaling import ScaledProblem, scale

INT_TOL = 1e-6


class _WallLimit(Exception):
    pass


def compute_pdi(events, total_work: float) -> float:
    """Integral of the relative primal-dual gap over work.

    ``events`` are ``(work, primal, dual)`` triples in nondecreasing work
    order; each holds until the next one (the last until ``total_work``).
    The gap is 1 without an incumbent, else ``|p - d| / max(|p|, |d|, 1e-9)``
    clamped to [0, 1].  Work before the first event counts with gap 1.
    """
    total = 0.0
    prev = 0.0
    gap = 1.0
    for w, p, d in events:
        total += gap * max(0.0, min(w, total_work) - prev)
        prev = max(prev, min(w, total_work))
        if p is None or d is None:
            gap = 1.0
        else:
            gap = min(1.0, max(0.0, abs(p - d) / max(abs(p), abs(d), 1e-9)))
    total += gap * max(0.0, total_work - prev)
    return float(total)


@dataclass
class CutLogEntry:
    """A generated cut together with the bounds of the node it came from."""

    cut: Cut
    lower: np.ndarray
    upper: np.ndarray
    local: bool


@dataclass
class SolveTrace:
    """Optional side channel for tests: transforms and every generated cut."""

    presolved: PresolveResult | None = None
    scaled: ScaledProblem | None = None
    cuts: list = field(default_factory=list)

    def to_lp_space(self, x):
        return self.scaled.to_scaled(self.presolved.reduce_point(x))


class _Rows:
    """Base rows plus an appendable list of cut rows (all ``G``)."""

    def __init__(self, A, b, sense, int_mult_rows):
        self.A0 = np.asarray(A, dtype=float)
        self.b0 = np.asarray(b, dtype=float)
        self.sense0 = np.asarray(sense)
        self.mult0 = np.asarray(int_mult_rows, dtype=float)

    def build(self, cuts):
        if not cuts:
            return self.A0, self.b0, self.sense0, self.mult0
        C = np.vstack([c.coef for c in cuts])
        A = np.vstack([self.A0, C])
        b = np.concatenate([self.b0, [c.rhs for c in cuts]])
        sense = np.concatenate([self.sense0, np.full(len(cuts), "G")])
        mult = np.concatenate([self.mult0, np.zeros(len(cuts))])
        return A, b, sense, mult


def _row_int_mult(red: MipInstance, sc: ScaledProblem) -> np.ndarray:
    """Scale factor for slacks of rows whose slack is integral, else 0."""
    out = np.zeros(red.m)
    A = red.A
    is_int = red.is_integer
    for i in range(red.m):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        cols, vals = A.indices[lo:hi], A.data[lo:hi]
        if np.all(is_int[cols]) and np.all(vals == np.round(vals)) and red.b[i] == round(red.b[i]):
            out[i] = sc.row_scale[i]
    return out


def _is_integral(x, is_int) -> bool:
    v = x[is_int]
    return bool(np.all(np.abs(v - np.round(v)) <= INT_TOL))


@dataclass
class RootResult:
    status: str  # OPTIMAL (LP solved), INFEASIBLE, ERROR
    lp: LpSolution | None
    cuts: list
    stats: RootStats
    incumbent: np.ndarray | None = None
    incumbent_obj: float | None = None  # LP space, without offset
    message: str = ""


def root_cut_loop(
    P: MipInstance,
    config: SolverConfig,
    counter: WorkCounter | None = None,
    rows: _Rows | None = None,
    trace: SolveTrace | None = None,
    stats: RootStats | None = None,
) -> RootResult:
    """Solve the root LP and run Gomory rounds on it.

    ``P`` must already be presolved and scaled.  ``c_i``/``c_d``/``c_p`` are
    reported in the original objective space (``P.obj_offset`` included).
    """
    counter = counter or WorkCounter()
    stats = stats or RootStats(m_presolved=P.m, n_presolved=P.n)
    if rows is None:
        rows = _Rows(P.dense(), P.b, P.sense, np.zeros(P.m))
    off = P.obj_offset
    is_int = P.is_integer
    int_mult_cols = is_int.astype(float)
    stats.nnz_before = stats.nnz_after = P.nnz

    A, b, sense, mult = rows.build([])
    lp = solve_lp(A, b, sense, P.c, P.lb, P.ub, counter=counter)
    if lp.status == LP_INFEASIBLE:
        return RootResult(INFEASIBLE, lp, [], stats)
    if lp.status == LP_UNBOUNDED:
        return RootResult(ERROR, lp, [], stats, message="unbounded LP relaxation")
    c_i = lp.objective + off
    stats.c_i = c_i
    cuts: list[Cut] = []
    for _ in range(config.max_root_rounds):
        if _is_integral(lp.x, is_int):
            break
        A, b, sense, mult = rows.build(cuts)
        new = gomory_cuts(lp, A, b, np.concatenate([int_mult_cols, mult]), config.max_cuts_per_round)
        if not new:
            break
        if trace is not None:
            trace.cuts.extend(CutLogEntry(c, P.lb.copy(), P.ub.copy(), False) for c in new)
        cuts.extend(new)
        stats.rounds += 1
        stats.cuts_added += len(new)
        stats.nnz_after += sum(c.nnz for c in new)
        A, b, sense, mult = rows.build(cuts)
        nxt = solve_lp(A, b, sense, P.c, P.lb, P.ub, hint=lp.hint, counter=counter)
        if nxt.status != LP_OPTIMAL:
            stats.c_d = c_i
            return RootResult(INFEASIBLE if nxt.status == LP_INFEASIBLE else ERROR, nxt, cuts, stats)
        lp = nxt
    # both are valid lower bounds; keep the better one
    stats.c_d = max(c_i, lp.objective + off)

    inc, inc_obj = None, None
    if _is_integral(lp.x, is_int):
        inc = lp.x.copy()
        inc[is_int] = np.round(inc[is_int])
        inc_obj = float(P.c @ inc)
    else:
        x_round = lp.x.copy()
        x_round[is_int] = np.clip(np.round(x_round[is_int]), P.lb[is_int], P.ub[is_int])
        lb = np.where(is_int, x_round, P.lb)
        ub = np.where(is_int, x_round, P.ub)
        A0, b0, s0, _ = rows.build([])
        probe = solve_lp(A0, b0, s0, P.c, lb, ub, counter=counter)
        if probe.status == LP_OPTIMAL:
            inc = probe.x.copy()
            inc[is_int] = x_round[is_int]
            inc_obj = float(P.c @ inc)
    stats.c_p = None if inc_obj is None else inc_obj + off
    return RootResult(OPTIMAL, lp, cuts, stats, inc, inc_obj)


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    cuts: tuple = field(compare=False, default=())
    hint: tuple | None = field(compare=False, default=None)
    depth: int = field(compare=False, default=0)


def _scaled_magnitudes(stats: RootStats, P: MipInstance):
    ms = magnitude_sets(P)
    for tag, arr in (("a", ms.a_prime), ("b", ms.b_prime), ("c", ms.c_prime)):
        setattr(stats, f"scaled_{tag}_max", float(arr.max()) if arr.size else None)
        setattr(stats, f"scaled_{tag}_min", float(arr.min()) if arr.size else None)


def prepare(inst: MipInstance):
    """Presolve then scale; returns ``(PresolveResult, ScaledProblem)``."""
    pre = presolve(inst)
    return pre, scale(pre.instance)


def root_stats(inst: MipInstance, config: SolverConfig | None = None) -> RootStats:
    """Presolve, scale and run the root cut loop only; no branching."""
    config = config or SolverConfig()
    try:
        pre, sc = prepare(inst)
    except ProvenInfeasible:
        return RootStats()
    P = sc.instance
    stats = RootStats(m_presolved=pre.m_presolved, n_presolved=pre.n_presolved)
    _scaled_magnitudes(stats, P)
    if P.n == 0:
        stats.c_i = stats.c_d = stats.c_p = P.obj_offset
        return stats
    rows = _Rows(P.dense(), P.b, P.sense, _row_int_mult(pre.instance, sc))
    try:
        root_cut_loop(P, config, WorkCounter(config.work_limit), rows, None, stats)
    except (WorkLimitReached, NumericalFailure, np.linalg.LinAlgError):
        pass
    return stats


def branch_and_cut(
    inst: MipInstance,
    config: SolverConfig,
    *,
    problem_id: str | None = None,
    seed: int = 0,
    trace: SolveTrace | None = None,
) -> RunRecord:
    """Solve ``inst`` with the LC (local cuts) or NLC (root cuts only) strategy.

    Best-bound node selection, most-fractional branching with lowest-index
    tie-break.  With ``config.local_cuts`` each non-root node runs up to
    ``node_cut_rounds`` Gomory rounds whose cuts stay in that node's subtree.
    """
    t0 = time.perf_counter()
    pid = problem_id if problem_id is not None else inst.name
    counter = WorkCounter(config.work_limit)
    events: list = []
    deadline = t0 + config.wall_limit_s

    def record(status, nodes, primal, dual, stats, message=""):
        work = min(counter.pivots, config.work_limit)
        events.append((work, primal, dual))
        return RunRecord(
            problem_id=pid,
            seed=seed,
            strategy=config.strategy,
            status=status,
            work=work,
            wall_s=time.perf_counter() - t0,
            nodes=nodes,
            pdi=compute_pdi(events, work),
            obj_primal=primal,
            obj_dual=dual,
            root=stats,
            message=message,
        )

    try:
        pre, sc = prepare(inst)
    except ProvenInfeasible as exc:
        return record(INFEASIBLE, 1, None, None, RootStats(), str(exc))
    P = sc.instance
    off = P.obj_offset
    stats = RootStats(m_presolved=pre.m_presolved, n_presolved=pre.n_presolved)
    _scaled_magnitudes(stats, P)
    if trace is not None:
        trace.presolved, trace.scaled = pre, sc
    if P.n == 0:
        stats.c_i = stats.c_d = stats.c_p = off
        return record(OPTIMAL, 1, off, off, stats)

    rows = _Rows(P.dense(), P.b, P.sense, _row_int_mult(pre.instance, sc))
    is_int = P.is_integer
    int_mult_cols = is_int.astype(float)
    nodes = 0
    inc_x, inc = None, math.inf
    current_bound = -math.inf
    heap: list[_Node] = []

    def primal():
        return None if inc_x is None else inc + off

    def dual_bound():
        cands = [current_bound] + ([heap[0].bound] if heap else [])
        lo = min(cands)
        if inc_x is not None:
            lo = min(lo, inc)
        return None if not np.isfinite(lo) else lo + off

    def prune_tol(v):
        return 1e-9 * max(1.0, abs(v))

    try:
        root = root_cut_loop(P, config, counter, rows, trace, stats)
        nodes = 1
        if root.status == INFEASIBLE:
            return record(INFEASIBLE, 1, None, None, stats)
        if root.status == ERROR:
            return record(ERROR, 1, None, None, stats, root.message)
        if root.incumbent is not None:
            inc_x, inc = root.incumbent, root.incumbent_obj
        current_bound = stats.c_d - off
        events.append((counter.pivots, primal(), dual_bound()))
        global_cuts = list(root.cuts)
        rows = _Rows(*rows.build(global_cuts))
        root_lp = root.lp

        first = _Node(current_bound, 0, P.lb.copy(), P.ub.copy(), (), root_lp.hint)
        heapq.heappush(heap, first)
        seq = 1
        is_root = True
        while heap:
            if time.perf_counter() > deadline:
                raise _WallLimit()
            node = heapq.heappop(heap)
            current_bound = node.bound
            if inc_x is not None and node.bound >= inc - prune_tol(inc):
                heap.clear()
                break
            if is_root:
                lp = root_lp
                is_root = False
            else:
                nodes += 1
                A, b, sense, _ = rows.build(list(node.cuts))
                lp = solve_lp(A, b, sense, P.c, node.lb, node.ub, hint=node.hint, counter=counter)
                if lp.status == LP_UNBOUNDED:
                    return record(ERROR, nodes, primal(), dual_bound(), stats, "unbounded node LP")
                if lp.status != LP_OPTIMAL:
                    events.append((counter.pivots, primal(), dual_bound()))
                    continue
                if inc_x is not None and lp.objective >= inc - prune_tol(inc):
                    continue
                if config.local_cuts:
                    for _ in range(config.node_cut_rounds):
                        if _is_integral(lp.x, is_int):
                            break
                        A, b, sense, mult = rows.build(list(node.cuts))
                        new = gomory_cuts(lp, A, b, np.concatenate([int_mult_cols, mult]), config.max_cuts_per_round)
                        if not new:
                            break
                        if trace is not None:
                            trace.cuts.extend(CutLogEntry(c, node.lb.copy(), node.ub.copy(), True) for c in new)
                        node.cuts = node.cuts + tuple(new)
                        A, b, sense, _ = rows.build(list(node.cuts))
                        lp = solve_lp(A, b, sense, P.c, node.lb, node.ub, hint=lp.hint, counter=counter)
                        if lp.status != LP_OPTIMAL:
                            break
                    if lp.status != LP_OPTIMAL:
                        continue
                    if inc_x is not None and lp.objective >= inc - prune_tol(inc):
                        continue
            x = lp.x
            if _is_integral(x, is_int):
                cand = x.copy()
                cand[is_int] = np.round(cand[is_int])
                val = float(P.c @ cand)
                if val < inc:
                    inc_x, inc = cand, val
                    events.append((counter.pivots, primal(), dual_bound()))
                continue
            frac = np.abs(x - np.round(x))
            frac = np.where(is_int, frac, -1.0)
            j = int(np.argmax(frac))
            bound = max(node.bound, lp.objective)
            down_ub = node.ub.copy()
            down_ub[j] = math.floor(x[j])
            up_lb = node.lb.copy()
            up_lb[j] = math.ceil(x[j])
            hint = lp.hint
            heapq.heappush(heap, _Node(bound, seq, node.lb, down_ub, node.cuts, hint, node.depth + 1))
            heapq.heappush(heap, _Node(bound, seq + 1, up_lb, node.ub, node.cuts, hint, node.depth + 1))
            seq += 2
            events.append((counter.pivots, primal(), dual_bound()))
    except (WorkLimitReached, _WallLimit):
        return record(LIMIT, max(nodes, 1), primal(), dual_bound(), stats)
    except (NumericalFailure, np.linalg.LinAlgError) as exc:
        return record(ERROR, max(nodes, 1), primal(), dual_bound(), stats, f"numerical failure: {exc}")

    if inc_x is None:
        return record(INFEASIBLE, nodes, None, None, stats)
    return record(OPTIMAL, nodes, inc + off, inc + off, stats)
