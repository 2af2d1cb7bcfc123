"""Bound and row reductions applied before the root LP."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import ProvenInfeasible
from ..instance import MipInstance, VarType

TOL = 1e-9
INT_TOL = 1e-6


@dataclass(frozen=True)
class PresolveResult:
    instance: MipInstance
    m_presolved: int
    n_presolved: int
    col_map: np.ndarray  # original index of every kept column
    row_map: np.ndarray  # original index of every kept row
    fixed: dict  # original column -> value for removed columns

    def __iter__(self):
        # allows ``inst, m_tilde, n_tilde = presolve(x)``
        return iter((self.instance, self.m_presolved, self.n_presolved))

    def reduce_point(self, x):
        """Map a point of the original space to the reduced space."""
        return np.asarray(x, dtype=float)[self.col_map]

    def expand_point(self, x_reduced):
        x = np.zeros(len(self.col_map) + len(self.fixed))
        x[self.col_map] = x_reduced
        for j, v in self.fixed.items():
            x[j] = v
        return x


def _activity_bounds(row: dict, lb, ub):
    lo = hi = 0.0
    for j, a in row.items():
        if a > 0:
            lo += a * lb[j]
            hi += a * ub[j]
        else:
            lo += a * ub[j]
            hi += a * lb[j]
    return lo, hi


def presolve(inst: MipInstance) -> PresolveResult:
    """Run the reductions to a fixpoint.

    Removes empty rows and columns, turns singleton rows into bounds,
    substitutes fixed columns, drops rows that activity bounds prove
    redundant and rounds integer bounds.  Raises :class:`ProvenInfeasible`
    on crossing bounds or an unsatisfiable row.
    """
    m, n = inst.m, inst.n
    A = inst.A
    rows = [dict(zip(A.indices[A.indptr[i] : A.indptr[i + 1]].tolist(), A.data[A.indptr[i] : A.indptr[i + 1]].tolist())) for i in range(m)]
    cols: list[set] = [set() for _ in range(n)]
    for i, r in enumerate(rows):
        for j in r:
            cols[j].add(i)
    b = inst.b.astype(float).copy()
    sense = list(inst.sense)
    lb = inst.lb.astype(float).copy()
    ub = inst.ub.astype(float).copy()
    integer = inst.is_integer
    row_alive = [True] * m
    col_alive = [True] * n
    offset = inst.obj_offset
    fixed: dict[int, float] = {}

    def infeasible(msg):
        raise ProvenInfeasible(msg)

    changed = True
    while changed:
        changed = False
        for j in range(n):
            if not col_alive[j]:
                continue
            if integer[j]:
                lo = math.ceil(lb[j] - INT_TOL) if np.isfinite(lb[j]) else lb[j]
                hi = math.floor(ub[j] + INT_TOL) if np.isfinite(ub[j]) else ub[j]
                if lo != lb[j] or hi != ub[j]:
                    lb[j], ub[j] = lo, hi
            if lb[j] > ub[j] + TOL:
                infeasible(f"bounds of {inst.col_names[j]} cross: [{lb[j]}, {ub[j]}]")
            if lb[j] > ub[j]:
                ub[j] = lb[j]
            if lb[j] == ub[j] and np.isfinite(lb[j]):
                v = float(lb[j])
                for i in cols[j]:
                    b[i] -= rows[i].pop(j) * v
                cols[j].clear()
                offset += inst.c[j] * v
                fixed[j] = v
                col_alive[j] = False
                changed = True
            elif not cols[j]:
                cj = inst.c[j]
                target = lb[j] if cj > 0 else ub[j] if cj < 0 else (lb[j] if np.isfinite(lb[j]) else ub[j] if np.isfinite(ub[j]) else 0.0)
                if np.isfinite(target):
                    lb[j] = ub[j] = target
                    changed = True
        for i in range(m):
            if not row_alive[i]:
                continue
            row = rows[i]
            s = sense[i]
            if not row:
                ok = (s == "L" and b[i] >= -TOL) or (s == "G" and b[i] <= TOL) or (s == "E" and abs(b[i]) <= TOL)
                if not ok:
                    infeasible(f"empty row {inst.row_names[i]} cannot hold")
                row_alive[i] = False
                changed = True
                continue
            if len(row) == 1:
                (j, a), = row.items()
                v = b[i] / a
                upper = (s == "L") == (a > 0)
                if s in ("L", "G"):
                    if upper:
                        ub[j] = min(ub[j], v)
                    else:
                        lb[j] = max(lb[j], v)
                else:
                    lb[j] = max(lb[j], v)
                    ub[j] = min(ub[j], v)
                del row[j]
                cols[j].discard(i)
                row_alive[i] = False
                changed = True
                continue
            lo, hi = _activity_bounds(row, lb, ub)
            slack = 1e-6 * max(1.0, abs(b[i]))
            if (s in ("L", "E") and lo > b[i] + slack) or (s in ("G", "E") and hi < b[i] - slack):
                infeasible(f"row {inst.row_names[i]} cannot be satisfied")
            redundant = (s == "L" and hi <= b[i] + TOL) or (s == "G" and lo >= b[i] - TOL)
            if redundant:
                for j in row:
                    cols[j].discard(i)
                row.clear()
                row_alive[i] = False
                changed = True

    keep_r = np.array([i for i in range(m) if row_alive[i]], dtype=np.int64)
    keep_c = np.array([j for j in range(n) if col_alive[j]], dtype=np.int64)
    pos = {j: k for k, j in enumerate(keep_c.tolist())}
    r_idx, c_idx, vals = [], [], []
    for k, i in enumerate(keep_r.tolist()):
        for j, a in rows[i].items():
            r_idx.append(k)
            c_idx.append(pos[j])
            vals.append(a)
    red = MipInstance(
        name=inst.name,
        c=inst.c[keep_c],
        A=sp.csr_array((vals, (r_idx, c_idx)), shape=(len(keep_r), len(keep_c))),
        b=b[keep_r],
        sense=np.array([sense[i] for i in keep_r.tolist()], dtype="<U1"),
        lb=lb[keep_c],
        ub=ub[keep_c],
        vartype=np.where(inst.vartype[keep_c] == VarType.BINARY, VarType.INTEGER, inst.vartype[keep_c]),
        row_names=tuple(inst.row_names[i] for i in keep_r.tolist()),
        col_names=tuple(inst.col_names[j] for j in keep_c.tolist()),
        obj_offset=offset,
    )
    return PresolveResult(red, len(keep_r), len(keep_c), keep_c, keep_r, fixed)
