"""Synthetic instance families for the desk-scale corpus.

Every generator plants a feasible point, so instances are feasible by
construction, and every instance has at least one integer column.
"""

from __future__ import annotations

from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment

from .errors import InvalidParams
from .instance import MipInstance, VarType

MAX_DIM = 60


class Family(str, Enum):
    KNAPSACK = "knapsack"
    SETCOVER = "setcover"
    ASSIGNMENT_PLUS_KNAPSACK = "assignment"
    MIXED = "mixed"

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, Family):
            return value
        key = str(value).strip().lower()
        for fam in cls:
            if key in (fam.value, fam.name.lower()):
                return fam
        raise InvalidParams(f"unknown family {value!r}")


DEFAULT_SIZES = {
    Family.KNAPSACK: (20, 2),
    Family.SETCOVER: (50, 30),
    Family.ASSIGNMENT_PLUS_KNAPSACK: (36, 2),
    Family.MIXED: (30, 20),
}


def generate_instance(family, n: int | None = None, m: int | None = None, seed: int = 0) -> MipInstance:
    """Build one instance of ``family`` with ``n`` columns and ``m`` rows.

    For the assignment family ``n`` is rounded down to a square ``k*k`` and
    ``m`` counts the side (budget) rows added to the ``2k`` assignment rows.
    """
    fam = Family.parse(family)
    dn, dm = DEFAULT_SIZES[fam]
    n = dn if n is None else int(n)
    m = dm if m is None else int(m)
    if not (1 <= n <= MAX_DIM and 1 <= m <= MAX_DIM):
        raise InvalidParams(f"n and m must lie in [1, {MAX_DIM}], got n={n}, m={m}")
    if seed < 0:
        raise InvalidParams("seed must be non-negative")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), list(Family).index(fam)]))
    name = f"{fam.value}_n{n}_m{m}_s{seed}"
    builder = {
        Family.KNAPSACK: _knapsack,
        Family.SETCOVER: _setcover,
        Family.ASSIGNMENT_PLUS_KNAPSACK: _assignment,
        Family.MIXED: _mixed,
    }[fam]
    inst, planted = builder(rng, n, m, name)
    assert inst.is_feasible(planted), "generator produced an infeasible planted point"
    return inst


def _knapsack(rng, n, m, name):
    if n < 2:
        raise InvalidParams("knapsack needs n >= 2")
    W = rng.integers(5, 41, size=(m, n)).astype(float)
    # mostly binary, a few bounded general integers
    ub = np.ones(n)
    general = rng.random(n) < 0.2
    ub[general] = rng.integers(2, 4, size=int(general.sum()))
    profit = np.round(W.mean(axis=0) + rng.integers(-5, 11, size=n)).clip(1, None)
    ratio = rng.uniform(0.3, 0.6, size=m)
    cap = np.floor(ratio * (W * ub).sum(axis=1))
    vt = np.full(n, VarType.INTEGER, dtype=np.int8)
    inst = MipInstance(
        name=name,
        c=-profit,
        A=sp.csr_array(W),
        b=cap,
        sense=np.full(m, "L"),
        lb=np.zeros(n),
        ub=ub,
        vartype=vt,
    )
    return inst, np.zeros(n)


def _setcover(rng, n, m, name):
    if n < 2:
        raise InvalidParams("set cover needs n >= 2")
    density = rng.uniform(0.05, 0.15)
    M = rng.random((m, n)) < density
    for i in range(m):
        if M[i].sum() < 2:
            M[i, rng.choice(n, size=2, replace=False)] = True
    # near-uniform costs keep the LP relaxation fractional
    cost = rng.integers(10, 14, size=n).astype(float)
    inst = MipInstance(
        name=name,
        c=cost,
        A=sp.csr_array(M.astype(float)),
        b=np.ones(m),
        sense=np.full(m, "G"),
        lb=np.zeros(n),
        ub=np.ones(n),
        vartype=np.full(n, VarType.BINARY, dtype=np.int8),
    )
    return inst, np.ones(n)


def _assignment(rng, n, m, name):
    k = int(np.floor(np.sqrt(n)))
    if k < 2:
        raise InvalidParams("assignment needs n >= 4")
    nv = k * k
    W = rng.integers(1, 31, size=(m, nv)).astype(float)
    # costs anticorrelated with the first budget row so the budget binds
    cost = (32.0 - W[0] + rng.integers(0, 11, size=nv)).astype(float)
    rows, cols, vals = [], [], []
    for i in range(k):
        for j in range(k):
            rows += [i, k + j]
            cols += [i * k + j, i * k + j]
            vals += [1.0, 1.0]
    _, light = linear_sum_assignment(W.sum(axis=0).reshape(k, k))
    planted = np.zeros(nv)
    planted[np.arange(k) * k + light] = 1.0
    _, cheap = linear_sum_assignment(cost.reshape(k, k))
    cheapest = np.zeros(nv)
    cheapest[np.arange(k) * k + cheap] = 1.0
    b = [1.0] * (2 * k)
    for s in range(m):
        w = W[s]
        lo, hi = float(w @ planted), float(w @ cheapest)
        budget = np.floor(lo + 0.3 * max(hi - lo, 0.0))
        r = 2 * k + s
        rows += [r] * nv
        cols += list(range(nv))
        vals += list(w)
        b.append(budget)
    nrows = 2 * k + m
    inst = MipInstance(
        name=name,
        c=cost,
        A=sp.csr_array((vals, (rows, cols)), shape=(nrows, nv)),
        b=np.array(b),
        sense=np.array(["E"] * (2 * k) + ["L"] * m),
        lb=np.zeros(nv),
        ub=np.ones(nv),
        vartype=np.full(nv, VarType.BINARY, dtype=np.int8),
    )
    return inst, planted


def _mixed(rng, n, m, name):
    n_int = max(1, int(round(n * rng.uniform(0.4, 0.7))))
    n_int = min(n_int, n)
    vt = np.array([VarType.INTEGER] * n_int + [VarType.CONTINUOUS] * (n - n_int), dtype=np.int8)
    order = rng.permutation(n)
    vt = vt[order]
    is_int = vt == VarType.INTEGER
    ub = np.where(is_int, rng.integers(1, 6, size=n), 10.0).astype(float)
    planted = np.where(is_int, np.floor(rng.random(n) * (ub + 1)).clip(0, ub), np.round(rng.random(n) * ub, 2))
    density = rng.uniform(0.25, 0.5)
    A = np.where(rng.random((m, n)) < density, rng.integers(-5, 10, size=(m, n)), 0).astype(float)
    for i in range(m):
        if not A[i].any():
            A[i, rng.integers(n)] = float(rng.integers(1, 10))
    act = A @ planted
    slack = rng.integers(0, 6, size=m).astype(float)
    is_ge = rng.random(m) < 0.3
    b = np.round(np.where(is_ge, act - slack, act + slack), 6)
    sense = np.where(is_ge, "G", "L")
    c = rng.integers(-10, 11, size=n).astype(float)
    if not c.any():
        c[0] = -1.0
    inst = MipInstance(
        name=name,
        c=c,
        A=sp.csr_array(A),
        b=b,
        sense=sense,
        lb=np.zeros(n),
        ub=ub,
        vartype=vt,
    )
    return inst, planted
