import numpy as np
import pytest

from locut.errors import WorkLimitReached
from locut.solver import WorkCounter, solve_lp
from locut.solver.lp import INFEASIBLE, OPTIMAL, UNBOUNDED
from oracles import lp_by_vertex_enumeration

INF = np.inf


def test_single_variable_upper_bound():
    sol = solve_lp(np.zeros((0, 1)), np.zeros(0), np.array([], dtype="<U1"), np.array([-1.0]), [0.0], [3.0])
    assert sol.status == OPTIMAL
    assert sol.objective == -3.0 and sol.x[0] == 3.0


def test_single_variable_row_bound():
    sol = solve_lp(np.array([[1.0]]), np.array([3.0]), np.array(["L"]), np.array([-1.0]), [0.0], [INF])
    assert sol.status == OPTIMAL and sol.objective == pytest.approx(-3.0)


def test_unbounded():
    sol = solve_lp(np.zeros((0, 1)), np.zeros(0), np.array([], dtype="<U1"), np.array([-1.0]), [0.0], [INF])
    assert sol.status == UNBOUNDED


def test_infeasible():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    sol = solve_lp(A, np.array([1.0, 3.0]), np.array(["L", "G"]), np.ones(2), [0, 0], [5, 5])
    assert sol.status == INFEASIBLE


def _random_lp(rng, m=5, n=5):
    A = rng.integers(-5, 6, (m, n)).astype(float)
    x0 = rng.uniform(0, 3, n)
    act = A @ x0
    sense = rng.choice(["L", "G", "E"], size=m, p=[0.45, 0.45, 0.1])
    b = np.where(sense == "L", act + rng.uniform(0, 2, m), np.where(sense == "G", act - rng.uniform(0, 2, m), act))
    b = np.round(b, 3)
    # equalities get an exact right-hand side so the planted point stays feasible
    b = np.where(sense == "E", act, b)
    c = rng.integers(-5, 6, n).astype(float)
    lb = np.zeros(n)
    ub = np.full(n, 4.0)
    return A, b, sense, c, lb, ub


@pytest.mark.parametrize("seed", range(25))
def test_random_lp_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    A, b, sense, c, lb, ub = _random_lp(rng)
    ref, _ = lp_by_vertex_enumeration(A, b, sense, c, lb, ub)
    sol = solve_lp(A, b, sense, c, lb, ub)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(ref, rel=1e-6, abs=1e-6)
    x = sol.x
    assert np.all(x >= lb - 1e-7) and np.all(x <= ub + 1e-7)
    act = A @ x
    assert np.all(np.where(sense == "L", act <= b + 1e-7, True))
    assert np.all(np.where(sense == "G", act >= b - 1e-7, True))
    assert np.all(np.where(sense == "E", np.abs(act - b) <= 1e-7, True))


@pytest.mark.parametrize("seed", range(10))
def test_warm_start_after_bound_change(seed):
    rng = np.random.default_rng(100 + seed)
    A, b, sense, c, lb, ub = _random_lp(rng)
    first = solve_lp(A, b, sense, c, lb, ub)
    j = int(np.argmax(first.x))
    ub2 = ub.copy()
    ub2[j] = np.floor(first.x[j] * 0.5)
    warm = solve_lp(A, b, sense, c, lb, ub2, hint=first.hint)
    cold = solve_lp(A, b, sense, c, lb, ub2)
    assert warm.status == cold.status
    if cold.status == OPTIMAL:
        assert warm.objective == pytest.approx(cold.objective, rel=1e-7, abs=1e-7)


def test_warm_start_with_appended_row():
    rng = np.random.default_rng(7)
    A, b, sense, c, lb, ub = _random_lp(rng)
    first = solve_lp(A, b, sense, c, lb, ub)
    row = np.ones((1, A.shape[1]))
    A2 = np.vstack([A, row])
    b2 = np.append(b, first.x.sum() - 0.5)
    s2 = np.append(sense, "L")
    warm = solve_lp(A2, b2, s2, c, lb, ub, hint=first.hint)
    cold = solve_lp(A2, b2, s2, c, lb, ub)
    assert warm.status == cold.status
    if cold.status == OPTIMAL:
        assert warm.objective == pytest.approx(cold.objective, abs=1e-7)


def test_tableau_rows_are_consistent():
    rng = np.random.default_rng(3)
    A, b, sense, c, lb, ub = _random_lp(rng)
    sol = solve_lp(A, b, sense, c, lb, ub)
    m, n = A.shape
    full = np.hstack([A, np.eye(m)])
    # each tableau row is B^-1 [A I]; basic columns form the identity
    basic = sol.basis
    for i, j in enumerate(basic):
        if j >= 0:
            assert sol.tableau[i, j] == pytest.approx(1.0, abs=1e-9)
    B = full[:, basic[basic >= 0]]
    if B.shape[1] == m:
        np.testing.assert_allclose(B @ sol.tableau, full, atol=1e-8)


def test_work_counter_limit():
    rng = np.random.default_rng(1)
    A, b, sense, c, lb, ub = _random_lp(rng, 5, 5)
    counter = WorkCounter(limit=0)
    with pytest.raises(WorkLimitReached):
        solve_lp(A, b, sense, c, lb, ub, counter=counter)


def test_pivot_count_recorded():
    rng = np.random.default_rng(2)
    A, b, sense, c, lb, ub = _random_lp(rng)
    counter = WorkCounter()
    sol = solve_lp(A, b, sense, c, lb, ub, counter=counter)
    assert counter.pivots >= sol.pivots >= 0
