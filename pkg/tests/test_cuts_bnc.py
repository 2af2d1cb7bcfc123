import math

import numpy as np
import pytest
import scipy.sparse as sp

from locut.generators import Family, generate_instance
from locut.instance import MipInstance, VarType, permute_instance
from locut.solver import SolverConfig, branch_and_cut, compute_pdi, gomory_cuts, root_cut_loop, solve_lp
from locut.solver.bnc import SolveTrace, prepare, root_stats
from locut.solver.records import INFEASIBLE, LC, NLC, OPTIMAL
from oracles import brute_force_mip, integer_feasible_points, small_instances

INT = VarType.INTEGER


def textbook():
    # max x2  s.t. 3x1 + 2x2 <= 6, -3x1 + 2x2 <= 0, x >= 0 integer
    return MipInstance(
        "gomory2", [0.0, -1.0], sp.csr_array(np.array([[3.0, 2.0], [-3.0, 2.0]])), [6.0, 0.0], ["L", "L"],
        [0, 0], [np.inf, np.inf], [INT, INT],
    )


def test_textbook_root_loop_improves_bound():
    pre, sc = prepare(textbook())
    res = root_cut_loop(sc.instance, SolverConfig())
    st = res.stats
    assert st.c_i == pytest.approx(-1.5)
    assert st.c_d > st.c_i + 1e-6
    assert st.cuts_added >= 1 and st.rounds >= 1
    assert st.c_d <= -1.0 + 1e-9  # never above the integer optimum


def test_root_loop_without_rounds():
    pre, sc = prepare(textbook())
    st = root_cut_loop(sc.instance, SolverConfig(max_root_rounds=0)).stats
    assert st.c_d == st.c_i and st.cuts_added == 0 and st.rounds == 0


def test_pure_continuous_root():
    inst = MipInstance("lp", [-1.0, -1.0], sp.csr_array(np.array([[1.0, 2.0]])), [3.0], ["L"], [0, 0], [2, 2], [0, 0])
    st = root_stats(inst)
    assert st.cuts_added == 0 and st.rounds == 0 and st.c_d == st.c_i


def test_textbook_solves_to_integer_optimum():
    for strat in (LC, NLC):
        rec = branch_and_cut(textbook(), SolverConfig().with_strategy(strat))
        assert rec.status == OPTIMAL
        assert rec.obj_primal == pytest.approx(-1.0)


def test_integral_point_gives_no_cuts():
    A = np.array([[1.0, 1.0]])
    sol = solve_lp(A, np.array([2.0]), np.array(["L"]), np.array([-1.0, -1.0]), [0, 0], [1, 1])
    assert gomory_cuts(sol, A, np.array([2.0]), np.array([1.0, 1.0, 1.0])) == []


def test_cut_separates_fractional_point():
    # x1 + x2 <= 3.5 with integer x in [0, 2]: LP optimum is fractional
    A = np.array([[1.0, 1.0]])
    b = np.array([3.5])
    sol = solve_lp(A, b, np.array(["L"]), np.array([-1.0, -1.0]), [0, 0], [2, 2])
    cuts = gomory_cuts(sol, A, b, np.array([1.0, 1.0, 0.0]))
    assert cuts
    for cut in cuts:
        assert cut.violation(sol.x) >= 1e-4
        assert np.abs(cut.coef).max() == pytest.approx(1.0)
        for x1 in range(3):
            for x2 in range(3):
                if x1 + x2 <= 3.5:
                    assert cut.violation([x1, x2]) <= 1e-9


@pytest.mark.parametrize("inst", small_instances(24, start_seed=500), ids=lambda i: i.name)
def test_cuts_valid_for_enumerated_points(inst):
    rng = np.random.default_rng(0)
    for strat in (LC, NLC):
        trace = SolveTrace()
        rec = branch_and_cut(inst, SolverConfig().with_strategy(strat), trace=trace)
        if not trace.cuts:
            continue
        for k, x in enumerate(integer_feasible_points(inst, rng)):
            z = trace.to_lp_space(x)
            for entry in trace.cuts:
                inside = np.all(z >= entry.lower - 1e-9) and np.all(z <= entry.upper + 1e-9)
                if inside:
                    assert entry.cut.violation(z) <= 1e-6, (strat, entry.local)
            if k > 300:
                break


@pytest.mark.parametrize("inst", small_instances(30, start_seed=900), ids=lambda i: i.name)
def test_both_strategies_match_brute_force(inst):
    ref = brute_force_mip(inst)
    for strat in (LC, NLC):
        rec = branch_and_cut(inst, SolverConfig().with_strategy(strat))
        if ref is None:
            assert rec.status == INFEASIBLE
        else:
            assert rec.status == OPTIMAL
            assert rec.obj_primal == pytest.approx(ref, rel=1e-6, abs=1e-6)
            assert rec.obj_dual == pytest.approx(rec.obj_primal, rel=1e-6, abs=1e-6)


def test_permuted_instance_same_optimum():
    inst = generate_instance(Family.KNAPSACK, n=10, m=2, seed=3)
    base = branch_and_cut(inst, SolverConfig())
    for s in (1, 2, 3):
        rec = branch_and_cut(permute_instance(inst, s), SolverConfig())
        assert rec.obj_primal == pytest.approx(base.obj_primal, rel=1e-9)


def test_deterministic_records():
    inst = generate_instance(Family.KNAPSACK, seed=5)
    a = branch_and_cut(inst, SolverConfig())
    b = branch_and_cut(inst, SolverConfig())
    assert a.same_as(b)


def test_integral_root_gives_identical_strategies():
    inst = MipInstance("easy", [-1.0, -1.0], sp.csr_array(np.array([[1.0, 1.0]])), [2.0], ["L"], [0, 0], [1, 1], [INT, INT])
    a = branch_and_cut(inst, SolverConfig().with_strategy(LC))
    b = branch_and_cut(inst, SolverConfig().with_strategy(NLC))
    assert a.nodes == b.nodes == 1
    ja, jb = a.to_json(), b.to_json()
    for d in (ja, jb):
        d.pop("wall_s")
        d.pop("strategy")
    assert ja == jb


def test_work_limit_reports_limit():
    inst = generate_instance(Family.KNAPSACK, n=30, m=3, seed=2)
    rec = branch_and_cut(inst, SolverConfig(work_limit=50))
    assert rec.status == "LIMIT"
    assert rec.work <= 50
    assert 0 <= rec.pdi <= rec.work


def test_record_invariants_on_corpus():
    for fam in Family:
        for seed in range(3):
            inst = generate_instance(fam, seed=seed)
            for strat in (LC, NLC):
                rec = branch_and_cut(inst, SolverConfig().with_strategy(strat))
                assert rec.nodes >= 1
                assert 0 <= rec.pdi <= rec.work + 1e-9
                r = rec.root
                assert r.c_d >= r.c_i - 1e-9
                assert r.m_presolved <= inst.m and r.n_presolved <= inst.n
                if rec.status == OPTIMAL:
                    assert rec.obj_primal == pytest.approx(rec.obj_dual, rel=1e-6, abs=1e-6)


def test_pdi_examples():
    assert compute_pdi([(0, 5.0, 5.0)], 100) == 0.0
    assert compute_pdi([], 40) == 40
    assert compute_pdi([(0, None, 1.0), (50, None, 2.0)], 50) == 50
    # gamma 1 for 10 units then 0.5 for 10 units
    assert compute_pdi([(10, 2.0, 1.0)], 20) == pytest.approx(15.0)


def test_pdi_gap_is_clamped():
    assert compute_pdi([(0, 1.0, -100.0)], 10) == pytest.approx(10.0)
    assert math.isfinite(compute_pdi([(0, 0.0, 0.0)], 10))
