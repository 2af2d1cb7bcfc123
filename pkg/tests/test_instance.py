import io

import numpy as np
import pytest
import scipy.sparse as sp

from locut.errors import EmptyProblem, MalformedFile
from locut.instance import (
    MipInstance,
    VarType,
    magnitude_sets,
    parse_mps,
    permutation_arrays,
    permute_instance,
    read_mps,
    save_mps,
    write_mps,
)

KNAP2 = """\
NAME          KNAP2
OBJSENSE
    MAX
ROWS
 N  obj
 L  cap
COLUMNS
    MARKER                 'MARKER'                 'INTORG'
    x         obj       3.0          cap       1.0
    y         obj       2.0          cap       1.0
    MARKER                 'MARKER'                 'INTEND'
RHS
    rhs       cap       1.0
BOUNDS
 UP bnd       x         1.0
 UP bnd       y         1.0
ENDATA
"""

FIXED = """\
NAME          FIXEDFMT
ROWS
 N  COST
 G  LIM1
 L  LIM2
 E  MYEQN
 L  RNG
COLUMNS
    X1        COST         1.0   LIM1         1.0
    X1        LIM2         1.0
    X2        COST         2.0   LIM1         1.0
    X2        MYEQN       -1.0
    X3        COST        -1.0   MYEQN        1.0
    X3        RNG          1.0
RHS
    RHS       COST        -4.0
    RHS       LIM1         2.0   LIM2         4.0
    RHS       MYEQN        7.0   RNG          6.0
RANGES
    RNG       RNG          2.0
BOUNDS
 UP BND       X1           4.0
 MI BND       X2
 UP BND       X2           1.0
 BV BND       X3
ENDATA
"""


def test_knapsack_max_is_negated():
    inst = parse_mps(KNAP2)
    assert (inst.m, inst.n) == (1, 2)
    np.testing.assert_array_equal(inst.c, [-3.0, -2.0])
    assert list(inst.vartype) == [VarType.BINARY, VarType.BINARY]
    assert inst.name == "KNAP2"


def test_missing_endata_is_tolerated():
    inst = parse_mps(KNAP2.replace("ENDATA\n", ""))
    assert inst.equals(parse_mps(KNAP2))


def test_unknown_row_in_columns():
    bad = KNAP2.replace("cap       1.0\n    y", "nope      1.0\n    y")
    with pytest.raises(MalformedFile):
        parse_mps(bad)


@pytest.mark.parametrize(
    "text",
    [
        KNAP2.replace("ROWS\n N  obj\n L  cap\n", "ROWS\n N  obj\n L  cap\n L  cap\n"),
        KNAP2.replace("BOUNDS", "FOOBAR"),
        KNAP2.replace("UP bnd       x", "UP bnd       zz"),
    ],
    ids=["duplicate-row", "unknown-section", "bound-on-unknown-column"],
)
def test_malformed(text):
    with pytest.raises(MalformedFile):
        parse_mps(text)


def test_empty_problem():
    text = "NAME E\nROWS\n N obj\nCOLUMNS\nRHS\nENDATA\n"
    with pytest.raises(EmptyProblem):
        parse_mps(text)


def test_fixed_format_ranges_bounds_and_offset():
    inst = parse_mps(FIXED)
    # RNG splits into a G row and an extra L row
    assert inst.m == 5
    assert inst.obj_offset == 4.0
    assert inst.lb[1] == -np.inf and inst.ub[1] == 1.0
    assert inst.vartype[2] == VarType.BINARY
    assert inst.ub[0] == 4.0 and inst.lb[0] == 0.0
    dense = inst.dense()
    rng_rows = [i for i, nm in enumerate(inst.row_names) if nm.startswith("RNG")]
    assert sorted(inst.sense[rng_rows]) == ["G", "L"]
    assert sorted(inst.b[rng_rows]) == [4.0, 6.0]
    assert np.all(dense[rng_rows, 2] == 1.0)


def test_default_bounds():
    text = KNAP2.replace(" UP bnd       x         1.0\n UP bnd       y         1.0\n", "")
    inst = parse_mps(text)
    assert np.all(inst.lb == 0) and np.all(np.isinf(inst.ub))
    assert np.all(inst.vartype == VarType.INTEGER)


def test_round_trip_generated(tmp_path):
    from locut.generators import Family, generate_instance

    for fam in Family:
        for seed in range(3):
            inst = generate_instance(fam, seed=seed)
            assert parse_mps(write_mps(inst)).equals(inst)
            p = tmp_path / f"{inst.name}.mps"
            save_mps(inst, p)
            assert read_mps(p).equals(inst)


def test_round_trip_parsed_file():
    inst = parse_mps(FIXED)
    again = parse_mps(write_mps(inst))
    assert again.equals(inst)
    assert parse_mps(io.StringIO(write_mps(again))).equals(inst)


def test_magnitude_sets_examples():
    inst = MipInstance(
        "t", np.zeros(2), sp.csr_array(np.array([[2.0, -3.0], [0.0, 0.5], [0.0, 0.0]])),
        np.array([-7.0, 0.0, 7.0]), np.array(["L", "L", "L"]), np.zeros(2), np.ones(2), np.zeros(2),
    )
    ms = magnitude_sets(inst)
    assert sorted(ms.a_prime) == [0.5, 2.0, 3.0]
    assert ms.c_prime.size == 0
    assert list(ms.b_prime) == [7.0, 7.0]
    assert ms.a_prime.size == inst.nnz


def test_permutation_is_deterministic_and_seeded():
    from locut.generators import generate_instance

    inst = generate_instance("mixed", n=10, m=10, seed=4)
    a, b = permute_instance(inst, 1), permute_instance(inst, 1)
    assert a.equals(b)
    assert permute_instance(inst, 0).equals(inst)
    r1, _ = permutation_arrays(inst.name, 10, 10, 1)
    r2, _ = permutation_arrays(inst.name, 10, 10, 2)
    assert not np.array_equal(r1, r2)


def test_permutation_preserves_structure():
    from locut.generators import generate_instance

    inst = generate_instance("setcover", seed=2)
    p = permute_instance(inst, 3)
    assert p.nnz == inst.nnz
    assert magnitude_sets(p) == magnitude_sets(inst)
    assert np.array_equal(np.bincount(p.vartype, minlength=3), np.bincount(inst.vartype, minlength=3))
    assert sorted(p.row_names) == sorted(inst.row_names)


def test_instance_validation():
    with pytest.raises(ValueError):
        MipInstance("bad", [1.0], sp.csr_array([[1.0]]), [1.0], ["L"], [2.0], [1.0], [0])
    with pytest.raises(ValueError):
        MipInstance("bad", [1.0], sp.csr_array([[1.0]]), [1.0], ["X"], [0.0], [1.0], [0])


def test_instances_are_read_only():
    inst = parse_mps(KNAP2)
    with pytest.raises(ValueError):
        inst.c[0] = 1.0
