"""Property tests for cross-module invariants on randomly generated inputs."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from locut.dataset import Dataset, LabeledSample, split_by_seed
from locut.features import extract_static, featurize
from locut.forest import fit_forest
from locut.generators import Family, generate_instance
from locut.instance import magnitude_sets, parse_mps, permute_instance, write_mps
from locut.solver import SolverConfig, root_stats
from oracles import SMALL_SIZES

families = st.sampled_from([f.value for f in Family])


def _small(fam, seed):
    n, m = SMALL_SIZES[fam][seed % len(SMALL_SIZES[fam])]
    return generate_instance(fam, n=n, m=m, seed=seed)


@given(families, st.integers(0, 10_000))
def test_mps_round_trip(fam, seed):
    inst = _small(fam, seed)
    assert parse_mps(write_mps(inst)).equals(inst)


@given(families, st.integers(0, 10_000), st.integers(0, 50))
def test_permutation_preserves_structure(fam, seed, pseed):
    inst = _small(fam, seed)
    p = permute_instance(inst, pseed)
    assert p.nnz == inst.nnz
    np.testing.assert_array_equal(np.sort(np.abs(p.A.data)), np.sort(np.abs(inst.A.data)))
    assert np.bincount(p.vartype, minlength=3).tolist() == np.bincount(inst.vartype, minlength=3).tolist()
    assert magnitude_sets(p) == magnitude_sets(inst)
    np.testing.assert_array_equal(extract_static(p), extract_static(inst))


@settings(max_examples=15)
@given(families, st.integers(0, 10_000))
def test_feature_ranges(fam, seed):
    inst = _small(fam, seed)
    rs = root_stats(inst, SolverConfig())
    f = featurize(inst, rs)
    assert np.all(np.isfinite(f))
    frac = f[2:18]
    assert np.all((frac >= 0) & (frac <= 1 + 1e-12))
    assert f[0] >= 0 and f[1] >= 0
    assert abs(f[9:18].sum() - 1.0) <= 1e-9
    assert f[22] >= f[23]
    assert f[24] >= f[25] or f[24] == f[25] == 0
    assert f[26] >= f[27] or f[26] == f[27] == 0
    assert 0 <= f[28] <= 1
    assert f[29] >= -1e-9
    if rs.c_i is not None and rs.c_d is not None:
        assert rs.c_d >= rs.c_i - 1e-9


@settings(max_examples=20)
@given(st.integers(0, 1000), st.floats(-1, 1), st.floats(0, 1))
def test_raising_tau_never_flips_to_nlc(seed, tau, step):
    rng = np.random.default_rng(seed)
    X, y = rng.random((40, 32)), rng.standard_normal(40)
    model = fit_forest(X, y, 15, 8, 2, seed=seed)
    model.majority_quota = 0.7 if seed % 2 else None
    Xq = rng.random((30, 32))
    low, high = model.decide(Xq, tau), model.decide(Xq, tau + step)
    assert not np.any((low == "LC") & (high == "NLC"))


@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 7)), min_size=1, max_size=60, unique=True))
def test_split_is_disjoint_partition(keys):
    samples = [LabeledSample(f"p{p}", s, np.zeros(32), 0.0) for p, s in keys]
    train, test = split_by_seed(Dataset(samples))
    a, b = set(train.keys), set(test.keys)
    assert not (a & b)
    assert a | b == {(f"p{p}", s) for p, s in keys}
    assert all(s == 0 for _, s in b) and all(s != 0 for _, s in a)
