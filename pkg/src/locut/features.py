"""The 32-feature description of an instance.

Static features (f01-f18) come from the instance alone; dynamic ones
(f19-f32) from the root-node statistics of a solver run.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from .instance import MipInstance, VarType
from .solver.records import RootStats

FEATURE_VERSION = 1

FEATURE_NAMES = (
    # Matrix
    "ln_rows", "ln_cols", "nnz_density", "row_symmetry", "col_symmetry",
    # Variables
    "frac_binary", "frac_general_integer", "frac_continuous", "frac_obj_support",
    # Constraints
    "singleton", "aggregation", "precedence", "knapsack", "set_partitioning",
    "set_packing", "set_covering", "cardinality", "general_linear",
    # Presolving
    "ln_presolved_rows", "ln_presolved_cols", "row_reduction", "col_reduction",
    # Scaling
    "ln_max_a", "ln_min_a", "ln_max_b", "ln_min_b", "ln_max_c", "ln_min_c",
    # Global cutting
    "gap_closed", "rel_dual_improvement", "cut_density", "lp_growth",
)
FEATURE_COLUMNS = tuple(f"f{i:02d}" for i in range(1, 33))
N_FEATURES = 32
STATIC = slice(0, 18)
DYNAMIC = slice(18, 32)

CONSTRAINT_CLASSES = FEATURE_NAMES[9:18]


def _row_form(sense: str, b: float, cols, vals):
    """Canonical LE/EQ form: G rows are negated into L rows."""
    if sense == "G":
        return "L", -b, -vals
    return sense, b, vals


def classify_row(sense: str, b: float, cols, vals, binary) -> str:
    """Constraint class of one row; the first matching class wins."""
    s, rhs, a = _row_form(sense, b, cols, np.asarray(vals, dtype=float))
    k = len(a)
    if k == 1:
        return "singleton"
    if s == "E" and k == 2:
        return "aggregation"
    if k == 2 and a[0] * a[1] < 0:
        return "precedence"
    all_bin = bool(np.all(binary[cols]))
    if s == "E" and np.all(a < 0):
        a, rhs = -a, -rhs
    unit = bool(np.all(a == 1.0))
    neg_unit = bool(np.all(a == -1.0))
    if s == "L" and all_bin and np.all(a > 0) and rhs > 1:
        return "knapsack"
    if s == "E" and all_bin and unit and rhs == 1:
        return "set_partitioning"
    if s == "L" and all_bin and unit and rhs == 1:
        return "set_packing"
    if s == "L" and all_bin and neg_unit and rhs == -1:
        return "set_covering"
    if s == "E" and all_bin and unit and rhs > 1:
        return "cardinality"
    return "general_linear"


def _row_patterns(inst: MipInstance):
    A = inst.A
    pats = []
    for i in range(inst.m):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        cols, vals = A.indices[lo:hi], A.data[lo:hi]
        s, rhs, a = _row_form(inst.sense[i], inst.b[i], cols, vals)
        key = tuple(sorted(zip(inst.vartype[cols].tolist(), a.tolist())))
        pat = (s, rhs, key)
        if s == "E":
            neg = (s, -rhs, tuple(sorted(zip(inst.vartype[cols].tolist(), (-a).tolist()))))
            pat = min(pat, neg)
        pats.append(pat)
    return pats


def _col_patterns(inst: MipInstance):
    At = inst.A.tocsc()
    flip = np.where(inst.sense == "G", -1.0, 1.0)
    pats = []
    for j in range(inst.n):
        lo, hi = At.indptr[j], At.indptr[j + 1]
        rows, vals = At.indices[lo:hi], At.data[lo:hi]
        entries = tuple(sorted(zip(inst.sense[rows].tolist(), (vals * flip[rows]).tolist())))
        pats.append((int(inst.vartype[j]), float(inst.c[j]), float(inst.lb[j]), float(inst.ub[j]), entries))
    return pats


def extract_static(inst: MipInstance) -> np.ndarray:
    """Features f01..f18; invariant under row and column permutations."""
    m, n = inst.m, inst.n
    out = np.zeros(18)
    out[0] = math.log(m)
    out[1] = math.log(n)
    out[2] = inst.nnz / (m * n)
    out[3] = 1.0 - len(set(_row_patterns(inst))) / m
    out[4] = 1.0 - len(set(_col_patterns(inst))) / n
    vt = inst.vartype
    out[5] = np.count_nonzero(vt == VarType.BINARY) / n
    out[6] = np.count_nonzero(vt == VarType.INTEGER) / n
    out[7] = np.count_nonzero(vt == VarType.CONTINUOUS) / n
    out[8] = np.count_nonzero(inst.c) / n
    binary = vt == VarType.BINARY
    A = inst.A
    counts = Counter()
    for i in range(m):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        counts[classify_row(inst.sense[i], inst.b[i], A.indices[lo:hi], A.data[lo:hi], binary)] += 1
    for k, name in enumerate(CONSTRAINT_CLASSES):
        out[9 + k] = counts[name] / m
    return out


def _ln_or_zero(v) -> float:
    return 0.0 if v is None or v <= 0 else math.log(v)


def extract_dynamic(root: RootStats, m: int, n: int) -> np.ndarray:
    """Features f19..f32 from root statistics of the original ``m x n`` problem."""
    out = np.zeros(14)
    mt, nt = root.m_presolved, root.n_presolved
    out[0] = math.log(mt + 1)
    out[1] = math.log(nt + 1)
    out[2] = 1.0 - mt / m
    out[3] = 1.0 - nt / n
    out[4] = _ln_or_zero(root.scaled_a_max)
    out[5] = _ln_or_zero(root.scaled_a_min)
    out[6] = _ln_or_zero(root.scaled_b_max)
    out[7] = _ln_or_zero(root.scaled_b_min)
    out[8] = _ln_or_zero(root.scaled_c_max)
    out[9] = _ln_or_zero(root.scaled_c_min)
    ci, cd, cp = root.c_i, root.c_d, root.c_p
    if ci is not None and cd is not None:
        if cp is not None and abs(cp - ci) > 1e-9:
            out[10] = min(1.0, max(0.0, (cd - ci) / (cp - ci)))
        out[11] = (cd - ci) / max(abs(ci), 1.0)
    out[12] = root.cuts_added / max(mt, 1)
    if root.nnz_after > 0:
        out[13] = math.log(root.nnz_after / max(root.nnz_before, 1))
    return out


def featurize(inst: MipInstance, root: RootStats) -> np.ndarray:
    """Full 32-vector in the fixed f01..f32 order."""
    return np.concatenate([extract_static(inst), extract_dynamic(root, inst.m, inst.n)])


def as_dict(vec) -> dict:
    return dict(zip(FEATURE_COLUMNS, (float(v) for v in vec)))
