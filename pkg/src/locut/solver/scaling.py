"""Geometric-mean scaling with power-of-two factors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..instance import MipInstance

PASSES = 2


@dataclass(frozen=True)
class ScaledProblem:
    """``instance`` is the scaled problem; ``x = x_scaled / col_scale``.

    Row ``i`` was divided by ``row_scale[i]``; column ``j`` by
    ``col_scale[j]``.  Integer columns are never column-scaled, so their
    values and integrality carry over unchanged.
    """

    instance: MipInstance
    row_scale: np.ndarray
    col_scale: np.ndarray

    def to_scaled(self, x):
        return np.asarray(x, dtype=float) * self.col_scale

    def unscale(self, x_scaled):
        return np.asarray(x_scaled, dtype=float) / self.col_scale


def _pow2_factor(gm: np.ndarray) -> np.ndarray:
    """Nearest power of two, with a dead band: means inside [1/2, 2] give 1."""
    e = np.log2(gm)
    e = np.where(np.abs(e) <= 1.0, 0.0, np.round(e))
    return np.exp2(e)


def _geomeans(M: sp.csr_array, axis: int) -> np.ndarray:
    L = M.copy()
    L.data = np.log(np.abs(L.data))
    counts = np.diff(M.indptr) if axis == 1 else np.bincount(M.indices, minlength=M.shape[1])
    sums = np.asarray(L.sum(axis=axis)).reshape(-1)
    out = np.ones(M.shape[0] if axis == 1 else M.shape[1])
    nz = counts > 0
    out[nz] = np.exp(sums[nz] / counts[nz])
    return out


def scale(inst: MipInstance) -> ScaledProblem:
    """Two passes of row-then-column geometric-mean scaling."""
    A = inst.A.copy()
    row_scale = np.ones(inst.m)
    col_scale = np.ones(inst.n)
    continuous = ~inst.is_integer
    for _ in range(PASSES):
        if A.nnz == 0:
            break
        r = _pow2_factor(_geomeans(A, axis=1))
        A = sp.csr_array(sp.diags_array(1.0 / r) @ A)
        row_scale *= r
        s = np.where(continuous, _pow2_factor(_geomeans(A, axis=0)), 1.0)
        A = sp.csr_array(A @ sp.diags_array(1.0 / s))
        col_scale *= s
    scaled = inst.replace(
        A=A,
        b=inst.b / row_scale,
        c=inst.c / col_scale,
        lb=inst.lb * col_scale,
        ub=inst.ub * col_scale,
    )
    return ScaledProblem(scaled, row_scale, col_scale)
