"""Mode unfoldings and multilinear (Tucker) products.

Unfolding follows the usual convention: the mode-``j`` unfolding of an
``n_1 x ... x n_d`` tensor is ``n_j x prod_{l != j} n_l`` with the remaining
modes ordered ascending and the first of them varying fastest. With this
ordering

    unfold(C x_1 U_1 ... x_d U_d, j) = U_j unfold(C, j) (U_d kron ... kron U_1)^T

where the Kronecker product skips ``U_j``. Modes are 0-based in code.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

__all__ = ["mode_unfold", "mode_fold", "mode_product", "tucker_apply", "kron_others"]


def _check_mode(t, j):
    if not 0 <= j < np.ndim(t):
        raise ValueError(f"mode {j} out of range for an order-{np.ndim(t)} tensor")


def mode_unfold(t, j):
    t = np.asarray(t)
    _check_mode(t, j)
    return np.moveaxis(t, j, 0).reshape(t.shape[j], -1, order="F")


def mode_fold(mat, j, shape):
    """Inverse of :func:`mode_unfold`."""
    shape = tuple(shape)
    if not 0 <= j < len(shape):
        raise ValueError(f"mode {j} out of range for shape {shape}")
    rest = shape[:j] + shape[j + 1:]
    t = np.asarray(mat).reshape((shape[j],) + rest, order="F")
    return np.moveaxis(t, 0, j)


def mode_product(t, U, j):
    """``t x_j U``: multiply mode ``j`` by the matrix ``U``."""
    t = np.asarray(t)
    _check_mode(t, j)
    if U.shape[1] != t.shape[j]:
        raise ValueError(f"factor has {U.shape[1]} columns, mode {j} has size {t.shape[j]}")
    return np.moveaxis(np.tensordot(U, t, axes=(1, j)), 0, j)


def tucker_apply(core, factors):
    """``core x_1 U_1 x_2 ... x_d U_d``."""
    core = np.asarray(core)
    if len(factors) != core.ndim:
        raise ValueError("need one factor per mode")
    out = core
    for j, U in enumerate(factors):
        out = mode_product(out, np.asarray(U), j)
    return out


def kron_others(factors, j):
    """``U_d kron ... kron U_{j+1} kron U_{j-1} kron ... kron U_1``."""
    others = [np.asarray(U) for l, U in enumerate(factors) if l != j]
    if not others:
        return np.ones((1, 1))
    return reduce(np.kron, others[::-1])
