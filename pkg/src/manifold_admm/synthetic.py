"""Random multi-block test problems with a quadratic coupling objective.

The objective is

    f(x) = sum_{i<N} <c_i, x_i> + 1/2 || sum_i B_i x_i - d ||^2

with ``B_i = t_i P_i`` (orthonormal columns) for the manifold blocks, so that
``f`` restricted to block ``i`` has curvature exactly ``t_i^2``. Coupling maps
are ``A_i = s_i Q_i`` with orthonormal ``Q_i``; the last block is free with
``A_N = I``.
"""

from __future__ import annotations

import numpy as np

from .manifolds import Euclidean, Sphere, Stiefel
from .problem import Block, MultiBlockProblem, SmoothOracle

__all__ = ["QuadraticCouplingOracle", "NoisyOracle", "build_synthetic_problem"]


def _orthonormal_columns(rng, rows, cols):
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


class QuadraticCouplingOracle(SmoothOracle):
    """``sum_i <c_i, x_i> + 1/2 ||sum_i B_i vec(x_i) - d||^2``."""

    def __init__(self, B, c, d, shapes, curvature=None):
        self.B = [np.asarray(b, float) for b in B]
        self.c = [np.zeros(s) if ci is None else np.asarray(ci, float).reshape(s)
                  for ci, s in zip(c, shapes)]
        self.d = np.asarray(d, float)
        self.shapes = [tuple(s) for s in shapes]
        self._curv = dict(curvature or {})
        self.lipschitz = float(np.linalg.norm(np.hstack(self.B), 2) ** 2)

    def _resid(self, xs):
        r = -self.d.copy()
        for b, x in zip(self.B, xs):
            r += b @ np.ravel(x)
        return r

    def value(self, xs):
        r = self._resid(xs)
        lin = sum(float(np.sum(c * x)) for c, x in zip(self.c, xs))
        return lin + 0.5 * float(r @ r)

    def gradient(self, xs):
        r = self._resid(xs)
        return [c + (b.T @ r).reshape(s) for b, c, s in zip(self.B, self.c, self.shapes)]

    def partial(self, i, xs):
        r = self._resid(xs)
        return self.c[i] + (self.B[i].T @ r).reshape(self.shapes[i])

    def block_curvature(self, i):
        return self._curv.get(i)


class NoisyOracle(SmoothOracle):
    """Stochastic first-order oracle: each draw adds independent Gaussian
    noise with ``E||noise||^2 = sigma2``; a batch of ``M`` draws is averaged."""

    def __init__(self, base, sigma2):
        if sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        self.base = base
        self.sigma2 = float(sigma2)
        self.lipschitz = base.lipschitz

    def value(self, xs):
        return self.base.value(xs)

    def gradient(self, xs):
        return self.base.gradient(xs)

    def partial(self, i, xs):
        return self.base.partial(i, xs)

    def block_curvature(self, i):
        return self.base.block_curvature(i)

    def stochastic_partial(self, i, xs, batch, rng):
        g = self.partial(i, xs)
        if self.sigma2 == 0.0:
            return g
        sd = np.sqrt(self.sigma2 / g.size)
        noise = rng.standard_normal((int(batch),) + g.shape).mean(axis=0)
        return g + sd * noise


def build_synthetic_problem(seed, n_blocks=3, dims=4, n_rows=6, *, manifold="sphere",
                            stiefel_cols=2, sigma2=None):
    """Random basic-form problem with ``n_blocks`` blocks.

    Blocks ``1..N-1`` live on spheres of dimension ``dims`` (an int or one per
    block) or, with ``manifold="stiefel"``, on ``St(dims, stiefel_cols)``. The
    last block has dimension ``n_rows``. With ``sigma2`` the oracle also
    provides noisy mini-batch gradients.
    """
    if n_blocks < 2:
        raise ValueError("need at least 2 blocks")
    if manifold not in ("sphere", "stiefel"):
        raise ValueError("manifold must be 'sphere' or 'stiefel'")
    rng = np.random.default_rng(seed)
    dims = [int(dims)] * (n_blocks - 1) if np.isscalar(dims) else [int(d) for d in dims]
    if len(dims) != n_blocks - 1:
        raise ValueError("dims needs one entry per manifold block")
    if manifold == "stiefel":
        mans = [Stiefel(d, stiefel_cols) for d in dims]
    else:
        mans = [Sphere(d) for d in dims]
    sizes = [m.size for m in mans]
    if max(sizes) > n_rows:
        raise ValueError("n_rows must be at least the largest block size")
    p = max(sizes + [n_rows]) + 2
    blocks, B, c, curv = [], [], [], {}
    c_norm = 0.0
    for i, (man, size) in enumerate(zip(mans, sizes)):
        s = rng.uniform(0.5, 1.5)
        t = rng.uniform(0.5, 1.5)
        A = s * _orthonormal_columns(rng, n_rows, size)
        B.append(t * _orthonormal_columns(rng, p, size))
        ci = rng.standard_normal(man.shape)
        c.append(ci)
        # |<c, x>| <= ||c|| ||x||_F and ||x||_F^2 = number of columns
        c_norm += np.linalg.norm(ci) * np.sqrt(man.shape[1] if len(man.shape) == 2 else 1)
        curv[i] = t * t
        blocks.append(Block(man, coupling=A, name=f"x{i + 1}"))
    B.append(rng.standard_normal((p, n_rows)) / np.sqrt(p))
    c.append(None)
    blocks.append(Block(Euclidean(n_rows), name=f"x{n_blocks}"))
    d = rng.standard_normal(p)
    rhs = rng.standard_normal(n_rows)
    oracle = QuadraticCouplingOracle(B, c, d, [m.shape for m in mans] + [(n_rows,)], curv)
    if sigma2 is not None:
        oracle = NoisyOracle(oracle, sigma2)
    return MultiBlockProblem(
        blocks=blocks,
        oracle=oracle,
        rhs=rhs,
        f_lower=-float(c_norm),
        r_lower=[0.0] * (n_blocks - 1),
    )
