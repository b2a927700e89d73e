"""Multi-block problem representation.

A problem is

    min  f(x_1, ..., x_N) + sum_{i<N} r_i(x_i)
    s.t. sum_i A_i x_i = b,  x_i in M_i cap X_i  (i < N),  x_N free, A_N = I.

Blocks are numpy arrays of arbitrary shape; the coupling maps act on the
flattened block. A coupling is either a scalar ``s`` (meaning ``s * I``) or a
dense ``m x size`` matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .manifolds import Euclidean, Manifold, Sphere, Stiefel
from .prox import lq_objective, lq_prox, normalize_q

__all__ = [
    "ConvexSet",
    "WHOLE",
    "NONNEG",
    "box",
    "Regularizer",
    "ZERO",
    "l1",
    "lq",
    "capped_lq",
    "Block",
    "SmoothOracle",
    "FunctionOracle",
    "SlackPenaltyOracle",
    "ConsensusOracle",
    "MultiBlockProblem",
    "validate",
    "lift_general_problem",
    "decouple_nonconvex_regularizers",
    "estimate_lipschitz",
    "kernel_supported",
]


@dataclass(frozen=True)
class ConvexSet:
    kind: str = "whole"
    lo: float = -np.inf
    hi: float = np.inf

    def __post_init__(self):
        if self.kind not in ("whole", "nonneg", "box"):
            raise ValueError(f"unknown convex set {self.kind!r}")
        if self.kind == "box" and not self.lo <= self.hi:
            raise ValueError("box needs lo <= hi")

    def project(self, x):
        if self.kind == "whole":
            return x
        if self.kind == "nonneg":
            return np.maximum(x, 0.0)
        return np.clip(x, self.lo, self.hi)

    def contains(self, x, tol=1e-12):
        if self.kind == "whole":
            return True
        if self.kind == "nonneg":
            return bool(np.all(x >= -tol))
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))


WHOLE = ConvexSet("whole")
NONNEG = ConvexSet("nonneg")


def box(lo, hi):
    return ConvexSet("box", float(lo), float(hi))


@dataclass(frozen=True)
class Regularizer:
    """Separable penalty ``weight * sum_j pen(x_j)``.

    ``pen`` is ``|x|^q`` (q in {1/2, 2/3, 1}), or ``min(|x|^q, cap |x|)`` when
    ``cap`` is set.
    """

    weight: float = 0.0
    q: float = 1.0
    cap: float | None = None

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("regularizer weight must be nonnegative")
        object.__setattr__(self, "q", normalize_q(self.q))

    @property
    def is_zero(self):
        return self.weight == 0.0

    @property
    def is_convex(self):
        return self.q == 1.0 and (self.cap is None or self.cap >= 1.0)

    @property
    def kind(self):
        if self.is_zero:
            return "zero"
        if self.cap is not None:
            return "capped_lq"
        return "l1" if self.q == 1.0 else "lq"

    def value(self, x):
        if self.is_zero:
            return 0.0
        return float(lq_objective(np.asarray(x, float), 0.0, 0.0, self.weight,
                                  self.q, self.cap).sum())

    def minimize_quadratic(self, kappa, linear):
        """Elementwise minimizer of ``kappa/2 x^2 + linear x + r(x)``."""
        if self.is_zero:
            return -linear / kappa
        return lq_prox(0.5 * kappa, linear, self.weight, self.q, self.cap)


ZERO = Regularizer()


def l1(weight):
    return Regularizer(weight, 1.0)


def lq(weight, q):
    return Regularizer(weight, q)


def capped_lq(weight, q, cap):
    return Regularizer(weight, q, cap)


@dataclass(frozen=True, eq=False)
class Block:
    """One block variable: its manifold, convex set, regularizer and
    coupling map ``A_i``."""

    manifold: Manifold
    constraint: ConvexSet = WHOLE
    regularizer: Regularizer = ZERO
    coupling: object = 1.0
    name: str = ""

    @property
    def shape(self):
        return self.manifold.shape

    @property
    def size(self):
        return self.manifold.size

    @property
    def dense_coupling(self):
        return isinstance(self.coupling, np.ndarray)

    @property
    def n_rows(self):
        if self.dense_coupling:
            return self.coupling.shape[0]
        return self.size

    def apply(self, x):
        if self.dense_coupling:
            return self.coupling @ np.ravel(x)
        return self.coupling * np.ravel(x)

    def apply_t(self, y):
        if self.dense_coupling:
            return (self.coupling.T @ y).reshape(self.shape)
        return (self.coupling * y).reshape(self.shape)

    @cached_property
    def gram_scale(self):
        """``a`` with ``A^T A = a I``, or None if the Gram matrix is not
        isotropic."""
        if not self.dense_coupling:
            return float(self.coupling) ** 2
        g = self.coupling.T @ self.coupling
        a = float(np.trace(g)) / g.shape[0]
        if np.allclose(g, a * np.eye(g.shape[0]), atol=1e-12 * max(1.0, a)):
            return a
        return None

    @cached_property
    def coupling_norm(self):
        if self.dense_coupling:
            return float(np.linalg.norm(self.coupling, 2))
        return abs(float(self.coupling))

    @property
    def is_identity(self):
        if self.dense_coupling:
            c = self.coupling
            return c.shape[0] == c.shape[1] and np.array_equal(c, np.eye(c.shape[0]))
        return float(self.coupling) == 1.0

    def random_point(self, rng):
        m, X = self.manifold, self.constraint
        if isinstance(m, Euclidean):
            if X.kind == "box":
                lo = X.lo if np.isfinite(X.lo) else X.hi - 1.0
                hi = X.hi if np.isfinite(X.hi) else lo + 1.0
                return rng.uniform(lo, hi, size=self.shape)
            return m.random_point(rng, nonneg=X.kind == "nonneg")
        return m.random_point(rng, nonneg=X.kind == "nonneg")


def kernel_supported(block):
    """Whether a closed-form Step-1 kernel exists for this block pattern."""
    m, X, r = block.manifold, block.constraint, block.regularizer
    if isinstance(m, Sphere):
        if X.kind == "whole":
            return r.is_zero
        if X.kind == "nonneg":
            return r.is_zero or (r.q == 1.0 and r.cap is None)
        return False
    if isinstance(m, Stiefel):
        return X.kind == "whole" and r.is_zero
    if isinstance(m, Euclidean):
        if X.kind == "box":
            return r.is_convex
        return True
    return False


class SmoothOracle:
    """Smooth coupling objective ``f`` with ``L``-Lipschitz gradient.

    Subclasses implement ``value`` and at least one of ``gradient`` /
    ``partial``. ``block_curvature(i)`` returns ``c`` when ``f`` restricted to
    block ``i`` is exactly ``c/2 ||x_i||^2`` plus terms linear in ``x_i``;
    the exact (non-linearized) sweep needs it. ``stochastic_partial`` is the
    mini-batch stochastic first-order oracle; ``sigma2`` bounds the variance
    of a single draw.
    """

    lipschitz = 1.0
    sigma2 = None

    def value(self, xs):
        raise NotImplementedError

    def gradient(self, xs):
        return [self.partial(i, xs) for i in range(len(xs))]

    def partial(self, i, xs):
        return self.gradient(xs)[i]

    def block_curvature(self, i):
        return None

    def stochastic_partial(self, i, xs, batch, rng):
        raise NotImplementedError(f"{type(self).__name__} has no stochastic oracle")


class FunctionOracle(SmoothOracle):
    """Oracle assembled from plain callables."""

    def __init__(self, value, gradient, lipschitz, partial=None, curvature=None):
        self._value = value
        self._gradient = gradient
        self._partial = partial
        self._curvature = curvature or {}
        self.lipschitz = float(lipschitz)

    def value(self, xs):
        return float(self._value(xs))

    def gradient(self, xs):
        return [np.asarray(g, float) for g in self._gradient(xs)]

    def partial(self, i, xs):
        if self._partial is not None:
            return np.asarray(self._partial(i, xs), float)
        return self.gradient(xs)[i]

    def block_curvature(self, i):
        return self._curvature.get(i)


class SlackPenaltyOracle(SmoothOracle):
    """``f(x_1..x_N) + mu/2 ||x_{N+1}||^2`` for an appended slack block."""

    def __init__(self, base, mu):
        self.base = base
        self.mu = float(mu)
        self.lipschitz = max(base.lipschitz, self.mu)
        self.sigma2 = base.sigma2

    def value(self, xs):
        return self.base.value(xs[:-1]) + 0.5 * self.mu * float(np.sum(xs[-1] ** 2))

    def gradient(self, xs):
        return self.base.gradient(xs[:-1]) + [self.mu * xs[-1]]

    def partial(self, i, xs):
        if i == len(xs) - 1:
            return self.mu * xs[-1]
        return self.base.partial(i, xs[:-1])

    def block_curvature(self, i):
        if i == self._n_base:
            return self.mu
        return self.base.block_curvature(i)

    def bind(self, n_base):
        self._n_base = n_base
        return self

    def stochastic_partial(self, i, xs, batch, rng):
        if i == len(xs) - 1:
            return self.mu * xs[-1]
        return self.base.stochastic_partial(i, xs[:-1], batch, rng)


class ConsensusOracle(SmoothOracle):
    """Wraps ``f`` for a problem with extra consensus copies ``y_i`` that do
    not enter ``f``. ``base_index[k]`` maps new block ``k`` to the base block
    or ``None``."""

    def __init__(self, base, base_index):
        self.base = base
        self.base_index = list(base_index)
        self.lipschitz = base.lipschitz
        self.sigma2 = base.sigma2

    def _base_xs(self, xs):
        return [xs[k] for k, j in enumerate(self.base_index) if j is not None]

    def value(self, xs):
        return self.base.value(self._base_xs(xs))

    def partial(self, i, xs):
        j = self.base_index[i]
        if j is None:
            return np.zeros_like(xs[i])
        return self.base.partial(j, self._base_xs(xs))

    def gradient(self, xs):
        g = self.base.gradient(self._base_xs(xs))
        return [np.zeros_like(xs[k]) if j is None else g[j]
                for k, j in enumerate(self.base_index)]

    def block_curvature(self, i):
        j = self.base_index[i]
        return 0.0 if j is None else self.base.block_curvature(j)

    def stochastic_partial(self, i, xs, batch, rng):
        j = self.base_index[i]
        if j is None:
            return np.zeros_like(xs[i])
        return self.base.stochastic_partial(j, self._base_xs(xs), batch, rng)


@dataclass(frozen=True, eq=False)
class MultiBlockProblem:
    blocks: tuple
    oracle: SmoothOracle
    rhs: np.ndarray
    f_lower: float | None = None
    r_lower: tuple | None = None
    notes: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "rhs", np.asarray(self.rhs, dtype=float).ravel())
        if self.r_lower is not None:
            object.__setattr__(self, "r_lower", tuple(float(v) for v in self.r_lower))

    @property
    def n_blocks(self):
        return len(self.blocks)

    @property
    def n_rows(self):
        return self.rhs.size

    @property
    def lipschitz(self):
        return self.oracle.lipschitz

    @property
    def is_basic(self):
        last = self.blocks[-1]
        return (
            isinstance(last.manifold, Euclidean)
            and last.constraint.kind == "whole"
            and last.regularizer.is_zero
            and last.is_identity
            and last.size == self.n_rows
        )

    @property
    def max_coupling_norm(self):
        return max(b.coupling_norm for b in self.blocks)

    @property
    def lower_bound(self):
        """``f* + sum r_i*`` when both are known, else None."""
        if self.f_lower is None or self.r_lower is None:
            return None
        return self.f_lower + sum(self.r_lower)

    def residual(self, xs):
        r = -self.rhs.copy()
        for blk, x in zip(self.blocks, xs):
            r += blk.apply(x)
        return r

    def reg_value(self, xs):
        return sum(blk.regularizer.value(x) for blk, x in zip(self.blocks[:-1], xs[:-1]))

    def objective(self, xs):
        return self.oracle.value(xs) + self.reg_value(xs)

    def random_point(self, rng):
        return [blk.random_point(rng) for blk in self.blocks]

    def is_feasible(self, xs):
        return all(
            blk.manifold.is_feasible(x) and blk.constraint.contains(x)
            for blk, x in zip(self.blocks, xs)
        )


def _fd_mismatch(oracle, xs, i, d, h):
    xp = [x.copy() for x in xs]
    xm = [x.copy() for x in xs]
    xp[i] = xp[i] + h * d
    xm[i] = xm[i] - h * d
    fd = (oracle.value(xp) - oracle.value(xm)) / (2.0 * h)
    gd = float(np.sum(oracle.partial(i, xs) * d))
    scale = max(abs(fd), abs(gd)) + 1e-6 * (1.0 + abs(oracle.value(xs)))
    return abs(fd - gd) / scale


def validate(problem, rng=None, n_points=5, h=1e-6, rtol=1e-4):
    """Report-only checks: dimensions, basic form, kernel support and a
    central-difference gradient test at random feasible points.

    Returns a list of human-readable diagnostics; empty means well formed.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    out = []
    N = problem.n_blocks
    if N < 2:
        out.append("need at least 2 blocks")
    m = problem.n_rows
    dims_ok = True
    for k, blk in enumerate(problem.blocks):
        if blk.dense_coupling:
            rows, cols = blk.coupling.shape
            if cols != blk.size:
                out.append(f"block {k}: coupling has {cols} columns, block size {blk.size}")
                dims_ok = False
        else:
            rows = blk.size
        if rows != m:
            out.append(f"block {k}: coupling has {rows} rows, rhs has {m}")
            dims_ok = False
    last = problem.blocks[-1]
    if not isinstance(last.manifold, Euclidean):
        out.append("basic model: last block must be Euclidean")
    if last.constraint.kind != "whole":
        out.append("basic model: last block must be unconstrained")
    if not last.regularizer.is_zero:
        out.append("basic model: last block must carry no regularizer")
    if not last.is_identity:
        out.append("basic model: last block coupling A_N must be the identity")
    for k, blk in enumerate(problem.blocks[:-1]):
        if not kernel_supported(blk):
            hint = ""
            if not isinstance(blk.manifold, Euclidean) and not blk.regularizer.is_convex:
                hint = " (nonconvex regularizer on a manifold block: decouple it)"
            out.append(
                f"block {k}: no closed-form kernel for {blk.manifold!r} with "
                f"{blk.constraint.kind} set and {blk.regularizer.kind} regularizer{hint}"
            )
    L = problem.oracle.lipschitz
    if not (np.isfinite(L) and L > 0):
        out.append(f"Lipschitz constant must be positive and finite, got {L}")
    if not dims_ok or N < 2:
        return out
    for p in range(n_points):
        xs = problem.random_point(rng)
        full = problem.oracle.gradient(xs)
        for i in range(N):
            part = problem.oracle.partial(i, xs)
            if part.shape != xs[i].shape:
                out.append(f"block {i}: partial gradient shape {part.shape} != {xs[i].shape}")
                continue
            if not np.allclose(part, full[i], rtol=1e-10, atol=1e-12):
                out.append(f"point {p}, block {i}: partial gradient differs from full gradient")
            d = rng.standard_normal(xs[i].shape)
            d /= np.linalg.norm(d)
            err = _fd_mismatch(problem.oracle, xs, i, d, h)
            if err > rtol:
                out.append(
                    f"point {p}, block {i}: finite-difference mismatch, relative error {err:.2e}"
                )
    return out


def estimate_lipschitz(oracle, xs, rng=None, iters=100):
    """Power iteration on gradient differences. Exact (up to convergence)
    for quadratic ``f``; a local estimate otherwise."""
    rng = np.random.default_rng(0) if rng is None else rng
    v = [rng.standard_normal(x.shape) for x in xs]
    g0 = oracle.gradient(xs)
    lam = 0.0
    for _ in range(iters):
        nrm = np.sqrt(sum(float(np.sum(u * u)) for u in v))
        v = [u / nrm for u in v]
        g1 = oracle.gradient([x + u for x, u in zip(xs, v)])
        v = [a - b for a, b in zip(g1, g0)]
        lam = np.sqrt(sum(float(np.sum(u * u)) for u in v))
        if lam == 0.0:
            break
    return float(lam)


def lift_general_problem(problem, eps):
    """Append a free slack block ``x_{N+1}`` with ``A_{N+1} = I`` and objective
    penalty ``(mu/2)||x_{N+1}||^2``, ``mu = 1/eps``.

    The returned problem is in basic form. A problem that is already basic
    is returned unchanged (with a warning).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if problem.is_basic:
        warnings.warn("problem is already in basic form; lifting skipped", stacklevel=2)
        return problem
    mu = 1.0 / eps
    m = problem.n_rows
    slack = Block(Euclidean(m), name="slack")
    oracle = SlackPenaltyOracle(problem.oracle, mu).bind(problem.n_blocks)
    r_lower = None
    if problem.r_lower is not None and len(problem.r_lower) == problem.n_blocks - 1:
        last = problem.blocks[-1]
        if last.regularizer.is_zero:
            r_lower = problem.r_lower + (0.0,)
    return MultiBlockProblem(
        blocks=problem.blocks + (slack,),
        oracle=oracle,
        rhs=problem.rhs,
        f_lower=problem.f_lower,
        r_lower=r_lower,
        notes=problem.notes + (f"lifted with mu={mu:g}",),
    )


def _dense(blk, m):
    if blk.dense_coupling:
        return blk.coupling
    if blk.size != m:
        raise ValueError(f"block {blk.name!r}: scalar coupling does not match the row count")
    return float(blk.coupling) * np.eye(m)


def decouple_nonconvex_regularizers(problem, convex, free, split):
    """Move nonconvex regularizers off manifold blocks via consensus copies.

    ``convex``, ``free`` and ``split`` partition the indices of blocks
    ``0..N-2``. For each index in ``split`` a Euclidean copy ``y_i`` carrying
    ``r_i`` is appended (before the last block) together with constraint rows
    ``y_i - x_i = 0``; the original block keeps its manifold and loses its
    regularizer. The result has a non-identity last coupling, so it is
    normally followed by :func:`lift_general_problem`.
    """
    N = problem.n_blocks
    parts = [set(convex), set(free), set(split)]
    union = set().union(*parts)
    if union != set(range(N - 1)) or sum(len(p) for p in parts) != N - 1:
        raise ValueError("index sets must partition the non-last blocks 0..N-2")
    split = sorted(split)
    for i in split:
        blk = problem.blocks[i]
        if isinstance(blk.manifold, Euclidean) or blk.regularizer.is_zero:
            raise ValueError(f"block {i} needs both a manifold and a regularizer to be split")
    if not split:
        return problem
    m = problem.n_rows
    extra = [problem.blocks[i].size for i in split]
    total = m + sum(extra)
    offsets = np.cumsum([m] + extra)[:-1]

    def padded(a):
        out = np.zeros((total, a.shape[1]))
        out[:m] = a
        return out

    blocks = []
    for k, blk in enumerate(problem.blocks[:-1]):
        A = padded(_dense(blk, m))
        if k in split:
            j = split.index(k)
            o = offsets[j]
            A[o:o + blk.size] = -np.eye(blk.size)
            blk = replace(blk, regularizer=ZERO)
        blocks.append(replace(blk, coupling=A))
    for j, i in enumerate(split):
        src = problem.blocks[i]
        A = np.zeros((total, src.size))
        o = offsets[j]
        A[o:o + src.size] = np.eye(src.size)
        name = f"{src.name or i}_copy"
        blocks.append(Block(Euclidean(src.shape), WHOLE, src.regularizer, A, name))
    last = problem.blocks[-1]
    blocks.append(replace(last, coupling=padded(_dense(last, m))))
    base_index = list(range(N - 1)) + [None] * len(split) + [N - 1]
    r_lower = None
    if problem.r_lower is not None:
        r_lower = tuple(0.0 if k in split else v for k, v in enumerate(problem.r_lower))
        r_lower = r_lower + tuple(problem.r_lower[i] for i in split)
    return MultiBlockProblem(
        blocks=tuple(blocks),
        oracle=ConsensusOracle(problem.oracle, base_index),
        rhs=np.concatenate([problem.rhs, np.zeros(sum(extra))]),
        f_lower=problem.f_lower,
        r_lower=r_lower,
        notes=problem.notes + (f"decoupled blocks {split}",),
    )
