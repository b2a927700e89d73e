"""Embedded manifolds used as block constraints: Euclidean space, the unit
sphere and the Stiefel manifold.

Each manifold knows how to measure constraint violation, project an ambient
vector onto the tangent space at a point, and retract a tangent step back onto
the manifold. The module-level functions validate their inputs; the methods do
not, and are what the solver calls in its inner loops.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Manifold",
    "Euclidean",
    "Sphere",
    "Stiefel",
    "InfeasiblePointError",
    "tangent_project",
    "riemannian_grad",
    "retract",
    "retraction_constants",
    "sym",
]

DEFAULT_TOL = 1e-10


class InfeasiblePointError(ValueError):
    """Raised when a base point violates its manifold constraint."""


def sym(a):
    return 0.5 * (a + a.T)


class Manifold:
    """Base class. Subclasses set ``shape`` and implement the geometry."""

    kind = "abstract"
    compact = False

    def __init__(self, shape, tol=DEFAULT_TOL):
        if tol < 0:
            raise ValueError("feasibility tolerance must be nonnegative")
        self.shape = tuple(int(s) for s in shape)
        self.tol = float(tol)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def violation(self, x):
        return 0.0

    def is_feasible(self, x):
        return np.shape(x) == self.shape and self.violation(x) <= self.tol

    def proj(self, x, v):
        return np.array(v, dtype=float)

    def retract(self, x, v, t=1.0):
        return x + t * v

    def is_tangent(self, x, v, rtol=1e-8):
        return True

    def random_point(self, rng, nonneg=False):
        x = rng.standard_normal(self.shape)
        return np.abs(x) if nonneg else x

    def random_tangent(self, rng, x):
        return self.proj(x, rng.standard_normal(self.shape))

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.shape == other.shape
            and self.tol == other.tol
        )

    def __hash__(self):
        return hash((type(self).__name__, self.shape, self.tol))

    def __repr__(self):
        return f"{type(self).__name__}{self.shape}"


class Euclidean(Manifold):
    kind = "euclidean"

    def __init__(self, *shape, tol=DEFAULT_TOL):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        if not shape or any(int(s) < 1 for s in shape):
            raise ValueError(f"invalid Euclidean shape {shape}")
        super().__init__(shape, tol)


class Sphere(Manifold):
    """Unit sphere ``{x : ||x|| = 1}`` in R^dim."""

    kind = "sphere"
    compact = True

    def __init__(self, dim, tol=DEFAULT_TOL):
        if int(dim) < 1:
            raise ValueError("sphere dimension must be >= 1")
        super().__init__((int(dim),), tol)

    def violation(self, x):
        return abs(float(np.linalg.norm(x)) - 1.0)

    def proj(self, x, v):
        return v - np.dot(x, v) * x

    def is_tangent(self, x, v, rtol=1e-8):
        return abs(np.dot(x, v)) <= rtol * max(np.linalg.norm(v), 1e-300)

    def retract(self, x, v, t=1.0):
        y = x + t * v
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            raise ValueError("degenerate sphere retraction: x + t v = 0")
        return y / nrm

    def random_point(self, rng, nonneg=False):
        x = rng.standard_normal(self.shape)
        if nonneg:
            x = np.abs(x)
        return x / np.linalg.norm(x)


class Stiefel(Manifold):
    """Column-orthonormal matrices ``{U in R^{n x m} : U^T U = I}``."""

    kind = "stiefel"
    compact = True

    def __init__(self, n, m, tol=DEFAULT_TOL):
        n, m = int(n), int(m)
        if not n >= m >= 1:
            raise ValueError(f"Stiefel manifold needs n >= m >= 1, got n={n}, m={m}")
        super().__init__((n, m), tol)

    def violation(self, x):
        m = self.shape[1]
        return float(np.linalg.norm(x.T @ x - np.eye(m)))

    def proj(self, x, v):
        return v - x @ sym(x.T @ v)

    def is_tangent(self, x, v, rtol=1e-8):
        a = x.T @ v
        return np.linalg.norm(a + a.T) <= rtol * max(np.linalg.norm(v), 1e-300)

    def retract(self, x, v, t=1.0):
        # QR-based retraction; positive diagonal of R makes the Q factor unique
        q, r = np.linalg.qr(x + t * v)
        signs = np.sign(np.diag(r))
        signs[signs == 0] = 1.0
        return q * signs

    def random_point(self, rng, nonneg=False):
        g = rng.standard_normal(self.shape)
        if nonneg:
            g = np.abs(g)
        return self.retract(np.zeros(self.shape), g, 1.0)


def _check(m, x, v):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.shape != m.shape or v.shape != m.shape:
        raise ValueError(
            f"shape mismatch: manifold {m.shape}, point {x.shape}, vector {v.shape}"
        )
    viol = m.violation(x)
    if viol > m.tol:
        raise InfeasiblePointError(
            f"base point violates {m!r} constraint by {viol:.3e} (tol {m.tol:.1e})"
        )
    return x, v


def tangent_project(m, x, v):
    """Orthogonal projection of ``v`` onto the tangent space of ``m`` at ``x``.

    Euclidean: identity. Sphere: ``v - <x, v> x``. Stiefel:
    ``v - x sym(x^T v)``.
    """
    x, v = _check(m, x, v)
    return m.proj(x, v)


def riemannian_grad(m, x, euclid_grad):
    """Riemannian gradient of an embedded submanifold: the tangent projection
    of the Euclidean gradient."""
    return tangent_project(m, x, euclid_grad)


def retract(m, x, v, t=1.0):
    """Move from ``x`` along tangent vector ``v`` for step ``t`` and map back
    onto ``m``. ``t = 0`` returns ``x``."""
    x, v = _check(m, x, v)
    if t < 0:
        raise ValueError("retraction step must be nonnegative")
    if t == 0:
        return x.copy()
    return m.retract(x, v, t)


def retraction_constants(m, rng, trials=1000, t_max=1.0, norm_range=(1e-3, 10.0)):
    """Empirical constants ``(L1, L2)`` of the retraction curve
    ``Y(t) = retract(x, v, t)``.

    Returns the largest observed ratios ``||Y(t) - x|| / (t ||v||)`` and
    ``||Y(t) - x - t v|| / (t ||v||)^2`` over random base points, tangent
    directions with log-uniform norms in ``norm_range`` and ``t`` uniform on
    ``(0, t_max]``.
    """
    L1 = L2 = 0.0
    lo, hi = np.log(norm_range[0]), np.log(norm_range[1])
    for _ in range(int(trials)):
        x = m.random_point(rng)
        v = m.random_tangent(rng, x)
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            continue
        v = v * (np.exp(rng.uniform(lo, hi)) / nv)
        t = t_max * (1.0 - rng.random())
        y = m.retract(x, v, t)
        step = t * float(np.linalg.norm(v))
        L1 = max(L1, float(np.linalg.norm(y - x)) / step)
        L2 = max(L2, float(np.linalg.norm(y - x - t * v)) / step**2)
    return L1, L2
