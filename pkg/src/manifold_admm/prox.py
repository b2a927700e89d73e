"""Closed-form solvers for the block subproblems produced by the applications.

All kernels return global minimizers. The scalar l_q kernel is vectorized over
numpy arrays because the tensor application calls it once per tensor entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LqProxSpec",
    "SUPPORTED_Q",
    "normalize_q",
    "linear_min_on_nonneg_sphere",
    "nearest_orthogonal",
    "scalar_lq_prox",
    "lq_prox",
    "lq_objective",
    "soft_threshold",
    "real_poly_roots",
    "nonneg_project",
]

SUPPORTED_Q = (0.5, 2.0 / 3.0, 1.0)


def normalize_q(q):
    """Snap ``q`` to one of the supported exponents 1/2, 2/3, 1."""
    q = float(q)
    for s in SUPPORTED_Q:
        if abs(q - s) < 1e-9:
            return s
    raise ValueError(f"unsupported exponent q={q}; expected one of 1/2, 2/3, 1")


@dataclass(frozen=True)
class LqProxSpec:
    """Scalar problem ``min_x a x^2 + b x + c |x|^q`` (optionally with the
    capped penalty ``c min(|x|^q, cap |x|)``)."""

    a: float
    b: float
    c: float
    q: float
    cap: float | None = None

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("quadratic coefficient a must be positive")
        if self.c < 0:
            raise ValueError("regularizer weight c must be nonnegative")
        if self.cap is not None and not self.cap > 0:
            raise ValueError("cap must be positive")
        object.__setattr__(self, "q", normalize_q(self.q))

    def objective(self, x):
        return lq_objective(x, self.a, self.b, self.c, self.q, self.cap)


def linear_min_on_nonneg_sphere(b):
    """Global minimizer of ``<b, x>`` over ``{||x|| = 1, x >= 0}``.

    Returns ``b^- / ||b^-||`` with ``b^- = max(-b, 0)`` when some entry of
    ``b`` is negative, otherwise the unit vector at the smallest index of
    ``min_j b_j``.
    """
    b = np.asarray(b, dtype=float)
    if b.size == 0:
        raise ValueError("empty vector")
    if np.isnan(b).any():
        raise ValueError("NaN in linear coefficient")
    neg = np.maximum(-b, 0.0)
    top = neg.max()
    if top > 0.0:
        # rescale first so tiny or huge entries do not under/overflow the norm
        neg = neg / top
        return neg / np.linalg.norm(neg)
    x = np.zeros_like(b)
    x.flat[int(np.argmin(b))] = 1.0
    return x


def nearest_orthogonal(B):
    """Closest column-orthonormal matrix to ``B`` in Frobenius norm.

    Equivalently the maximizer of ``<B, U>`` over ``U^T U = I``. Computed as
    ``Q P^T`` from the thin SVD ``B = Q S P^T``. The optimum is unique only
    when ``B`` has full column rank; for ``B = 0`` the identity block is
    returned.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] < B.shape[1]:
        raise ValueError(f"need an n x m matrix with n >= m, got {B.shape}")
    if not np.any(B):
        return np.eye(*B.shape)
    q, _, pt = np.linalg.svd(B, full_matrices=False)
    return q @ pt


def nonneg_project(B):
    """Elementwise ``max(B, 0)``: the Frobenius projection onto ``B >= 0``."""
    return np.maximum(np.asarray(B, dtype=float), 0.0)


def soft_threshold(v, thresh):
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def real_poly_roots(coeffs):
    """Real roots of a polynomial of degree 1..4.

    ``coeffs`` are ordered from the highest degree down, as in ``np.roots``.
    Roots come from companion-matrix eigenvalues and are polished with a few
    Newton steps, then sorted ascending.
    """
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if c.size <= 1:
        raise ValueError("polynomial must have degree >= 1")
    if c.size > 5:
        raise ValueError("degree > 4 not supported")
    scale = 1.0 + np.max(np.abs(c))
    z = np.roots(c)
    cand = z.real[np.abs(z.imag) <= 1e-6 * (1.0 + np.abs(z))]
    dc = np.polyder(c)
    roots = []
    for r in cand:
        for _ in range(4):
            d = np.polyval(dc, r)
            if d == 0.0:
                break
            step = np.polyval(c, r) / d
            r = r - step
            if abs(step) <= 1e-16 * (1.0 + abs(r)):
                break
        if abs(np.polyval(c, r)) > 1e-8 * scale:
            continue
        if not any(abs(r - s) <= 1e-9 * (1.0 + abs(s)) for s in roots):
            roots.append(float(r))
    return sorted(roots)


def lq_objective(x, a, b, c, q, cap=None):
    ax = np.abs(x)
    pen = ax if q == 1.0 else ax**q
    if cap is not None:
        pen = np.minimum(pen, cap * ax)
    return a * x * x + b * x + c * pen


def _positive_roots(p, r, degree):
    """Positive real roots of ``z^3 + p z + r`` or ``z^4 + p z + r``, batched.

    Returns an array of shape ``(K, degree)`` with NaN where a root is
    complex or nonpositive.
    """
    k = p.shape[0]
    comp = np.zeros((k, degree, degree))
    comp[:, 1:, :-1] = np.eye(degree - 1)
    comp[:, 0, degree - 2] = -p
    comp[:, 0, degree - 1] = -r
    z = np.linalg.eigvals(comp)
    real = np.abs(z.imag) <= 1e-6 * (1.0 + np.abs(z))
    z = z.real.copy()
    pc = p[:, None]
    rc = r[:, None]
    # Newton polish on the real parts
    for _ in range(3):
        val = z**degree + pc * z + rc
        der = degree * z ** (degree - 1) + pc
        ok = der != 0
        z = np.where(ok, z - val / np.where(ok, der, 1.0), z)
    good = real & (z > 0)
    return np.where(good, z, np.nan)


def lq_prox(a, b, c, q, cap=None):
    """Vectorized global minimizer of ``a x^2 + b x + c |x|^q``.

    ``a``, ``b`` and ``c`` broadcast against each other. With ``cap`` the
    penalty is ``c min(|x|^q, cap |x|)``; the minimizer is then the better of
    the uncapped l_q solution and the l_1 solution with weight ``c cap``.
    Ties go to the smaller ``|x|``, then to the smaller ``x``.
    """
    q = normalize_q(q)
    a, b, c = np.broadcast_arrays(
        np.asarray(a, float), np.asarray(b, float), np.asarray(c, float)
    )
    if np.any(a <= 0):
        raise ValueError("quadratic coefficient must be positive")
    if np.any(c < 0):
        raise ValueError("regularizer weight must be nonnegative")
    shape = b.shape
    a, b, c = a.ravel(), b.ravel(), c.ravel()
    x1 = _uncapped(a, b, c, q)
    if cap is not None:
        x2 = soft_threshold(-b, c * cap) / (2.0 * a)
        cands = np.stack([x1, x2], axis=1)
        x1 = _pick(cands, a, b, c, q, cap)
    zero_w = c == 0
    x1 = np.where(zero_w, -b / (2.0 * a), x1)
    return x1.reshape(shape)


def _uncapped(a, b, c, q):
    if q == 1.0:
        return soft_threshold(-b, c) / (2.0 * a)
    degree = 3 if q == 0.5 else 4
    power = 2 if q == 0.5 else 3
    cols = [np.zeros_like(b)]
    safe_a = 2.0 * a
    for sgn in (1.0, -1.0):
        z = _positive_roots(sgn * b / safe_a, c * q / safe_a, degree)
        cols.append(sgn * z**power)
    cands = np.concatenate([cols[0][:, None], cols[1], cols[2]], axis=1)
    return _pick(cands, a, b, c, q, None)


def _pick(cands, a, b, c, q, cap):
    vals = lq_objective(cands, a[:, None], b[:, None], c[:, None], q, cap)
    vals = np.where(np.isnan(cands), np.inf, vals)
    best = vals.min(axis=1, keepdims=True)
    tie = vals == best
    mag = np.where(tie, np.abs(cands), np.inf)
    tie &= mag == mag.min(axis=1, keepdims=True)
    pos = np.where(tie, cands, np.inf)
    idx = np.argmin(pos, axis=1)
    return cands[np.arange(cands.shape[0]), idx]


def scalar_lq_prox(spec):
    """Global minimizer for a single :class:`LqProxSpec`."""
    return float(lq_prox(spec.a, spec.b, spec.c, spec.q, spec.cap))
