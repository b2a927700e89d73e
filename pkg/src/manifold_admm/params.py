"""Parameter rules: default (beta, gamma, H) choices, descent coefficients,
feasibility checks and the iteration-complexity budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Variant",
    "DefaultParameters",
    "ComplexityBudget",
    "InfeasibleParametersError",
    "beta_lower_bound",
    "gamma_interval",
    "default_parameters",
    "jacobi_lipschitz",
    "sigma_threshold",
    "last_block_coefficient",
    "block_coefficient",
    "descent_tau",
    "potential_weight",
    "parameter_violations",
    "complexity_budget",
    "default_linesearch_sigma",
]


class Variant(str, Enum):
    EXACT = "exact"
    LINEARIZED = "linearized"
    STOCHASTIC = "stochastic"
    LINESEARCH = "linesearch"
    JACOBI = "jacobi"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {"jacobilinearized": "jacobi", "ls": "linesearch"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown variant {value!r}; choose one of {names}") from None

    @property
    def stochastic(self):
        return self is Variant.STOCHASTIC


class InfeasibleParametersError(ValueError):
    """Raised when (beta, gamma, H) fall outside the region where the
    potential function provably decreases."""


@dataclass(frozen=True)
class DefaultParameters:
    beta: float
    gamma: float
    sigma_h: float
    gamma_interval: tuple


@dataclass(frozen=True)
class ComplexityBudget:
    kappa1: float
    kappa2: float
    kappa3: float
    tau: float
    iterations: int
    kappa4: float | None = None
    batch: int | None = None


def beta_lower_bound(L, variant):
    """Strict lower bound on beta for the variant."""
    _check_L(L)
    v = Variant.parse(variant)
    if v.stochastic:
        return (8.0 * (L + 1) + 8.0 * math.sqrt((L + 1) ** 2 + 34.0 * L * L)) / 17.0
    return (6.0 + 18.0 * math.sqrt(3.0)) / 13.0 * L


def gamma_interval(beta, L, variant):
    """Open interval of admissible Step-2 rates ``gamma``.

    Raises InfeasibleParametersError when beta is at or below its lower bound
    (the interval is then empty).
    """
    v = Variant.parse(variant)
    if v.stochastic:
        disc = 17.0 * beta**2 - 16.0 * (L + 1) * beta - 128.0 * L * L
        a, num = 17.0, 16.0
    else:
        disc = 13.0 * beta**2 - 12.0 * beta * L - 72.0 * L * L
        a, num = 13.0, 12.0
    if disc <= 0:
        raise InfeasibleParametersError(
            f"beta={beta:g} is below the admissible bound {beta_lower_bound(L, v):g}"
        )
    root = math.sqrt(disc)
    return (num / (a * beta + root), num / (a * beta - root))


def jacobi_lipschitz(L, beta, n_blocks, max_coupling_norm):
    """Gradient Lipschitz constant of ``f + beta/2 ||sum A_i x_i - b||^2``."""
    return L + beta * n_blocks * max_coupling_norm**2


def sigma_threshold(L, beta, variant, L_hat=None):
    """Strict lower bound on the proximal weight ``sigma`` (``H_i = sigma I``)."""
    v = Variant.parse(variant)
    if v is Variant.EXACT:
        return 6.0 * L * L / beta
    if v is Variant.LINEARIZED:
        return 6.0 * L * L / beta + L
    if v is Variant.STOCHASTIC:
        return 8.0 * L * L / beta + L + 1.0
    if v is Variant.JACOBI:
        if L_hat is None:
            raise ValueError("jacobi variant needs L_hat")
        return 6.0 * L * L / beta + L_hat
    return 0.0


def default_linesearch_sigma(L, beta, s=1.0, alpha=0.5, L1=2.0):
    """Sufficient-decrease constant safely above ``max(6 L^2 L1^2 / beta, 2 alpha / s)``."""
    return 1.1 * max(6.0 * L * L * L1 * L1 / beta, 2.0 * alpha / s)


def default_parameters(L, variant, *, n_blocks=None, max_coupling_norm=None):
    """Feasible default ``(beta, gamma, sigma_H)``.

    Deterministic variants use ``beta = 3L``; the stochastic variant uses
    1.01 times its lower bound. ``gamma`` is the midpoint of its admissible
    interval and ``sigma_H`` is twice the lower bound on ``H`` (for the
    line-search variant it is the sufficient-decrease constant). The Jacobi
    variant needs ``n_blocks`` and ``max_coupling_norm`` to size ``H``.
    """
    _check_L(L)
    v = Variant.parse(variant)
    beta = 1.01 * beta_lower_bound(L, v) if v.stochastic else 3.0 * L
    lo, hi = gamma_interval(beta, L, v)
    gamma = 0.5 * (lo + hi)
    L_hat = None
    if v is Variant.JACOBI:
        if n_blocks is None or max_coupling_norm is None:
            raise ValueError("jacobi defaults need n_blocks and max_coupling_norm")
        L_hat = jacobi_lipschitz(L, beta, n_blocks, max_coupling_norm)
    if v is Variant.LINESEARCH:
        sigma = default_linesearch_sigma(L, beta)
    else:
        sigma = 2.0 * sigma_threshold(L, beta, v, L_hat)
    out = DefaultParameters(beta, gamma, sigma, (lo, hi))
    assert not parameter_violations(L, v, beta, gamma, sigma, L_hat=L_hat)
    return out


def potential_weight(L, beta, gamma, variant):
    """Coefficient of ``||xbar - x_N||^2`` in the potential function."""
    c = 4.0 if Variant.parse(variant).stochastic else 3.0
    return c / beta * ((beta - 1.0 / gamma) ** 2 + L * L)


def last_block_coefficient(L, beta, gamma, variant):
    """Coefficient multiplying ``||x_N^k - x_N^{k+1}||^2`` in the one-step
    potential change. Negative inside the admissible region."""
    z = 1.0 / gamma
    if Variant.parse(variant).stochastic:
        return (beta + L) / 2 - z + 8.0 / beta * (beta - z) ** 2 + 4.0 * L * L / beta + 0.5
    return (beta + L) / 2 - z + 6.0 / beta * (beta - z) ** 2 + 3.0 * L * L / beta


def block_coefficient(L, beta, sigma, variant, *, L_hat=None, L1=2.0):
    """Guaranteed decrease weight for the manifold blocks (positive inside the
    admissible region). For the line-search variant ``sigma`` is the
    sufficient-decrease constant and the weight multiplies ``||t g||^2``."""
    v = Variant.parse(variant)
    if v is Variant.EXACT:
        return sigma / 2 - 3.0 * L * L / beta
    if v is Variant.LINEARIZED:
        return sigma / 2 - L / 2 - 3.0 * L * L / beta
    if v is Variant.STOCHASTIC:
        return sigma / 2 - 4.0 * L * L / beta - (L + 1) / 2
    if v is Variant.JACOBI:
        return sigma / 2 - L_hat / 2 - 3.0 * L * L / beta
    return sigma / 2 - 3.0 * L * L * L1 * L1 / beta


def descent_tau(L, beta, gamma, sigma, variant, *, L_hat=None, L1=2.0):
    sig = np.atleast_1d(np.asarray(sigma, float))
    blk = min(block_coefficient(L, beta, s, variant, L_hat=L_hat, L1=L1) for s in sig)
    return min(-last_block_coefficient(L, beta, gamma, variant), blk)


def parameter_violations(L, variant, beta, gamma, sigma, *, L_hat=None, ls_s=1.0,
                         ls_alpha=0.5, L1=2.0):
    """List of violated sufficient conditions (empty when all hold)."""
    v = Variant.parse(variant)
    out = []
    if not (beta > 0 and gamma > 0):
        out.append("beta and gamma must be positive")
        return out
    bound = beta_lower_bound(L, v)
    if not beta > bound:
        out.append(f"beta={beta:g} must exceed {bound:g}")
    else:
        lo, hi = gamma_interval(beta, L, v)
        if not lo < gamma < hi:
            out.append(f"gamma={gamma:g} must lie in ({lo:g}, {hi:g})")
    sig = np.atleast_1d(np.asarray(sigma, float))
    if v is Variant.LINESEARCH:
        need = max(6.0 * L * L * L1 * L1 / beta, 2.0 * ls_alpha / ls_s)
        if not np.all(sig > need):
            out.append(f"line-search sigma must exceed {need:g}")
        if not 0.0 < ls_alpha < 1.0:
            out.append("line-search alpha must lie in (0, 1)")
        if not ls_s > 0:
            out.append("line-search initial step must be positive")
    else:
        need = sigma_threshold(L, beta, v, L_hat)
        if not np.all(sig > need):
            out.append(f"sigma_H must exceed {need:g}")
    return out


def complexity_budget(L, variant, beta, gamma, sigma, eps, psi1, f_lower, r_lower_sum, *,
                      n_blocks, max_coupling_norm, sigma2=None, L_hat=None,
                      ls_alpha=0.5, L1=2.0, L2=2.0, C=None):
    """Iteration bound ``K(eps)`` and the constants it is built from.

    ``psi1`` is the potential after the first iteration. The stochastic
    variant also returns the minimal batch size ``M(eps)``; the line-search
    variant needs the gradient bound ``C``.
    """
    v = Variant.parse(variant)
    tau = descent_tau(L, beta, gamma, sigma, v, L_hat=L_hat, L1=L1)
    if not tau > 0:
        raise InfeasibleParametersError(f"tau={tau:g} is not positive")
    if not eps > 0:
        raise ValueError("eps must be positive")
    N = n_blocks
    A2 = max_coupling_norm**2
    smax = float(np.max(sigma))
    d = (beta - 1.0 / gamma) ** 2
    gap = psi1 - r_lower_sum - f_lower
    if v.stochastic:
        if sigma2 is None:
            raise ValueError("stochastic budget needs sigma2")
        k1 = 4.0 / beta**2 * (d + L * L)
        k2 = 3.0 * (d + L * L)
        k3 = 2.0 * (L + beta * math.sqrt(N) * A2 + smax) ** 2
        k4 = 2.0 / tau * (8.0 / beta + N / 2.0)
        K = 4.0 * max(k1, k2, k3) / (tau * eps**2) * (gap + 2.0 * sigma2 / beta)
        M = 2.0 * sigma2 / eps**2 * max(k1 * k4 + 8.0 / beta**2, k2 * k4 + 3.0, k3 * k4 + 2.0)
        return ComplexityBudget(k1, k2, k3, tau, _ceil(K), k4, _ceil(M))
    if v is Variant.LINESEARCH:
        if C is None:
            raise ValueError("line-search budget needs the gradient bound C")
        A = max_coupling_norm
        k1 = 3.0 / beta**2 * (d + L * L * max(L1 * L1, 1.0))
        k2 = (abs(beta - 1.0 / gamma) + L) ** 2
        k3 = ((L + math.sqrt(N) * beta * A2) * max(L1, 1.0)
              + (smax + 2.0 * L2 * C + (L + beta * A2) * L1 * L1) / (2.0 * ls_alpha)
              + beta * A * math.sqrt(k1)) ** 2
        K = 3.0 * max(k1, k2, k3) / (tau * eps**2) * gap
        return ComplexityBudget(k1, k2, k3, tau, _ceil(K))
    Lk = L_hat if v is Variant.JACOBI else L
    k1 = 3.0 / beta**2 * (d + L * L)
    k2 = (abs(beta - 1.0 / gamma) + L) ** 2
    k3 = (Lk + beta * math.sqrt(N) * A2 + smax) ** 2
    K = 2.0 * max(k1, k2, k3) / (tau * eps**2) * gap
    return ComplexityBudget(k1, k2, k3, tau, _ceil(K))


def _ceil(x):
    return int(math.ceil(max(x, 0.0)))


def _check_L(L):
    if not (np.isfinite(L) and L > 0):
        raise ValueError(f"Lipschitz constant must be positive and finite, got {L}")
