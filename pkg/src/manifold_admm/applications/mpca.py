"""Sparse multilinear PCA with orthogonal factors.

Model, for data tensors ``T^(1..N)`` of order ``d``:

    min  sum_i ||T^(i) - C^(i) x_1 U_1 ... x_d U_d||^2 + a1 sum_i ||C^(i)||_p^p
         + a2 sum_j ||V_j||_q^q + mu/2 sum_j ||Y_j||^2
    s.t. U_j^T U_j = I,  V_j - U_j + Y_j = 0.

The blocks are updated in the order factors ``U``, sparse copies ``V``, cores
``C``, then a gradient step on the slacks ``Y`` and the multiplier update.
Every block subproblem has a closed form: a nearest orthogonal matrix for
``U`` and entrywise l_q proximal maps for ``V`` and ``C``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..params import default_parameters, potential_weight
from ..prox import lq_prox, nearest_orthogonal
from .tensor import mode_unfold, tucker_apply

__all__ = [
    "MpcaParams",
    "MpcaState",
    "MpcaData",
    "generate_mpca_data",
    "sparse_orthonormal",
    "init_mpca_state",
    "mpca_step",
    "mpca_lagrangian",
    "mpca_potential",
    "mpca_metrics",
    "run_mpca",
    "project_cores",
    "DEFAULT_MPCA_LIPSCHITZ",
]

# Lipschitz estimate used to size (beta, gamma, sigma); small values keep the
# proximal terms light so the fit term drives the factors within 100 steps.
DEFAULT_MPCA_LIPSCHITZ = 0.05


@dataclass(frozen=True)
class MpcaParams:
    """Weights and step parameters. ``beta``, ``gamma`` and ``sigma`` default
    from the Lipschitz estimate ``lipschitz`` via the exact-variant rules;
    ``eta`` (the slack step) defaults to ``gamma``."""

    alpha1: float = 0.1
    alpha2: float = 0.01
    mu: float = 1e-6
    core_q: float = 2.0 / 3.0
    factor_q: float = 1.0
    lipschitz: float = DEFAULT_MPCA_LIPSCHITZ
    beta: float | None = None
    gamma: float | None = None
    sigma: float | None = None
    eta: float | None = None

    def resolved(self):
        dp = default_parameters(self.lipschitz, "exact")
        beta = dp.beta if self.beta is None else self.beta
        gamma = dp.gamma if self.gamma is None else self.gamma
        sigma = dp.sigma_h if self.sigma is None else self.sigma
        eta = gamma if self.eta is None else self.eta
        return replace(self, beta=beta, gamma=gamma, sigma=sigma, eta=eta)


@dataclass
class MpcaState:
    cores: np.ndarray          # (N, m_1, ..., m_d)
    U: list
    V: list
    Y: list
    Lam: list
    params: MpcaParams
    Y_prev: list = field(default=None)
    k: int = 0

    def copy(self):
        return MpcaState(self.cores.copy(), [u.copy() for u in self.U],
                         [v.copy() for v in self.V], [y.copy() for y in self.Y],
                         [g.copy() for g in self.Lam], self.params,
                         [y.copy() for y in (self.Y_prev or self.Y)], self.k)


@dataclass
class MpcaData:
    tensors: np.ndarray        # noisy observations (N, n_1, ..., n_d)
    clean: np.ndarray
    cores: np.ndarray
    factors: list


def sparse_orthonormal(rng, n, m, density):
    """``n x m`` matrix with orthonormal columns on disjoint random row
    supports and ``round(density n m)`` nonzeros in total."""
    nnz = int(round(density * n * m))
    nnz = min(max(nnz, m), n)
    counts = np.full(m, nnz // m)
    counts[: nnz % m] += 1
    rows = rng.permutation(n)
    U = np.zeros((n, m))
    start = 0
    for c, cnt in enumerate(counts):
        idx = rows[start:start + cnt]
        start += cnt
        v = rng.standard_normal(cnt)
        U[idx, c] = v / np.linalg.norm(v)
    return U


def generate_mpca_data(rng, shape=(10, 10, 10), core_shape=(3, 3, 3), n_instances=20,
                       core_density=0.3, factor_density=1.0 / 6.0, noise_sd=1e-3):
    """Shared sparse orthonormal factors, per-instance sparse cores with
    uniform entries on [-1, 1], and Gaussian noise."""
    shape, core_shape = tuple(shape), tuple(core_shape)
    if len(shape) != len(core_shape) or any(m > n for n, m in zip(shape, core_shape)):
        raise ValueError("core modes must not exceed tensor modes and orders must agree")
    factors = [sparse_orthonormal(rng, n, m, factor_density) for n, m in zip(shape, core_shape)]
    size = int(np.prod(core_shape))
    keep = max(1, int(round(core_density * size)))
    cores = np.zeros((n_instances, size))
    for i in range(n_instances):
        idx = rng.choice(size, keep, replace=False)
        cores[i, idx] = rng.uniform(-1.0, 1.0, keep)
    cores = cores.reshape((n_instances,) + core_shape)
    clean = np.stack([tucker_apply(c, factors) for c in cores])
    noisy = clean + noise_sd * rng.standard_normal(clean.shape)
    return MpcaData(noisy, clean, cores, factors)


def _project(T, factors, skip=None):
    """Multiply every mode except ``skip`` of the stacked tensors by ``U^T``."""
    out = T
    for j, U in enumerate(factors):
        if j == skip:
            continue
        out = np.moveaxis(np.tensordot(U.T, out, axes=(1, j + 1)), 0, j + 1)
    return out


def project_cores(T, factors):
    """``T^(i) x_1 U_1^T ... x_d U_d^T`` for every instance."""
    return _project(np.asarray(T, float), factors)


def init_mpca_state(T, core_shape, params=None, rng=None, factors=None):
    """Random orthonormal factors (unless given), cores from projection,
    ``V = U``, ``Y = 0`` and zero multipliers."""
    params = (params or MpcaParams()).resolved()
    rng = np.random.default_rng(0) if rng is None else rng
    T = np.asarray(T, float)
    if factors is None:
        factors = []
        for n, m in zip(T.shape[1:], core_shape):
            q, r = np.linalg.qr(rng.standard_normal((n, m)))
            factors.append(q * np.sign(np.diag(r)))
    U = [np.array(u, float) for u in factors]
    cores = project_cores(T, U)
    zeros = [np.zeros_like(u) for u in U]
    return MpcaState(cores, U, [u.copy() for u in U], [z.copy() for z in zeros],
                     [z.copy() for z in zeros], params, [z.copy() for z in zeros], 0)


def mpca_step(state, T):
    """One iteration: factors, sparse copies, cores, slacks, multipliers."""
    p = state.params
    beta, sigma, eta = p.beta, p.sigma, p.eta
    T = np.asarray(T, float)
    U = [u.copy() for u in state.U]
    V, Y, Lam = state.V, state.Y, state.Lam
    C = state.cores
    d = len(U)
    for j in range(d):
        # sum_i T_(j) (kron of other factors) C_(j)^T
        Z = _project(T, U, skip=j)
        P = np.zeros_like(U[j])
        for Zi, Ci in zip(Z, C):
            P += mode_unfold(Zi, j) @ mode_unfold(Ci, j).T
        B = P + 0.5 * Lam[j] - 0.5 * beta * Y[j] + 0.5 * beta * V[j] + 0.5 * sigma * U[j]
        U[j] = nearest_orthogonal(B)
    newV = []
    for j in range(d):
        b = beta * Y[j] + beta * U[j] - Lam[j] + sigma * V[j]
        newV.append(lq_prox(0.5 * (beta + sigma), -b, p.alpha2, p.factor_q))
    b = sigma * C + 2.0 * project_cores(T, U)
    newC = lq_prox(0.5 * (2.0 + sigma), -b, p.alpha1, p.core_q)
    newY = [y - eta * ((beta + p.mu) * y + beta * u - beta * v - lam)
            for y, u, v, lam in zip(Y, U, newV, Lam)]
    newLam = [lam - beta * (u - v + y) for lam, u, v, y in zip(Lam, U, newV, newY)]
    return MpcaState(newC, U, newV, newY, newLam, p, [y.copy() for y in Y], state.k + 1)


def _lq_sum(x, q):
    ax = np.abs(x)
    return float(np.sum(ax if q == 1.0 else ax**q))


def mpca_lagrangian(state, T):
    p = state.params
    T = np.asarray(T, float)
    fit = sum(float(np.sum((Ti - tucker_apply(Ci, state.U)) ** 2))
              for Ti, Ci in zip(T, state.cores))
    val = fit + p.alpha1 * _lq_sum(state.cores, p.core_q)
    for u, v, y, lam in zip(state.U, state.V, state.Y, state.Lam):
        r = u - v + y
        val += (p.alpha2 * _lq_sum(v, p.factor_q) + 0.5 * p.mu * float(np.sum(y * y))
                - float(np.sum(r * lam)) + 0.5 * p.beta * float(np.sum(r * r)))
    return val


def mpca_potential(state, T):
    """Lagrangian plus the slack-drift correction of the exact variant."""
    p = state.params
    w = potential_weight(p.lipschitz, p.beta, p.gamma, "exact")
    prev = state.Y_prev if state.Y_prev is not None else state.Y
    drift = sum(float(np.sum((a - b) ** 2)) for a, b in zip(prev, state.Y))
    return mpca_lagrangian(state, T) + w * drift


def mpca_metrics(state, truth, threshold=1e-3):
    """Relative error, orthogonality violation and sparsity after zeroing
    factor entries below ``threshold`` in magnitude."""
    Ubar = [np.where(np.abs(u) < threshold, 0.0, u) for u in state.U]
    truth = np.asarray(truth, float)
    errs = []
    for Ti, Ci in zip(truth, state.cores):
        out = tucker_apply(Ci, Ubar)
        den = float(np.sum(Ti * Ti))
        errs.append(float(np.sum((Ti - out) ** 2)) / den if den > 0 else 0.0)
    orth = float(np.mean([np.linalg.norm(u.T @ u - np.eye(u.shape[1])) for u in Ubar]))
    return {
        "rel_err": float(np.mean(errs)),
        "rel_err_sd": float(np.std(errs)),
        "orth_violation": orth,
        "core_sparsity": float(np.mean(state.cores != 0)),
        "factor_sparsity": float(np.mean([np.mean(u != 0) for u in Ubar])),
    }


def run_mpca(T, core_shape, params=None, iters=100, rng=None, factors=None, callback=None):
    state = init_mpca_state(T, core_shape, params, rng, factors)
    for _ in range(iters):
        state = mpca_step(state, T)
        if callback is not None:
            callback(state)
    return state
