"""Maximum bisection through a low-rank nonnegative sphere relaxation.

Each node ``i`` gets a row ``u_i`` on the nonnegative part of the unit circle.
The relaxation is

    min  <W, U U^T> + mu/2 ||z||^2
    s.t. sum_i u_i - x 1 + z = 0,  n/2 - nu <= x <= n/2 + nu,

solved with blocks ``(u_1, ..., u_n, x, z)``. Rows are rounded to sides and a
greedy pass restores balance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..engine import make_config, solve
from ..manifolds import Euclidean, Sphere
from ..problem import NONNEG, Block, MultiBlockProblem, SmoothOracle, box

__all__ = [
    "BisectionOracle",
    "build_max_bisection",
    "round_assignment",
    "greedy_balance",
    "cut_value",
    "brute_force_bisection",
    "BisectionResult",
    "solve_max_bisection",
]


class BisectionOracle(SmoothOracle):
    """``<W, U U^T> + mu/2 ||z||^2`` over blocks ``(u_1..u_n, x, z)``."""

    def __init__(self, W, mu, lipschitz=None):
        self.W = np.asarray(W, float)
        self.n = self.W.shape[0]
        self.mu = float(mu)
        self.lipschitz_bound = max(2.0 * float(np.linalg.norm(self.W, 2)), self.mu)
        self.lipschitz = self.lipschitz_bound if lipschitz is None else float(lipschitz)

    def _U(self, xs):
        return np.vstack(xs[: self.n])

    def value(self, xs):
        U = self._U(xs)
        return float(np.sum(self.W * (U @ U.T))) + 0.5 * self.mu * float(xs[-1] @ xs[-1])

    def gradient(self, xs):
        G = 2.0 * self.W @ self._U(xs)
        return list(G) + [np.zeros(1), self.mu * xs[-1]]

    def partial(self, i, xs):
        if i < self.n:
            return 2.0 * self.W[i] @ self._U(xs)
        if i == self.n:
            return np.zeros(1)
        return self.mu * xs[-1]

    def block_curvature(self, i):
        # W has a zero diagonal, so f is linear in each row u_i
        if i < self.n:
            return 0.0
        return 0.0 if i == self.n else self.mu


DEFAULT_LIPSCHITZ_ESTIMATE = 0.25


def build_max_bisection(g, mu=0.01, nu=1.0, lipschitz=None):
    """Relaxation as a multi-block problem.

    ``lipschitz`` is the estimate of ``L`` that sizes ``beta``, ``gamma`` and
    ``H``; by default the global bound ``max(2 ||W||_2, mu)``. Smaller
    estimates give much better cuts after rounding, which is why
    :func:`solve_max_bisection` defaults to ``DEFAULT_LIPSCHITZ_ESTIMATE``.
    """
    if g.n < 2:
        raise ValueError("graph needs at least two nodes")
    if not g.W.any():
        raise ValueError("graph has no edges")
    if not mu > 0:
        raise ValueError("mu must be positive")
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    if lipschitz is not None and not lipschitz >= mu:
        raise ValueError("Lipschitz estimate must be at least mu")
    n = g.n
    blocks = [Block(Sphere(2), NONNEG, coupling=1.0, name=f"u{i + 1}") for i in range(n)]
    blocks.append(Block(Euclidean(1), box(n / 2 - nu, n / 2 + nu),
                        coupling=-np.ones((2, 1)), name="x"))
    blocks.append(Block(Euclidean(2), name="z"))
    oracle = BisectionOracle(g.W, mu, lipschitz)
    # W >= 0 and U >= 0, so <W, U U^T> >= 0
    return MultiBlockProblem(blocks, oracle, np.zeros(2), f_lower=0.0,
                             r_lower=[0.0] * (n + 1))


def round_assignment(U):
    """Side 1 where ``U[i, 0] >= U[i, 1]``, else side 2."""
    U = np.asarray(U, float)
    return np.where(U[:, 0] >= U[:, 1], 1, 2)


def cut_value(labels, W):
    labels = np.asarray(labels)
    W = np.asarray(W, float)
    diff = labels[:, None] != labels[None, :]
    return float(np.sum(np.triu(W * diff, 1)))


def greedy_balance(labels, W):
    """Move vertices from the larger side, each time picking the move with the
    best cut change (lowest index on ties), until both sides have ``n/2``."""
    labels = np.array(labels, dtype=int)
    W = np.asarray(W, float)
    n = labels.size
    if n % 2:
        raise ValueError("balanced bisection needs an even number of nodes")
    while True:
        big = 1 if np.sum(labels == 1) > n // 2 else 2 if np.sum(labels == 2) > n // 2 else 0
        if not big:
            return labels
        same = labels == big
        # moving v changes the cut by (edges to own side) - (edges to other side)
        gain = W[:, same].sum(axis=1) - W[:, ~same].sum(axis=1)
        gain = np.where(same, gain, -np.inf)
        v = int(np.argmax(gain))
        labels[v] = 3 - big


def brute_force_bisection(W):
    """Exact maximum bisection by enumeration (node 0 fixed to side 1)."""
    W = np.asarray(W, float)
    n = W.shape[0]
    if n % 2:
        raise ValueError("balanced bisection needs an even number of nodes")
    best, best_labels = -1.0, None
    for rest in itertools.combinations(range(1, n), n // 2 - 1):
        labels = np.full(n, 2)
        labels[0] = 1
        labels[list(rest)] = 1
        c = cut_value(labels, W)
        if c > best:
            best, best_labels = c, labels
    return best, best_labels


@dataclass
class BisectionResult:
    labels: np.ndarray
    cut: float
    relaxed_objective: float
    solve: object


def solve_max_bisection(g, seed=0, mu=0.01, nu=1.0, variant="exact", iters=30,
                        lipschitz=DEFAULT_LIPSCHITZ_ESTIMATE, **overrides):
    """Relax, solve, round and rebalance. Returns the balanced labels and cut."""
    problem = build_max_bisection(g, mu, nu, lipschitz)
    cfg = make_config(problem, variant, max_iter=iters, seed=seed, output="last",
                      eps=overrides.pop("eps", 1e-12), **overrides)
    res = solve(problem, cfg)
    xs = res.state.xs
    U = np.vstack(xs[: g.n])
    labels = greedy_balance(round_assignment(U), g.W)
    return BisectionResult(labels, cut_value(labels, g.W),
                           float(np.sum(g.W * (U @ U.T))), res)
