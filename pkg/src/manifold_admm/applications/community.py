"""Community detection by symmetric orthogonal nonnegative factorization.

The model

    min  ||A - X X^T||_F^2 + mu/2 ||Z||_F^2
    s.t. X^T X = I,  Y >= 0,  X - Y + Z = 0

is solved with blocks ``(X, Y, Z)``: ``X`` on the Stiefel manifold, ``Y`` on
the nonnegative orthant and ``Z`` as the free last block. Node ``i`` joins
the community holding the largest entry of row ``i``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..engine import make_config, solve
from ..manifolds import Euclidean, Stiefel
from ..problem import NONNEG, Block, MultiBlockProblem, SmoothOracle

__all__ = [
    "CommunityOracle",
    "build_community",
    "planted_partition",
    "extract_communities",
    "misclassification_rate",
    "CommunityResult",
    "solve_community",
]


class CommunityOracle(SmoothOracle):
    """``||A - X X^T||_F^2 + mu/2 ||Z||_F^2`` over blocks ``(X, Y, Z)``."""

    def __init__(self, A, mu, lipschitz=100.0):
        self.A = np.asarray(A, float)
        self.mu = float(mu)
        self.lipschitz = float(lipschitz)

    def value(self, xs):
        X, _, Z = xs
        R = self.A - X @ X.T
        return float(np.sum(R * R)) + 0.5 * self.mu * float(np.sum(Z * Z))

    def partial(self, i, xs):
        X, Y, Z = xs
        if i == 0:
            return -4.0 * (self.A - X @ X.T) @ X
        if i == 1:
            return np.zeros_like(Y)
        return self.mu * Z

    def gradient(self, xs):
        return [self.partial(i, xs) for i in range(3)]

    def block_curvature(self, i):
        # quartic in X, so only the linearized updates apply to it
        return None if i == 0 else (0.0 if i == 1 else self.mu)


def build_community(A, k, mu=50.0, lipschitz=100.0):
    """Blocks ``X`` (Stiefel ``n x k``), ``Y`` (nonnegative) and slack ``Z``."""
    A = np.asarray(A, float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("adjacency must be a square matrix")
    if not np.allclose(A, A.T):
        raise ValueError("adjacency must be symmetric")
    if not np.all((A == 0) | (A == 1)):
        raise ValueError("adjacency must be binary")
    n = A.shape[0]
    k = int(k)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if not mu > 0:
        raise ValueError("mu must be positive")
    blocks = [
        Block(Stiefel(n, k), coupling=1.0, name="X"),
        Block(Euclidean(n, k), NONNEG, coupling=-1.0, name="Y"),
        Block(Euclidean(n, k), name="Z"),
    ]
    return MultiBlockProblem(blocks, CommunityOracle(A, mu, lipschitz), np.zeros(n * k),
                             f_lower=0.0, r_lower=[0.0, 0.0])


def planted_partition(n, k, p_in, p_out, rng):
    """Stochastic block model with ``k`` near-equal communities.

    Returns the symmetric 0/1 adjacency (zero diagonal) and labels in
    ``0..k-1``.
    """
    if not (0 <= p_out <= 1 and 0 <= p_in <= 1):
        raise ValueError("edge probabilities must lie in [0, 1]")
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    labels = rng.permutation(np.arange(n) % k)
    P = np.where(labels[:, None] == labels[None, :], p_in, p_out)
    upper = np.triu(rng.random((n, n)) < P, 1)
    A = (upper | upper.T).astype(float)
    return A, labels


def extract_communities(X):
    """Row argmax (ties go to the smallest column index)."""
    return np.argmax(np.asarray(X, float), axis=1)


def misclassification_rate(labels, truth, k=None):
    """Smallest mismatch fraction over all relabelings of ``labels``."""
    labels = np.asarray(labels, int)
    truth = np.asarray(truth, int)
    if labels.shape != truth.shape:
        raise ValueError("labels and truth must have the same length")
    if labels.size == 0:
        return 0.0
    if k is None:
        k = int(max(labels.max(), truth.max())) + 1
    if k > 10:
        raise ValueError("k > 10 makes the permutation search too expensive")
    conf = np.zeros((k, k))
    np.add.at(conf, (labels, truth), 1.0)
    best = max(sum(conf[i, p[i]] for i in range(k)) for p in itertools.permutations(range(k)))
    return 1.0 - best / labels.size


@dataclass
class CommunityResult:
    labels: np.ndarray
    error: float | None
    solve: object


def solve_community(A, k, seed, truth=None, mu=50.0, lipschitz=100.0, iters=300,
                    variant="linearized", **overrides):
    """Run the solver from a random start and extract labels from ``Y``."""
    problem = build_community(A, k, mu, lipschitz)
    cfg = make_config(problem, variant, max_iter=iters, eps=1e-12, seed=seed,
                      output="last", **overrides)
    res = solve(problem, cfg)
    labels = extract_communities(res.state.xs[1])
    err = None if truth is None else misclassification_rate(labels, truth, k)
    return CommunityResult(labels, err, res)
