"""Multi-block ADMM sweeps over manifold-constrained blocks.

One iteration updates blocks ``1..N-1`` (Step 1), takes a gradient step on
the free last block (Step 2) and updates the multiplier (Step 3). Step 1
comes in five flavours:

exact
    minimize the augmented Lagrangian in ``x_i`` plus ``sigma/2 ||x_i - x_i^k||^2``
    (``f`` must be quadratic in each block with known curvature);
linearized
    as above with ``f`` replaced by its linearization at the current point;
stochastic
    linearized with a mini-batch gradient estimate;
linesearch
    one Riemannian gradient step with backtracking on each block;
jacobi
    ``f`` and the penalty both linearized at the common iterate ``x^k``, so
    all blocks can be updated in parallel.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .manifolds import Euclidean, Sphere, Stiefel
from .params import (
    ComplexityBudget,
    InfeasibleParametersError,
    Variant,
    complexity_budget,
    default_linesearch_sigma,
    default_parameters,
    descent_tau,
    gamma_interval,
    jacobi_lipschitz,
    parameter_violations,
    potential_weight,
    sigma_threshold,
)
from .prox import linear_min_on_nonneg_sphere, nearest_orthogonal

__all__ = [
    "SolverConfig",
    "IterateState",
    "StationarityReport",
    "TraceRow",
    "StepInfo",
    "SolveResult",
    "UnsupportedBlockError",
    "LineSearchError",
    "make_config",
    "initial_state",
    "augmented_lagrangian",
    "potential_psi",
    "step",
    "sweep",
    "solve",
    "measure_stationarity",
    "theta",
    "solve_block",
]

log = logging.getLogger(__name__)

MAX_SHRINKS = 200
ROUNDOFF_FACTOR = 64.0


class UnsupportedBlockError(ValueError):
    """No closed-form Step-1 kernel for a block pattern."""


class LineSearchError(RuntimeError):
    """Backtracking failed to find an acceptable step."""


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings. ``sigma_h`` is a scalar or one value per block
    ``1..N-1``; for the line-search variant ``ls_sigma`` plays its role."""

    variant: Variant = Variant.EXACT
    beta: float = 1.0
    gamma: float = 0.3
    sigma_h: object = 1.0
    eps: float = 1e-3
    max_iter: int = 1000
    batch: int = 1
    ls_s: float = 1.0
    ls_alpha: float = 0.5
    ls_sigma: float | None = None
    L1: float = 2.0
    L2: float = 2.0
    seed: int = 0
    strict: bool = False
    output: str = "kstar"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.batch < 1:
            raise ValueError("batch size must be >= 1")
        if self.output not in ("kstar", "last"):
            raise ValueError("output must be 'kstar' or 'last'")
        if not (self.beta > 0 and self.gamma > 0):
            raise ValueError("beta and gamma must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def sigma_for(self, i):
        s = np.asarray(self.sigma_h, float)
        return float(s) if s.ndim == 0 else float(s[i])


def make_config(problem, variant="exact", **overrides):
    """Config with ``beta``, ``gamma`` and ``sigma_h`` defaulted from the
    problem's Lipschitz constant. Explicit values outside the admissible
    region warn, or raise InfeasibleParametersError with ``strict=True``."""
    v = Variant.parse(variant)
    L = problem.lipschitz
    kw = {k: val for k, val in overrides.items() if val is not None}
    dp = default_parameters(L, v, n_blocks=problem.n_blocks,
                            max_coupling_norm=problem.max_coupling_norm)
    beta = kw.setdefault("beta", dp.beta)
    if "gamma" not in kw:
        try:
            lo, hi = gamma_interval(beta, L, v)
            kw["gamma"] = 0.5 * (lo + hi)
        except InfeasibleParametersError:
            kw["gamma"] = dp.gamma
    if "sigma_h" not in kw:
        L_hat = None
        if v is Variant.JACOBI:
            L_hat = jacobi_lipschitz(L, beta, problem.n_blocks, problem.max_coupling_norm)
        kw["sigma_h"] = 2.0 * sigma_threshold(L, beta, v, L_hat) if v is not Variant.LINESEARCH \
            else dp.sigma_h
    if v is Variant.LINESEARCH and kw.get("ls_sigma") is None:
        kw["ls_sigma"] = default_linesearch_sigma(
            L, kw["beta"], kw.get("ls_s", 1.0), kw.get("ls_alpha", 0.5), kw.get("L1", 2.0))
    cfg = SolverConfig(variant=v, **kw)
    bad = config_violations(problem, cfg)
    if bad:
        msg = "parameters outside the admissible region: " + "; ".join(bad)
        if cfg.strict:
            raise InfeasibleParametersError(msg)
        warnings.warn(msg + " (convergence guarantees do not apply)", stacklevel=2)
    return cfg


def _L_hat(problem, cfg):
    if cfg.variant is not Variant.JACOBI:
        return None
    return jacobi_lipschitz(problem.lipschitz, cfg.beta, problem.n_blocks,
                            problem.max_coupling_norm)


def _sigmas(problem, cfg):
    if cfg.variant is Variant.LINESEARCH:
        return cfg.ls_sigma
    s = np.asarray(cfg.sigma_h, float)
    if s.ndim == 0:
        return float(s)
    if s.size != problem.n_blocks - 1:
        raise ValueError("sigma_h needs one value per block 1..N-1")
    return s


def config_violations(problem, cfg):
    return parameter_violations(
        problem.lipschitz, cfg.variant, cfg.beta, cfg.gamma, _sigmas(problem, cfg),
        L_hat=_L_hat(problem, cfg), ls_s=cfg.ls_s, ls_alpha=cfg.ls_alpha, L1=cfg.L1)


@dataclass
class IterateState:
    """Blocks ``x_1..x_N``, multiplier ``lam``, previous last block ``x_bar``
    and the iteration counter."""

    xs: list
    lam: np.ndarray
    x_bar: np.ndarray
    k: int = 0

    def copy(self):
        return IterateState([x.copy() for x in self.xs], self.lam.copy(),
                            self.x_bar.copy(), self.k)


@dataclass(frozen=True)
class StationarityReport:
    dual: float
    primal: float
    blocks: tuple
    theta: float
    psi: float

    @property
    def max_block(self):
        return max(self.blocks) if self.blocks else 0.0

    @property
    def worst(self):
        return max(self.dual, self.primal, self.max_block)

    def as_dict(self):
        return {"dual": self.dual, "primal": self.primal, "blocks": list(self.blocks),
                "max_block": self.max_block, "theta": self.theta, "psi": self.psi}


@dataclass(frozen=True)
class TraceRow:
    """Quantities after iteration ``k`` (0-based), i.e. at ``x^{k+1}``."""

    k: int
    lagrangian: float
    psi: float
    theta: float
    primal: float
    dual: float
    max_block: float
    wall_time: float = 0.0

    FIELDS = ("k", "lagrangian", "psi", "theta", "primal", "dual", "max_block", "wall_time")

    def as_tuple(self):
        return tuple(getattr(self, f) for f in self.FIELDS)


@dataclass
class StepInfo:
    """Per-sweep byproducts: block models ``(kappa, linear)`` whose gradient
    ``kappa x + linear`` defines the Step-1 subproblem, accepted line-search
    steps, Riemannian gradient norms and the count of null line-search
    steps (blocks left in place because the test is below rounding level)."""

    models: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    null_steps: int = 0


@dataclass
class SolveResult:
    trace: list
    k_star: int
    best_state: IterateState
    last_state: IterateState
    report: StationarityReport
    last_report: StationarityReport
    converged: bool
    config: SolverConfig
    budget: ComplexityBudget | None = None
    steps: list = field(default_factory=list)
    grad_bound: float = 0.0

    @property
    def state(self):
        return self.best_state if self.config.output == "kstar" else self.last_state

    @property
    def iterations(self):
        return len(self.trace)


def initial_state(problem, rng=None, xs=None, lam=None):
    """Random feasible start (uniform on each manifold), ``lambda^0 = 0``."""
    if xs is None:
        rng = np.random.default_rng(0) if rng is None else rng
        xs = problem.random_point(rng)
    xs = [np.array(x, dtype=float) for x in xs]
    lam = np.zeros(problem.n_rows) if lam is None else np.array(lam, dtype=float)
    return IterateState(xs, lam, xs[-1].copy(), 0)


def _lagrangian(problem, xs, lam, beta, res=None):
    if res is None:
        res = problem.residual(xs)
    return (problem.objective(xs) - float(res @ lam) + 0.5 * beta * float(res @ res))


def augmented_lagrangian(problem, state, beta):
    """``f(x) + sum r_i(x_i) - <Ax - b, lam> + beta/2 ||Ax - b||^2``."""
    return _lagrangian(problem, state.xs, state.lam, beta)


def potential_psi(problem, state, beta, gamma, variant):
    """Augmented Lagrangian plus ``(c/beta)[(beta - 1/gamma)^2 + L^2] ||x_bar - x_N||^2``
    with ``c = 3`` (deterministic) or ``c = 4`` (stochastic)."""
    w = potential_weight(problem.lipschitz, beta, gamma, variant)
    d = state.x_bar - state.xs[-1]
    return augmented_lagrangian(problem, state, beta) + w * float(np.sum(d * d))


def solve_block(block, kappa, linear):
    """Global minimizer of ``kappa/2 ||x||^2 + <linear, x> + r(x)`` over the
    block's manifold and convex set."""
    m, X, r = block.manifold, block.constraint, block.regularizer
    if isinstance(m, Sphere):
        if X.kind == "nonneg":
            if not r.is_zero:
                if not (r.q == 1.0 and r.cap is None):
                    raise UnsupportedBlockError("sphere blocks support only l1 regularizers")
                # |x| = x on the nonnegative orthant, so l1 adds a constant shift
                linear = linear + r.weight
            return linear_min_on_nonneg_sphere(linear)
        if X.kind == "whole" and r.is_zero:
            nrm = np.linalg.norm(linear)
            if nrm == 0.0:
                out = np.zeros(m.shape)
                out[0] = 1.0
                return out
            return -linear / nrm
    elif isinstance(m, Stiefel):
        if X.kind == "whole" and r.is_zero:
            return nearest_orthogonal(-linear)
    elif isinstance(m, Euclidean):
        if not kappa > 0:
            raise UnsupportedBlockError("Euclidean block subproblem needs positive curvature")
        if X.kind == "box" and not r.is_convex:
            raise UnsupportedBlockError("box-constrained blocks need a convex regularizer")
        # Clipping the unconstrained scalar minimizer is exact: for convex
        # terms by monotonicity, and for x >= 0 with an l_q term because the
        # sign of the global minimizer is the sign of -linear.
        return X.project(r.minimize_quadratic(kappa, linear))
    raise UnsupportedBlockError(
        f"no kernel for {m!r} with {X.kind} set and {r.kind} regularizer")


def _iso_scale(block, variant):
    a = block.gram_scale
    if a is None:
        raise UnsupportedBlockError(
            f"block {block.name!r}: coupling Gram matrix A^T A must be a multiple of I "
            f"for the {variant.value} variant; use the jacobi variant")
    return a


def _block_rng(seed, k, i):
    return np.random.default_rng([seed, k, i])


def _grad_block(problem, cfg, i, xs, k):
    if cfg.variant.stochastic:
        return problem.oracle.stochastic_partial(i, xs, cfg.batch, _block_rng(cfg.seed, k, i))
    return problem.oracle.partial(i, xs)


def _step1_gauss_seidel(problem, cfg, state, xs, res, info):
    N = problem.n_blocks
    v = cfg.variant
    for i in range(N - 1):
        blk = problem.blocks[i]
        a = _iso_scale(blk, v)
        cf = 0.0
        if v is Variant.EXACT:
            cf = problem.oracle.block_curvature(i)
            if cf is None:
                raise UnsupportedBlockError(
                    f"block {i}: exact variant needs the block curvature of f; "
                    "use the linearized variant")
        sigma = cfg.sigma_for(i)
        kappa = cf + cfg.beta * a + sigma
        g = _grad_block(problem, cfg, i, xs, state.k)
        g = g + blk.apply_t(cfg.beta * res - state.lam)
        linear = g - kappa * xs[i]
        new = solve_block(blk, kappa, linear)
        res += blk.apply(new) - blk.apply(xs[i])
        xs[i] = new
        info.models.append((kappa, linear))


def _step1_jacobi(problem, cfg, state, xs, res, info):
    N = problem.n_blocks
    snap = list(state.xs)
    grads = problem.oracle.gradient(snap)

    def one(i):
        blk = problem.blocks[i]
        sigma = cfg.sigma_for(i)
        g = grads[i] + blk.apply_t(cfg.beta * res - state.lam)
        linear = g - sigma * snap[i]
        return solve_block(blk, sigma, linear), (sigma, linear)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            outs = list(ex.map(one, range(N - 1)))
    else:
        outs = [one(i) for i in range(N - 1)]
    for i, (new, model) in enumerate(outs):
        blk = problem.blocks[i]
        res += blk.apply(new) - blk.apply(xs[i])
        xs[i] = new
        info.models.append(model)


def _step1_linesearch(problem, cfg, state, xs, res, info):
    N = problem.n_blocks
    beta = cfg.beta
    for i in range(N - 1):
        blk = problem.blocks[i]
        m = blk.manifold
        if not m.compact or blk.constraint.kind != "whole" or not blk.regularizer.is_zero:
            raise UnsupportedBlockError(
                "line-search variant needs compact manifold blocks without "
                "regularizers or convex sets")
        egrad = problem.oracle.partial(i, xs) + blk.apply_t(beta * res - state.lam)
        g = m.proj(xs[i], egrad)
        gn2 = float(np.sum(g * g))
        base = _lagrangian(problem, xs, state.lam, beta, res)
        # decreases below this are lost to rounding in the Lagrangian values
        resolution = ROUNDOFF_FACTOR * np.finfo(float).eps * max(1.0, abs(base))
        t = cfg.ls_s
        x_old = xs[i]
        info.grad_norms.append(math.sqrt(gn2))
        if gn2 == 0.0:
            continue
        for _ in range(MAX_SHRINKS + 1):
            cand = m.retract(x_old, -g, t)
            trial_res = res + blk.apply(cand) - blk.apply(x_old)
            xs[i] = cand
            val = _lagrangian(problem, xs, state.lam, beta, trial_res)
            if val <= base - 0.5 * cfg.ls_sigma * t * t * gn2:
                break
            if 0.5 * cfg.ls_sigma * t * t * gn2 <= resolution:
                # the test cannot be decided in floating point: keep x_i
                xs[i] = x_old
                trial_res = None
                break
            t *= cfg.ls_alpha
        else:
            xs[i] = x_old
            raise LineSearchError(
                f"block {i}: no acceptable step after {MAX_SHRINKS} shrinks; "
                "check the line-search constants")
        if trial_res is None:
            info.null_steps += 1
            continue
        res[:] = trial_res
        info.steps.append(t)


def sweep(problem, state, cfg):
    """One full iteration. Returns ``(new_state, StepInfo)``."""
    xs = [x.copy() for x in state.xs]
    res = problem.residual(xs)
    info = StepInfo()
    v = cfg.variant
    if v is Variant.JACOBI:
        _step1_jacobi(problem, cfg, state, xs, res, info)
    elif v is Variant.LINESEARCH:
        _step1_linesearch(problem, cfg, state, xs, res, info)
    else:
        _step1_gauss_seidel(problem, cfg, state, xs, res, info)
    N = problem.n_blocks
    if v.stochastic:
        gN = problem.oracle.stochastic_partial(N - 1, xs, cfg.batch,
                                               _block_rng(cfg.seed, state.k, N - 1))
    else:
        gN = problem.oracle.partial(N - 1, xs)
    x_old = xs[-1]
    xs[-1] = x_old - cfg.gamma * (gN - state.lam.reshape(x_old.shape)
                                  + cfg.beta * res.reshape(x_old.shape))
    res = problem.residual(xs)
    lam = state.lam - cfg.beta * res
    return IterateState(xs, lam, x_old.copy(), state.k + 1), info


def step(problem, state, cfg):
    """One full iteration (Steps 1-3); returns the new state."""
    return sweep(problem, state, cfg)[0]


def theta(prev2, prev, cur):
    """``sum_i ||x_i^k - x_i^{k+1}||^2 + ||x_i^{k-1} - x_i^k||^2``."""
    total = 0.0
    for a, b, c in zip(prev2.xs, prev.xs, cur.xs):
        total += float(np.sum((b - c) ** 2) + np.sum((a - b) ** 2))
    return total


def _rebuild_models(problem, cfg, prev, cur):
    """Deterministic Step-1 models of the sweep ``prev -> cur``."""
    v = cfg.variant
    if v.stochastic:
        raise ValueError("stochastic models depend on the sampled batch; pass StepInfo")
    N = problem.n_blocks
    models = []
    if v is Variant.JACOBI:
        res = problem.residual(prev.xs)
        grads = problem.oracle.gradient(prev.xs)
        for i in range(N - 1):
            blk = problem.blocks[i]
            s = cfg.sigma_for(i)
            g = grads[i] + blk.apply_t(cfg.beta * res - prev.lam)
            models.append((s, g - s * prev.xs[i]))
        return models
    xs = [x.copy() for x in prev.xs]
    res = problem.residual(xs)
    for i in range(N - 1):
        blk = problem.blocks[i]
        a = _iso_scale(blk, v)
        cf = problem.oracle.block_curvature(i) if v is Variant.EXACT else 0.0
        kappa = cf + cfg.beta * a + cfg.sigma_for(i)
        g = problem.oracle.partial(i, xs) + blk.apply_t(cfg.beta * res - prev.lam)
        models.append((kappa, g - kappa * xs[i]))
        res += blk.apply(cur.xs[i]) - blk.apply(xs[i])
        xs[i] = cur.xs[i]
    return models


def measure_stationarity(problem, state, history, cfg, info=None):
    """Residuals of ``state`` (the iterate after a sweep).

    ``history`` holds the two predecessors ``(x^{k-1}, x^k)``. The block
    residual is ``||Proj_T(d_i)||`` with ``d_i`` the drift between the true
    partial gradient of the Lagrangian and the gradient of the Step-1 model
    at the new point; by optimality of the subproblem it bounds the distance
    to the first-order conditions. For the line-search variant it is the
    Riemannian partial gradient ``||Proj_T(grad_i f - A_i^T lam)||`` itself.
    """
    if len(history) < 2:
        raise ValueError("measure_stationarity needs two predecessor states")
    prev2, prev = history[-2], history[-1]
    xs, lam = state.xs, state.lam
    grads = problem.oracle.gradient(xs)
    dual = float(np.linalg.norm(np.ravel(grads[-1]) - lam))
    primal = float(np.linalg.norm(problem.residual(xs)))
    N = problem.n_blocks
    blocks = []
    if cfg.variant is Variant.LINESEARCH:
        for i in range(N - 1):
            blk = problem.blocks[i]
            d = grads[i] - blk.apply_t(lam)
            blocks.append(float(np.linalg.norm(blk.manifold.proj(xs[i], d))))
    else:
        models = info.models if info is not None and info.models else \
            _rebuild_models(problem, cfg, prev, state)
        for i in range(N - 1):
            blk = problem.blocks[i]
            kappa, linear = models[i]
            d = grads[i] - blk.apply_t(lam) - (kappa * xs[i] + linear)
            blocks.append(float(np.linalg.norm(blk.manifold.proj(xs[i], d))))
    th = theta(prev2, prev, state)
    psi = potential_psi(problem, state, cfg.beta, cfg.gamma, cfg.variant)
    return StationarityReport(dual, primal, tuple(blocks), th, psi)


def solve(problem, cfg, state=None, rng=None, timing=False, callback=None):
    """Run up to ``cfg.max_iter`` sweeps, stopping once the dual, primal and
    block residuals are all at most ``cfg.eps``.

    The reported iterate is ``x^{k*+1}`` with ``k*`` minimizing ``theta_k``
    over ``k >= 2`` (over all recorded ``k`` when fewer are available).
    """
    if state is None:
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        state = initial_state(problem, rng)
    bad = config_violations(problem, cfg)
    if bad and cfg.strict:
        raise InfeasibleParametersError("; ".join(bad))
    hist = [state, state]
    trace, states, reports, steps = [], [], [], []
    grad_bound = 0.0
    converged = False
    t0 = time.perf_counter()
    for k in range(cfg.max_iter):
        new, info = sweep(problem, hist[-1], cfg)
        rep = measure_stationarity(problem, new, hist, cfg, info)
        lag = augmented_lagrangian(problem, new, cfg.beta)
        wall = time.perf_counter() - t0 if timing else 0.0
        trace.append(TraceRow(k, lag, rep.psi, rep.theta, rep.primal, rep.dual,
                              rep.max_block, wall))
        states.append(new)
        reports.append(rep)
        steps.extend(info.steps)
        if info.grad_norms:
            grad_bound = max(grad_bound, max(info.grad_norms))
        hist = [hist[-1], new]
        if callback is not None:
            callback(k, new, rep)
        if rep.worst <= cfg.eps:
            converged = True
            break
    cands = [r.k for r in trace if r.k >= 2] or [r.k for r in trace]
    k_star = min(cands, key=lambda j: (trace[j].theta, j))
    budget = None
    lb = problem.lower_bound
    if lb is not None:
        try:
            budget = complexity_budget(
                problem.lipschitz, cfg.variant, cfg.beta, cfg.gamma, _sigmas(problem, cfg),
                cfg.eps, trace[0].psi, problem.f_lower, sum(problem.r_lower),
                n_blocks=problem.n_blocks, max_coupling_norm=problem.max_coupling_norm,
                sigma2=problem.oracle.sigma2, L_hat=_L_hat(problem, cfg),
                ls_alpha=cfg.ls_alpha, L1=cfg.L1, L2=cfg.L2,
                C=grad_bound if cfg.variant is Variant.LINESEARCH else None)
        except (InfeasibleParametersError, ValueError) as exc:
            log.info("complexity budget unavailable: %s", exc)
    return SolveResult(
        trace=trace,
        k_star=k_star,
        best_state=states[k_star],
        last_state=states[-1],
        report=reports[k_star],
        last_report=reports[-1],
        converged=converged,
        config=cfg,
        budget=budget,
        steps=steps,
        grad_bound=grad_bound,
    )


def tau_for(problem, cfg):
    """Per-step guaranteed decrease rate of the potential."""
    return descent_tau(problem.lipschitz, cfg.beta, cfg.gamma, _sigmas(problem, cfg),
                       cfg.variant, L_hat=_L_hat(problem, cfg), L1=cfg.L1)


def with_overrides(cfg, **kw):
    return replace(cfg, **kw)
