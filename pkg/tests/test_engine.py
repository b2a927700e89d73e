import math

import numpy as np
import pytest

from manifold_admm.engine import (
    IterateState,
    UnsupportedBlockError,
    augmented_lagrangian,
    initial_state,
    make_config,
    measure_stationarity,
    potential_psi,
    solve,
    solve_block,
    sweep,
    tau_for,
    theta,
)
from manifold_admm.manifolds import Euclidean, Sphere, Stiefel
from manifold_admm.params import InfeasibleParametersError, potential_weight
from manifold_admm.problem import NONNEG, Block, FunctionOracle, MultiBlockProblem, l1
from manifold_admm.synthetic import build_synthetic_problem


def tiny_problem():
    """``f = 1/2 ||y||^2`` on ``x in S^1``, ``y in R^2``, ``x + y = b``."""
    oracle = FunctionOracle(
        value=lambda xs: 0.5 * float(xs[1] @ xs[1]),
        gradient=lambda xs: [np.zeros(2), xs[1].copy()],
        lipschitz=1.0,
        curvature={0: 0.0},
    )
    blocks = [Block(Sphere(2), name="x"), Block(Euclidean(2), name="y")]
    return MultiBlockProblem(blocks, oracle, rhs=np.array([1.0, 2.0]), f_lower=0.0,
                             r_lower=[0.0])


def run(problem, cfg, iters, seed=0):
    states = [initial_state(problem, np.random.default_rng(seed))]
    infos = [None]
    for _ in range(iters):
        s, info = sweep(problem, states[-1], cfg)
        states.append(s)
        infos.append(info)
    return states, infos


def test_augmented_lagrangian_hand_example():
    p = tiny_problem()
    st = IterateState([np.array([1.0, 0.0]), np.array([0.0, 1.0])], np.array([1.0, -1.0]),
                      np.array([0.0, 1.0]))
    # residual (0, -1): f = 1/2, <res, lam> = 1, beta/2 ||res||^2 = 1
    assert augmented_lagrangian(p, st, 2.0) == pytest.approx(0.5 - 1.0 + 1.0)


def test_potential_adds_weighted_last_block_drift():
    p = tiny_problem()
    st = IterateState([np.array([1.0, 0.0]), np.array([0.0, 1.0])], np.zeros(2),
                      np.array([0.0, 3.0]))
    w = 3.0 / 3.0 * ((3.0 - 1.0 / 0.3) ** 2 + 1.0)
    assert potential_weight(1.0, 3.0, 0.3, "exact") == pytest.approx(w)
    expect = augmented_lagrangian(p, st, 3.0) + w * 4.0
    assert potential_psi(p, st, 3.0, 0.3, "exact") == pytest.approx(expect)
    w4 = 4.0 / 3.0 * ((3.0 - 1.0 / 0.3) ** 2 + 1.0)
    expect4 = augmented_lagrangian(p, st, 3.0) + w4 * 4.0
    assert potential_psi(p, st, 3.0, 0.3, "stochastic") == pytest.approx(expect4)


@pytest.mark.parametrize("variant", ["exact", "linearized", "jacobi"])
def test_multiplier_and_residual_identities(variant):
    p = build_synthetic_problem(3)
    cfg = make_config(p, variant)
    states, _ = run(p, cfg, 40)
    for prev, cur in zip(states, states[1:]):
        xs_mid = list(cur.xs[:-1]) + [prev.xs[-1]]
        g = p.oracle.partial(p.n_blocks - 1, xs_mid)
        lam = (cfg.beta - 1 / cfg.gamma) * (prev.xs[-1] - cur.xs[-1]) + g
        assert np.max(np.abs(lam - cur.lam)) <= 1e-10
        primal = np.linalg.norm(p.residual(cur.xs))
        assert abs(primal - np.linalg.norm(cur.lam - prev.lam) / cfg.beta) <= 1e-10


def test_fixed_point_is_preserved():
    p = tiny_problem()
    # with b on the ray through x, lam = y = b - x is normal to the circle at x
    p = MultiBlockProblem(p.blocks, p.oracle, rhs=np.array([3.0, 0.0]))
    x, y = np.array([1.0, 0.0]), np.array([2.0, 0.0])
    st = IterateState([x, y], y.copy(), y.copy())
    cfg = make_config(p, "exact")
    new = sweep(p, st, cfg)[0]
    assert np.allclose(new.xs[0], x, atol=1e-14)
    assert np.allclose(new.xs[1], y, atol=1e-14)
    assert np.allclose(new.lam, st.lam, atol=1e-14)
    rep = measure_stationarity(p, new, [st, st], cfg)
    assert rep.dual == pytest.approx(0.0, abs=1e-14)
    assert rep.primal == pytest.approx(0.0, abs=1e-14)
    assert rep.max_block == pytest.approx(0.0, abs=1e-14)
    assert rep.theta == 0.0


def test_theta_zero_for_identical_states():
    p = build_synthetic_problem(0)
    s = initial_state(p)
    assert theta(s, s, s) == 0.0


def test_theta_sums_two_consecutive_moves():
    a = IterateState([np.zeros(2), np.zeros(1)], np.zeros(1), np.zeros(1))
    b = IterateState([np.ones(2), np.zeros(1)], np.zeros(1), np.zeros(1))
    c = IterateState([np.ones(2), 3 * np.ones(1)], np.zeros(1), np.zeros(1))
    assert theta(a, b, c) == pytest.approx(2.0 + 9.0)


@pytest.mark.parametrize("variant", ["exact", "linearized"])
def test_potential_strictly_decreases(variant):
    p = build_synthetic_problem(1)
    cfg = make_config(p, variant)
    states, _ = run(p, cfg, 50)
    psi = [potential_psi(p, s, cfg.beta, cfg.gamma, variant) for s in states[1:]]
    assert all(b < a for a, b in zip(psi, psi[1:]))


def test_jacobi_potential_decreases():
    p = build_synthetic_problem(2)
    cfg = make_config(p, "jacobi")
    states, _ = run(p, cfg, 60)
    psi = [potential_psi(p, s, cfg.beta, cfg.gamma, "jacobi") for s in states[1:]]
    assert all(b <= a + 1e-9 for a, b in zip(psi, psi[1:]))


def test_jacobi_threads_match_serial():
    p = build_synthetic_problem(4, n_blocks=4)
    a = solve(p, make_config(p, "jacobi", max_iter=20, workers=1))
    b = solve(p, make_config(p, "jacobi", max_iter=20, workers=3))
    assert [r.psi for r in a.trace] == [r.psi for r in b.trace]


def test_infinite_eps_stops_after_one_sweep():
    p = build_synthetic_problem(0)
    r = solve(p, make_config(p, "exact", eps=math.inf))
    assert r.iterations == 1 and r.converged


def test_converges_to_tolerance():
    p = build_synthetic_problem(0)
    r = solve(p, make_config(p, "exact", eps=1e-3, max_iter=5000, output="last"))
    assert r.converged
    assert r.last_report.worst <= 1e-3
    assert r.budget is not None and r.iterations <= r.budget.iterations


def test_kstar_minimizes_theta_from_two():
    p = build_synthetic_problem(5)
    r = solve(p, make_config(p, "linearized", eps=1e-12, max_iter=30))
    thetas = [row.theta for row in r.trace]
    assert r.k_star >= 2
    assert thetas[r.k_star] == min(thetas[2:])
    assert r.state is r.best_state


@pytest.mark.parametrize("variant", ["exact", "linearized"])
def test_surrogate_bounded_by_theta(variant):
    p = build_synthetic_problem(6)
    cfg = make_config(p, variant)
    states, infos = run(p, cfg, 40)
    N = p.n_blocks
    k3 = (p.lipschitz + cfg.beta * math.sqrt(N) * p.max_coupling_norm**2 + cfg.sigma_h) ** 2
    for k in range(2, len(states)):
        rep = measure_stationarity(p, states[k], states[k - 2:k], cfg, infos[k])
        assert rep.max_block <= math.sqrt(k3 * rep.theta) + 1e-8


@pytest.mark.parametrize("variant", ["exact", "linearized"])
def test_surrogate_matches_drift_formula(variant):
    p = build_synthetic_problem(8, n_blocks=4)
    cfg = make_config(p, variant)
    states, _ = run(p, cfg, 6)
    prev, cur = states[-2], states[-1]
    rep = measure_stationarity(p, cur, states[-3:-1], cfg)
    N = p.n_blocks
    for i in range(N - 1):
        blk = p.blocks[i]
        mixed = list(cur.xs[: i + 1]) + list(prev.xs[i + 1:])
        d = p.oracle.partial(i, cur.xs) - p.oracle.partial(i, mixed)
        tail = sum(p.blocks[j].apply(prev.xs[j] - cur.xs[j]) for j in range(i + 1, N))
        d = d - cfg.beta * blk.apply_t(tail) - cfg.sigma_h * (cur.xs[i] - prev.xs[i])
        if variant == "linearized":
            # the linearized model drops f's block curvature
            d = d + p.oracle.block_curvature(i) * (cur.xs[i] - prev.xs[i])
        expect = np.linalg.norm(blk.manifold.proj(cur.xs[i], d))
        assert rep.blocks[i] == pytest.approx(expect, rel=1e-9, abs=1e-12)


def test_measure_needs_history():
    p = build_synthetic_problem(0)
    cfg = make_config(p, "exact")
    s = initial_state(p)
    with pytest.raises(ValueError):
        measure_stationarity(p, s, [s], cfg)


@pytest.mark.parametrize("manifold", ["sphere", "stiefel"])
def test_linesearch_sufficient_decrease(manifold):
    p = build_synthetic_problem(3, n_blocks=2, manifold=manifold, n_rows=8)
    cfg = make_config(p, "linesearch")
    s = initial_state(p, np.random.default_rng(1))
    steps = []
    for _ in range(100):
        new, info = sweep(p, s, cfg)
        mid = IterateState([new.xs[0], s.xs[1]], s.lam, s.x_bar)
        drop = augmented_lagrangian(p, s, cfg.beta) - augmented_lagrangian(p, mid, cfg.beta)
        if info.steps:
            t, g = info.steps[0], info.grad_norms[0]
            assert drop >= 0.5 * cfg.ls_sigma * t * t * g * g - 1e-12
        else:
            assert np.array_equal(new.xs[0], s.xs[0])
        steps.extend(info.steps)
        s = new
    assert min(steps) > 1e-3


def test_solve_block_kernels():
    lin = np.array([3.0, -4.0])
    assert np.allclose(solve_block(Block(Sphere(2)), 0.0, lin), [-0.6, 0.8])
    x = solve_block(Block(Sphere(2), NONNEG), 0.0, np.array([1.0, -1.0]))
    assert np.allclose(x, [0.0, 1.0])
    # l1 on the nonnegative orthant shifts the linear term by the weight
    x = solve_block(Block(Sphere(2), NONNEG, l1(2.0)), 0.0, np.array([-1.0, -3.0]))
    assert np.allclose(x, [0.0, 1.0])
    y = solve_block(Block(Euclidean(2)), 2.0, np.array([-4.0, 2.0]))
    assert np.allclose(y, [2.0, -1.0])
    q = solve_block(Block(Stiefel(3, 2)), 0.0, -np.eye(3, 2))
    assert np.allclose(q, np.eye(3, 2))


def test_unsupported_blocks():
    with pytest.raises(UnsupportedBlockError):
        solve_block(Block(Stiefel(3, 2), NONNEG), 0.0, np.ones((3, 2)))
    with pytest.raises(UnsupportedBlockError):
        solve_block(Block(Euclidean(2)), 0.0, np.ones(2))
    p = build_synthetic_problem(0)
    bare = FunctionOracle(p.oracle.value, p.oracle.gradient, p.lipschitz)
    q = MultiBlockProblem(p.blocks, bare, p.rhs)
    with pytest.raises(UnsupportedBlockError):
        sweep(q, initial_state(q), make_config(q, "exact"))
    # the linearized variant only needs gradients
    sweep(q, initial_state(q), make_config(q, "linearized"))


def test_non_isotropic_coupling_needs_jacobi():
    p = build_synthetic_problem(0)
    rng = np.random.default_rng(0)
    skew = Block(p.blocks[0].manifold, coupling=rng.standard_normal((p.n_rows, 4)))
    q = MultiBlockProblem((skew,) + p.blocks[1:], p.oracle, p.rhs)
    with pytest.raises(UnsupportedBlockError, match="jacobi"):
        sweep(q, initial_state(q), make_config(q, "linearized"))
    sweep(q, initial_state(q), make_config(q, "jacobi"))


def test_strict_rejects_infeasible_parameters():
    p = build_synthetic_problem(0)
    with pytest.raises(InfeasibleParametersError):
        make_config(p, "exact", beta=0.1, strict=True)
    with pytest.warns(UserWarning):
        make_config(p, "exact", beta=0.1)


def test_runs_are_deterministic():
    p = build_synthetic_problem(9, sigma2=0.1)
    cfg = make_config(p, "stochastic", batch=8, seed=4, max_iter=30)
    a, b = solve(p, cfg), solve(p, cfg)
    assert [r.as_tuple() for r in a.trace] == [r.as_tuple() for r in b.trace]


def test_tau_positive_for_defaults():
    p = build_synthetic_problem(0)
    for v in ("exact", "linearized", "stochastic", "linesearch", "jacobi"):
        q = build_synthetic_problem(0, sigma2=0.1) if v == "stochastic" else p
        assert tau_for(q, make_config(q, v)) > 0
