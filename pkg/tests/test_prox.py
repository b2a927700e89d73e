import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manifold_admm.prox import (
    LqProxSpec,
    linear_min_on_nonneg_sphere,
    lq_objective,
    lq_prox,
    nearest_orthogonal,
    nonneg_project,
    real_poly_roots,
    scalar_lq_prox,
    soft_threshold,
)


def grid_min_quarter_circle(b, step=1e-5):
    th = np.linspace(0.0, np.pi / 2, int(np.pi / 2 / step) + 1)
    return float(np.min(b[0] * np.cos(th) + b[1] * np.sin(th)))


def bisection_roots(coeffs, lo=-20.0, hi=20.0, n=400001):
    """Real roots by sign changes on a fine grid refined with bisection."""
    p = np.poly1d(coeffs)
    xs = np.linspace(lo, hi, n)
    vals = p(xs)
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        a, b = xs[i], xs[i + 1]
        for _ in range(100):
            mid = 0.5 * (a + b)
            if np.sign(p(a)) * np.sign(p(mid)) <= 0:
                b = mid
            else:
                a = mid
        roots.append(0.5 * (a + b))
    return np.unique(np.round(roots, 9))


def line_search_min(a, b, c, q, cap=None, lo=-50.0, hi=50.0, step=1e-5):
    xs = np.arange(lo, hi + step, step)
    return float(np.min(lq_objective(xs, a, b, c, q, cap)))


# ---- linear minimization over the nonnegative sphere

def test_linear_min_examples():
    np.testing.assert_array_equal(linear_min_on_nonneg_sphere([-1.0, 2.0]), [1.0, 0.0])
    assert abs(grid_min_quarter_circle(np.array([-1.0, 2.0])) - (-1.0)) < 1e-9
    np.testing.assert_array_equal(linear_min_on_nonneg_sphere([2.0, 1.0]), [0.0, 1.0])
    assert abs(grid_min_quarter_circle(np.array([2.0, 1.0])) - 1.0) < 1e-9
    np.testing.assert_array_equal(linear_min_on_nonneg_sphere([0.0, 0.0]), [1.0, 0.0])


def test_linear_min_errors():
    with pytest.raises(ValueError):
        linear_min_on_nonneg_sphere([])
    with pytest.raises(ValueError):
        linear_min_on_nonneg_sphere([np.nan, 1.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=8))
def test_linear_min_feasible_and_beats_vertices(b):
    b = np.array(b)
    x = linear_min_on_nonneg_sphere(b)
    assert np.all(x >= 0) and abs(np.linalg.norm(x) - 1) < 1e-12
    # no vertex and no normalized negative part does better
    assert b @ x <= b.min() + 1e-9


# ---- nearest orthogonal matrix

def random_orthogonal(rng, n, m):
    q, r = np.linalg.qr(rng.standard_normal((n, m)))
    return q * np.sign(np.diag(r))


def test_nearest_orthogonal_examples():
    th = 0.7
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    np.testing.assert_allclose(nearest_orthogonal(R), R, atol=1e-14)
    B = np.diag([3.0, 0.5])
    np.testing.assert_allclose(nearest_orthogonal(B), np.eye(2), atol=1e-14)
    rng = np.random.default_rng(0)
    best = np.sum(2 * B * np.eye(2))
    for _ in range(10_000):
        U = random_orthogonal(rng, 2, 2)
        assert np.sum(2 * B * U) <= best + 1e-12
    np.testing.assert_array_equal(nearest_orthogonal(np.zeros((2, 2))), np.eye(2))


def test_nearest_orthogonal_shape_error():
    with pytest.raises(ValueError):
        nearest_orthogonal(np.ones((2, 3)))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 7), m=st.integers(1, 7))
def test_nearest_orthogonal_orthonormal_and_optimal_against_samples(seed, n, m):
    if m > n:
        n, m = m, n
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, m))
    if rng.random() < 0.2:
        B[:, 0] = 0.0  # rank deficient
    U = nearest_orthogonal(B)
    np.testing.assert_allclose(U.T @ U, np.eye(m), atol=1e-10)
    val = np.sum(B * U)
    for _ in range(50):
        assert np.sum(B * random_orthogonal(rng, n, m)) <= val + 1e-9


# ---- polynomial roots

def test_real_poly_roots_examples():
    np.testing.assert_allclose(sorted(real_poly_roots([1.0, 0.0, -1.0])), [-1.0, 1.0])
    assert len(real_poly_roots([1.0, 0.0, 0.0, 0.0, 1.0])) == 0
    coeffs = [1.0, 0.0, -3.0, 0.5]
    got = np.sort(real_poly_roots(coeffs))
    np.testing.assert_allclose(got, bisection_roots(coeffs), atol=1e-8)
    np.testing.assert_allclose(got, [-1.81004, 0.168254, 1.641784], atol=1e-5)


def test_real_poly_roots_errors():
    with pytest.raises(ValueError):
        real_poly_roots([0.0, 0.0])
    with pytest.raises(ValueError):
        real_poly_roots([3.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=5))
def test_real_poly_roots_residual(coeffs):
    if abs(coeffs[0]) < 1e-3:
        coeffs[0] = 1.0
    for r in real_poly_roots(coeffs):
        assert abs(np.polyval(coeffs, r)) <= 1e-8 * (1 + max(abs(c) for c in coeffs)) * \
            max(1.0, abs(r)) ** (len(coeffs) - 1)


# ---- scalar l_q prox

def test_lq_prox_examples():
    assert scalar_lq_prox(LqProxSpec(1.0, 0.0, 1.0, 0.5)) == 0.0
    x = scalar_lq_prox(LqProxSpec(0.5, -2.0, 1.0, 1.0))
    assert abs(x - 1.0) < 1e-12
    assert abs(line_search_min(0.5, -2.0, 1.0, 1.0, lo=-10, hi=10) - (-0.5)) < 1e-9


def test_lq_prox_half_power_example_against_oracle():
    # stationarity on x > 0 with z = sqrt(x): z^3 - 3 z + 1/2 = 0; the largest
    # root gives the minimizer
    spec = LqProxSpec(0.5, -3.0, 1.0, 0.5)
    x = scalar_lq_prox(spec)
    z = bisection_roots([1.0, 0.0, -3.0, 0.5]).max()
    assert abs(x - z * z) < 1e-8
    assert abs(x - 2.695453) < 1e-5
    oracle = line_search_min(0.5, -3.0, 1.0, 0.5, lo=-10, hi=10)
    assert abs(spec.objective(x) - oracle) < 1e-6
    assert abs(oracle - (-2.8118)) < 1e-3


def test_lq_prox_no_penalty_is_unconstrained_minimizer():
    for a, b in [(1.0, 3.0), (0.25, -7.0), (2.0, 0.0)]:
        for q in (0.5, 2 / 3, 1.0):
            assert scalar_lq_prox(LqProxSpec(a, b, 0.0, q)) == -b / (2 * a)


def test_lq_spec_validation():
    with pytest.raises(ValueError):
        LqProxSpec(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        LqProxSpec(1.0, 1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        LqProxSpec(1.0, 1.0, 1.0, 0.3)


@pytest.mark.parametrize("q", [0.5, 2 / 3, 1.0])
@pytest.mark.parametrize("cap", [None, 0.7])
def test_lq_prox_matches_line_search(q, cap):
    rng = np.random.default_rng(7)
    for _ in range(15):
        a, b, c = rng.uniform(0.1, 3), rng.uniform(-8, 8), rng.uniform(0, 3)
        x = lq_prox(a, b, c, q, cap)
        oracle = line_search_min(a, b, c, q, cap, lo=-45, hi=45, step=2e-5)
        assert lq_objective(x, a, b, c, q, cap) <= oracle + 1e-6


def test_lq_prox_vectorized_matches_scalar():
    rng = np.random.default_rng(8)
    b = rng.uniform(-5, 5, (4, 5))
    for q in (0.5, 2 / 3, 1.0):
        vec = lq_prox(1.3, b, 0.8, q)
        loop = np.array([scalar_lq_prox(LqProxSpec(1.3, v, 0.8, q)) for v in b.ravel()])
        np.testing.assert_allclose(vec.ravel(), loop, atol=0, rtol=0)


def test_cap_irrelevant_when_large():
    # with a huge cap the capped penalty equals |x|^q except on a tiny window
    rng = np.random.default_rng(9)
    for q in (0.5, 2 / 3):
        for _ in range(50):
            a, b, c = rng.uniform(0.1, 3), rng.uniform(-8, 8), rng.uniform(0, 3)
            x0 = lq_prox(a, b, c, q)
            x1 = lq_prox(a, b, c, q, cap=1e12)
            if abs(x0) > 1e-12 ** (1 / (1 - q)) or x0 == 0:
                assert x0 == pytest.approx(x1, abs=1e-12)


def test_soft_threshold_and_nonneg():
    np.testing.assert_array_equal(soft_threshold(np.array([-3.0, 0.5, 2.0]), 1.0),
                                  [-2.0, 0.0, 1.0])
    np.testing.assert_array_equal(nonneg_project(np.array([[1.0, -2.0], [0.0, 3.0]])),
                                  [[1.0, 0.0], [0.0, 3.0]])
    B = np.abs(np.random.default_rng(0).standard_normal((3, 3)))
    np.testing.assert_array_equal(nonneg_project(B), B)
    np.testing.assert_array_equal(nonneg_project(-B), np.zeros((3, 3)))


@settings(max_examples=300, deadline=None)
@given(a=st.floats(0.05, 5), b=st.floats(-20, 20), c=st.floats(0, 5),
       q=st.sampled_from([0.5, 2 / 3, 1.0]))
def test_lq_prox_beats_sampled_points(a, b, c, q):
    x = lq_prox(a, b, c, q)
    fx = lq_objective(x, a, b, c, q)
    probe = np.concatenate([np.linspace(-30, 30, 2001), [0.0, -b / (2 * a)]])
    assert fx <= np.min(lq_objective(probe, a, b, c, q)) + 1e-9
