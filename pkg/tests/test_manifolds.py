import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manifold_admm.manifolds import (
    Euclidean,
    InfeasiblePointError,
    Sphere,
    Stiefel,
    retract,
    retraction_constants,
    riemannian_grad,
    tangent_project,
)

MANIFOLDS = [Euclidean(4), Euclidean(3, 2), Sphere(1), Sphere(2), Sphere(7), Stiefel(3, 1),
             Stiefel(5, 2), Stiefel(4, 4)]


def test_tangent_project_euclidean_identity():
    v = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(tangent_project(Euclidean(3), np.zeros(3), v), v)


def test_tangent_project_sphere_by_hand():
    x = np.array([1.0, 0.0])
    out = tangent_project(Sphere(2), x, np.array([3.0, 4.0]))
    np.testing.assert_allclose(out, [0.0, 4.0])
    assert abs(out @ x) < 1e-15


def test_tangent_project_square_stiefel_kills_symmetric():
    out = tangent_project(Stiefel(2, 2), np.eye(2), np.eye(2))
    np.testing.assert_allclose(out, np.zeros((2, 2)), atol=1e-15)


def test_riemannian_grad_matches_projection():
    rng = np.random.default_rng(0)
    for m in MANIFOLDS:
        x = m.random_point(rng)
        g = rng.standard_normal(m.shape)
        np.testing.assert_array_equal(riemannian_grad(m, x, g), tangent_project(m, x, g))


def test_projection_errors():
    with pytest.raises(ValueError):
        tangent_project(Sphere(3), np.array([1.0, 0, 0]), np.zeros(2))
    with pytest.raises(InfeasiblePointError):
        tangent_project(Sphere(2), np.array([2.0, 0.0]), np.zeros(2))
    with pytest.raises(InfeasiblePointError):
        tangent_project(Stiefel(3, 2), np.ones((3, 2)), np.zeros((3, 2)))


def test_constructor_validation():
    with pytest.raises(ValueError):
        Stiefel(2, 3)
    with pytest.raises(ValueError):
        Sphere(0)
    with pytest.raises(ValueError):
        Euclidean(0)


@pytest.mark.parametrize("m", MANIFOLDS, ids=repr)
def test_projection_idempotent_nonexpansive_tangent(m):
    rng = np.random.default_rng(1)
    for _ in range(100):
        x = m.random_point(rng)
        v = rng.standard_normal(m.shape) * rng.uniform(0.1, 10)
        p = tangent_project(m, x, v)
        np.testing.assert_allclose(tangent_project(m, x, p), p, atol=1e-12)
        assert np.linalg.norm(p) <= np.linalg.norm(v) + 1e-12
        assert m.is_tangent(x, p)


def test_tangent_invariants_explicit():
    rng = np.random.default_rng(2)
    s = Sphere(5)
    x = s.random_point(rng)
    p = tangent_project(s, x, rng.standard_normal(5))
    assert abs(x @ p) <= 1e-8 * np.linalg.norm(p)
    st_ = Stiefel(6, 3)
    X = st_.random_point(rng)
    V = tangent_project(st_, X, rng.standard_normal((6, 3)))
    assert np.linalg.norm(X.T @ V + V.T @ X) <= 1e-8 * np.linalg.norm(V)


def test_retract_examples():
    x = np.array([1.0, 0.0])
    np.testing.assert_allclose(retract(Sphere(2), x, np.array([0.0, 1.0]), 1.0),
                               [1 / np.sqrt(2), 1 / np.sqrt(2)])
    rng = np.random.default_rng(3)
    for m in MANIFOLDS:
        x = m.random_point(rng)
        v = m.random_tangent(rng, x)
        np.testing.assert_array_equal(retract(m, x, v, 0.0), x)
    st_ = Stiefel(5, 3)
    X = st_.random_point(rng)
    for t in (0.3, 1.0, 7.0):
        np.testing.assert_allclose(retract(st_, X, np.zeros((5, 3)), t), X, atol=1e-12)


def test_retract_errors():
    with pytest.raises(ValueError):
        retract(Sphere(2), np.array([1.0, 0.0]), np.array([0.0, 1.0]), -1.0)
    with pytest.raises(ValueError):
        Sphere(2).retract(np.array([1.0, 0.0]), np.array([-1.0, 0.0]), 1.0)


@pytest.mark.parametrize("m", MANIFOLDS, ids=repr)
def test_retract_feasible_and_first_order(m):
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = m.random_point(rng)
        v = m.random_tangent(rng, x)
        assert m.violation(retract(m, x, v, rng.uniform(0, 5))) <= 1e-10
        e4 = np.linalg.norm((retract(m, x, v, 1e-4) - x) / 1e-4 - v)
        e5 = np.linalg.norm((retract(m, x, v, 1e-5) - x) / 1e-5 - v)
        # first-order agreement: the error shrinks roughly linearly in t
        assert e5 <= 0.2 * e4 + 1e-9


@pytest.mark.parametrize("m", [Sphere(2), Sphere(6), Stiefel(5, 2), Stiefel(4, 4)], ids=repr)
def test_retraction_constants_at_most_two(m):
    L1, L2 = retraction_constants(m, np.random.default_rng(5), trials=1000)
    assert 0 < L1 <= 2.0 and 0 < L2 <= 2.0


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 6), m=st.integers(1, 6), seed=st.integers(0, 2**32 - 1),
       t=st.floats(0, 20))
def test_stiefel_retraction_stays_feasible(n, m, seed, t):
    if m > n:
        n, m = m, n
    man = Stiefel(n, m)
    rng = np.random.default_rng(seed)
    x = man.random_point(rng)
    y = retract(man, x, man.random_tangent(rng, x), t)
    assert man.violation(y) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 8))
def test_sphere_random_points_nonneg(seed, dim):
    rng = np.random.default_rng(seed)
    x = Sphere(dim).random_point(rng, nonneg=True)
    assert np.all(x >= 0) and abs(np.linalg.norm(x) - 1) < 1e-12
