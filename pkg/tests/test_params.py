import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manifold_admm.params import (
    InfeasibleParametersError,
    Variant,
    beta_lower_bound,
    complexity_budget,
    default_parameters,
    descent_tau,
    gamma_interval,
    last_block_coefficient,
    parameter_violations,
    potential_weight,
    sigma_threshold,
)


def test_exact_defaults_for_unit_lipschitz():
    dp = default_parameters(1.0, "exact")
    assert dp.beta == 3.0
    # 13 beta^2 - 12 beta L - 72 L^2 = 117 - 36 - 72 = 9
    delta = 13 * 9 - 12 * 3 - 72
    assert delta == 9
    lo, hi = 12 / (13 * 3 + math.sqrt(delta)), 12 / (13 * 3 - math.sqrt(delta))
    assert (lo, hi) == pytest.approx((2 / 7, 1 / 3))
    assert dp.gamma_interval == pytest.approx((lo, hi))
    assert dp.gamma == pytest.approx(13 / 42)
    assert dp.sigma_h == pytest.approx(4.0)


def test_exact_last_block_polynomial_negative():
    L, dp = 1.0, default_parameters(1.0, "exact")
    b, z = dp.beta, 1 / dp.gamma
    p = (6 / b) * z * z - 13 * z + ((L + b) / 2 + 6 * b + 3 * L * L / b)
    assert p < 0
    assert last_block_coefficient(L, b, dp.gamma, "exact") == pytest.approx(p)


def test_stochastic_beta_above_bound():
    dp = default_parameters(1.0, "stochastic")
    bound = (8 * 2 + 8 * math.sqrt(4 + 34)) / 17
    assert beta_lower_bound(1.0, "stochastic") == pytest.approx(bound)
    assert dp.beta > bound
    assert dp.sigma_h == pytest.approx(2 * (8 / dp.beta + 1 + 1))
    lo, hi = dp.gamma_interval
    assert lo < dp.gamma < hi


def test_linearized_and_jacobi_sigma():
    dp = default_parameters(2.0, "linearized")
    assert dp.sigma_h == pytest.approx(2 * (6 * 4 / 6 + 2))
    dj = default_parameters(2.0, "jacobi", n_blocks=3, max_coupling_norm=1.5)
    L_hat = 2.0 + 6.0 * 3 * 1.5**2
    assert dj.sigma_h == pytest.approx(2 * (6 * 4 / 6 + L_hat))
    with pytest.raises(ValueError):
        default_parameters(2.0, "jacobi")


def test_errors():
    with pytest.raises(ValueError):
        default_parameters(0.0, "exact")
    with pytest.raises(ValueError):
        default_parameters(-1.0, "exact")
    with pytest.raises(InfeasibleParametersError):
        gamma_interval(1.0, 1.0, "exact")
    with pytest.raises(ValueError):
        Variant.parse("newton")
    assert Variant.parse("Jacobi-Linearized") is Variant.JACOBI


@settings(max_examples=200, deadline=None)
@given(L=st.floats(1e-3, 1e3), v=st.sampled_from(list(Variant)))
def test_defaults_always_feasible_with_positive_tau(L, v):
    kw = {"n_blocks": 3, "max_coupling_norm": 1.0} if v is Variant.JACOBI else {}
    dp = default_parameters(L, v, **kw)
    L_hat = L + dp.beta * 3 if v is Variant.JACOBI else None
    assert parameter_violations(L, v, dp.beta, dp.gamma, dp.sigma_h, L_hat=L_hat) == []
    assert descent_tau(L, dp.beta, dp.gamma, dp.sigma_h, v, L_hat=L_hat) > 0
    assert dp.sigma_h > sigma_threshold(L, dp.beta, v, L_hat)


def test_violations_reported():
    assert parameter_violations(1.0, "exact", 1.0, 0.3, 4.0)
    assert parameter_violations(1.0, "exact", 3.0, 0.5, 4.0)
    assert parameter_violations(1.0, "exact", 3.0, 0.31, 1.0)
    assert parameter_violations(1.0, "exact", 3.0, 0.31, 4.0) == []


def test_potential_weight():
    assert potential_weight(1.0, 3.0, 0.25, "exact") == pytest.approx(3 / 3 * (1 + 1))
    assert potential_weight(1.0, 3.0, 0.25, "stochastic") == pytest.approx(4 / 3 * (1 + 1))


def budget(eps, variant="exact", **kw):
    dp = default_parameters(1.0, variant)
    return complexity_budget(1.0, variant, dp.beta, dp.gamma, dp.sigma_h, eps, 10.0, -1.0, 0.0,
                             n_blocks=3, max_coupling_norm=1.0, **kw)


def test_budget_scaling():
    b1, b2 = budget(1e-2), budget(5e-3)
    assert b1.tau > 0
    assert b2.iterations / b1.iterations == pytest.approx(4.0, rel=1e-6)
    s1, s2 = budget(1e-2, "stochastic", sigma2=0.1), budget(5e-3, "stochastic", sigma2=0.1)
    assert s2.batch / s1.batch == pytest.approx(4.0, rel=1e-6)
    assert s1.kappa4 == pytest.approx(2 / s1.tau * (8 / default_parameters(1, "stochastic").beta
                                                    + 1.5))


def test_budget_exact_formula():
    dp = default_parameters(1.0, "exact")
    b = budget(1e-2)
    d = (dp.beta - 1 / dp.gamma) ** 2
    k1 = 3 / dp.beta**2 * (d + 1)
    k2 = (abs(dp.beta - 1 / dp.gamma) + 1) ** 2
    k3 = (1 + dp.beta * math.sqrt(3) + dp.sigma_h) ** 2
    assert (b.kappa1, b.kappa2, b.kappa3) == pytest.approx((k1, k2, k3))
    assert b.iterations == math.ceil(2 * max(k1, k2, k3) / (b.tau * 1e-4) * 11.0)


def test_budget_rejects_infeasible():
    with pytest.raises(InfeasibleParametersError):
        complexity_budget(1.0, "exact", 3.0, 0.31, 0.1, 1e-2, 1.0, 0.0, 0.0, n_blocks=3,
                          max_coupling_norm=1.0)
    with pytest.raises(ValueError):
        budget(1e-2, "linesearch")
    with pytest.raises(ValueError):
        budget(1e-2, "stochastic")
