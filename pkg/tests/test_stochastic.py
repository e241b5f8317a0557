import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccopf.errors import OutOfRange
from ccopf.network import Generator
from ccopf.stochastic import (RiskParams, Uncertainty, VariancePenalties, expected_cost,
                              psd_root, z_quantile)


def _erf_series(x, terms=80):
    total, term = 0.0, x
    for n in range(terms):
        total += term / (2 * n + 1)
        term *= -x * x / (n + 1)
    return 2.0 / math.sqrt(math.pi) * total


def _z_oracle(eps):
    # bisection on 1 - Phi(z) = eps, Phi from the erf Taylor series
    lo, hi = 0.0, 6.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        tail = 0.5 * (1.0 - _erf_series(mid / math.sqrt(2.0)))
        lo, hi = (mid, hi) if tail > eps else (lo, mid)
    return 0.5 * (lo + hi)


def test_z_quantile_symmetric_point():
    assert z_quantile(0.5) == 0.0


@pytest.mark.parametrize("eps, expected", [(0.05, 1.6448536), (0.01, 2.3263479)])
def test_z_quantile_against_series_oracle(eps, expected):
    assert _z_oracle(eps) == pytest.approx(expected, abs=1e-7)
    assert z_quantile(eps) == pytest.approx(_z_oracle(eps), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.005, 0.49))
def test_z_quantile_property(eps):
    assert z_quantile(eps) == pytest.approx(_z_oracle(eps), abs=1e-9)


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.1])
def test_z_quantile_range(eps):
    with pytest.raises(OutOfRange):
        z_quantile(eps)


def test_risk_params_range_and_divisors():
    with pytest.raises(OutOfRange):
        RiskParams.uniform(0.6)
    r = RiskParams.uniform(0.1)
    assert r.z_f25 == pytest.approx(z_quantile(0.04))
    assert r.z_f5 == pytest.approx(z_quantile(0.02))


def test_expected_cost_degenerate_cases():
    g = Generator(1, 0, 2, -1, 1, c2=3.0, c1=5.0, c0=1.0)
    assert expected_cost(g, 0.7, 0.0, 2.0) == g.cost(0.7)
    assert expected_cost(g, 0.7, 0.4, 0.0) == g.cost(0.7)


def test_expected_cost_monte_carlo():
    # a = 0, b = 1: c(p) = p^2/2; p = 1, alpha = 0.5, S = 2 -> 0.5 + 0.5
    g = Generator(1, 0, 2, -1, 1, c2=0.5, c1=0.0)
    assert expected_cost(g, 1.0, 0.5, 2.0) == pytest.approx(1.0)
    omega = np.random.default_rng(7).normal(0.0, 2.0, 1_000_000)
    draws = g.cost(1.0 - 0.5 * omega)
    se = draws.std() / math.sqrt(len(draws))
    assert abs(draws.mean() - 1.0) <= 3 * se


def test_psd_root_cholesky_and_singular(rng):
    A = rng.standard_normal((4, 4))
    sigma = A @ A.T
    B = psd_root(sigma)
    np.testing.assert_allclose(B @ B.T, sigma, atol=1e-12)
    assert np.allclose(B, np.tril(B))
    v = rng.standard_normal(3)
    singular = np.outer(v, v)
    B = psd_root(singular)
    np.testing.assert_allclose(B @ B.T, singular, atol=1e-12)
    with pytest.raises(ValueError):
        psd_root(-np.eye(2))


def test_uncertainty_norm_identity(rng):
    A = rng.standard_normal((3, 3))
    unc = Uncertainty(A @ A.T)
    assert np.linalg.norm(unc.d) == pytest.approx(unc.s_total, rel=1e-12)
    assert unc.scaled(4.0).s_total == pytest.approx(2.0 * unc.s_total, rel=1e-12)
    zero = Uncertainty(np.zeros((2, 2)))
    assert zero.s_total == 0.0
    np.testing.assert_array_equal(zero.root, 0.0)


def test_variance_penalties_validation():
    with pytest.raises(OutOfRange):
        VariancePenalties(np.array([-1.0]), [0.0], [0.0], [0.0], [0.0])
