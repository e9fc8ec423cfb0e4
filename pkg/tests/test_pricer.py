import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import ndtr

from voltarget.errors import DomainError, HypothesisError
from voltarget.market import MarketParams, PiecewiseCurve
from voltarget.multipliers import compute_U, compute_V
from voltarget.pricer import (
    OptionSpec, _bs_put, bs_call, limiting_params, rho_drift, terminal_lognormal,
    vega_conversion,
)

U09, V09 = compute_U(0.9)[0], compute_V(0.9)[0]

# e^{-0.05} E[(Y - 1)^+] with log Y ~ N(-0.02, 0.04), mpmath quadrature at 30 digits
CALL_REFERENCE = 0.075770821464272725


def test_normal_cdf_matches_erfc():
    x = np.linspace(-12, 8, 1000)
    ref = np.array([0.5 * math.erfc(-v / math.sqrt(2)) for v in x])
    np.testing.assert_allclose(ndtr(x), ref, rtol=1e-13, atol=1e-16)


def test_call_reference_value():
    assert bs_call(-0.02, 0.04, 1.0, math.exp(-0.05)) == pytest.approx(CALL_REFERENCE, abs=1e-10)


def test_call_degenerates_to_forward_for_tiny_strike():
    fwd = math.exp(0.1 + 0.02)
    assert bs_call(0.1, 0.04, 1e-12, 0.9) == pytest.approx(0.9 * fwd, rel=1e-10)


def test_deep_in_the_money_is_intrinsic():
    assert bs_call(math.log(2.0), 1e-8, 1.0, 1.0) == pytest.approx(1.0, abs=1e-6)


def test_zero_variance_is_intrinsic():
    assert bs_call(math.log(1.5), 0.0, 1.0, 0.9) == pytest.approx(0.45, rel=1e-15)
    assert bs_call(math.log(0.5), 0.0, 1.0, 0.9) == 0.0


def test_negative_variance_rejected():
    with pytest.raises(DomainError):
        bs_call(0.0, -1e-3, 1.0)
    with pytest.raises(DomainError):
        rho_drift(0.0, 0.0, 1.0, 1.0, 1.0)


@given(st.floats(-0.5, 0.5), st.floats(1e-4, 0.5), st.floats(0.2, 5.0), st.floats(0.5, 1.0))
def test_put_call_parity(m, v, K, disc):
    lhs = bs_call(m, v, K, disc) - _bs_put(m, v, K, disc)
    rhs = disc * (math.exp(m + v / 2) - K)
    assert lhs == pytest.approx(rhs, abs=1e-12 * max(1.0, K))


@pytest.mark.parametrize("K", [0.6, 0.8, 1.0, 1.2, 1.5])
@pytest.mark.parametrize("v", [0.01, 0.02, 0.04, 0.09, 0.16])
def test_drift_sensitivity_matches_finite_difference(K, v):
    m, disc, T, h = -0.02, math.exp(-0.05), 1.0, 1e-5
    fd = (bs_call(m + h, v, K, disc) - bs_call(m - h, v, K, disc)) / (2 * h) * T
    assert rho_drift(m, v, K, disc, T) == pytest.approx(fd, rel=1e-6)


def test_drift_sensitivity_limits():
    fwd = math.exp(0.02)
    assert rho_drift(0.0, 0.04, 1e-12, 0.95, 2.0) == pytest.approx(2.0 * 0.95 * fwd, rel=1e-10)
    assert rho_drift(0.0, 0.04, 1e6, 0.95, 2.0) == pytest.approx(0.0, abs=1e-300)


def test_call_monotone_in_strike_and_variance():
    Ks = np.linspace(0.5, 2.0, 20)
    prices = [bs_call(0.0, 0.04, K, 1.0) for K in Ks]
    assert all(a > b for a, b in zip(prices, prices[1:]))
    vs = np.linspace(0.001, 0.5, 20)
    prices = [bs_call(0.0, v, 1.0, 1.0) for v in vs]
    assert all(a < b for a, b in zip(prices, prices[1:]))


def test_limiting_params_reference_market():
    m = MarketParams.constant(0.05, 0.03, 0.5, 1.0)
    p = limiting_params(m, 0.9, 0.2, U09, V09)
    assert p.drift(0.5) == pytest.approx(0.05 + (0.03 - 0.05) * 0.4 * U09, rel=1e-15)
    assert p.vol == pytest.approx(0.2 * math.sqrt(V09), rel=1e-15)


def test_limiting_drift_is_cash_rate_when_carry_vanishes():
    m = MarketParams.constant(0.04, 0.04, 0.3, 2.0)
    p = limiting_params(m, 0.9, 0.2, U09, V09)
    assert p.drift.values == (0.04,)


def test_limiting_drift_with_fee_and_curves():
    T = 1.0
    r = PiecewiseCurve((0.0, 0.5), (0.05, 0.04), T)
    sig = PiecewiseCurve((0.0, 0.25), (0.5, 0.4), T)
    a = PiecewiseCurve.constant(-0.01, T)
    m = MarketParams(r, PiecewiseCurve.constant(0.03, T), sig, a=a)
    p = limiting_params(m, 0.9, 0.2, U09, V09)
    assert p.drift.breakpoints == (0.0, 0.25, 0.5)
    assert p.drift(0.3) == pytest.approx(0.05 + (0.03 - 0.05 - 0.01) * 0.2 / 0.4 * U09)


def test_near_unit_lambda_recovers_stock():
    lam = 0.999
    U, V = compute_U(lam)[0], compute_V(lam)[0]
    m = MarketParams.constant(0.05, 0.03, 0.2, 1.0)
    p = limiting_params(m, lam, 0.2, U, V)
    assert p.drift(0.0) == pytest.approx(0.03, rel=1e-2)
    assert p.vol == pytest.approx(0.2, rel=1e-2)


@pytest.mark.parametrize("lam", [0.1, 0.5, 0.9, 0.99])
def test_limiting_vol_exceeds_target(lam):
    p = limiting_params(MarketParams.constant(0.05, 0.03, 0.5, 1.0), lam, 0.2,
                        compute_U(lam)[0], compute_V(lam)[0])
    assert p.vol > 0.2


def test_terminal_moments():
    flat = limiting_params(MarketParams.constant(0.0, 0.0, 0.5, 1.0), 0.9, 0.2, U09, 1.0)
    assert terminal_lognormal(flat, 1.0, 1.0) == pytest.approx((-0.02, 0.04), abs=1e-15)
    assert terminal_lognormal(flat, 2.0, 0.0) == (math.log(2.0), 0.0)


def test_vega_conversion_values():
    m = MarketParams.constant(0.05, 0.03, 0.5, 1.0)
    assert vega_conversion(m, 0.2, U09, 0.5) == pytest.approx(0.02 * 0.2 * U09 / 0.25 * 0.5)
    assert vega_conversion(m, 0.2, U09, 0.5) > 0
    assert vega_conversion(MarketParams.constant(0.04, 0.04, 0.5, 1.0), 0.2, U09, 0.5) == 0.0


def test_vega_conversion_needs_constant_market():
    T = 1.0
    m = MarketParams(PiecewiseCurve((0.0, 0.5), (0.05, 0.04), T),
                     PiecewiseCurve.constant(0.03, T), PiecewiseCurve.constant(0.5, T))
    with pytest.raises(HypothesisError):
        vega_conversion(m, 0.2, U09, 0.5)


def test_option_spec_validation():
    with pytest.raises(DomainError):
        OptionSpec(0.0, 1.0)
    assert OptionSpec(1.0, 1.0).K == 1.0
