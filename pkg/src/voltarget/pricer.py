"""Limiting diffusion of the index and European call pricing on it."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import ndtr

from .errors import DomainError, HypothesisError
from .market import MarketParams, PiecewiseCurve, common_refinement, integrate_curve
from .multipliers import as_lambda


@dataclass(frozen=True)
class LimitDiffusionParams:
    """dY/Y = drift(t) dt + vol dB."""

    drift: PiecewiseCurve
    vol: float
    U: float
    V: float


@dataclass(frozen=True)
class OptionSpec:
    K: float
    T: float

    def __post_init__(self):
        if not (self.K > 0 and self.T > 0):
            raise DomainError("strike and maturity must be positive")


def limiting_params(market: MarketParams, lam, target_vol: float, U: float,
                    V: float) -> LimitDiffusionParams:
    """Drift r + (rho - r + a) target_vol U / sigma, volatility target_vol sqrt(V)."""
    as_lambda(lam)
    curves = [market.r, market.rho, market.sigma] + ([market.a] if market.a is not None else [])
    bps = common_refinement(*curves)
    T = market.horizon
    values = []
    for t in bps:
        r, rho, sig = market.r(t), market.rho(t), market.sigma(t)
        a = market.a(t) if market.a is not None else 0.0
        values.append(r + (rho - r + a) * target_vol * U / sig)
    return LimitDiffusionParams(PiecewiseCurve(bps, values, T), target_vol * math.sqrt(V), U, V)


def terminal_lognormal(params: LimitDiffusionParams, I0: float, T: float) -> tuple[float, float]:
    """Mean and variance of log Y_T."""
    if T < 0:
        raise DomainError("T must be non-negative")
    var = params.vol ** 2 * T
    if T == 0:
        return math.log(I0), 0.0
    return math.log(I0) + integrate_curve(params.drift, 0.0, T) - 0.5 * var, var


def _d1(mean_log, var_log, K):
    return (mean_log - math.log(K) + var_log) / math.sqrt(var_log)


def bs_call(mean_log: float, var_log: float, K: float, discount: float = 1.0) -> float:
    """Discounted E[(Y - K)^+] for log Y ~ N(mean_log, var_log)."""
    if var_log < 0:
        raise DomainError("var_log must be non-negative")
    if K <= 0:
        raise DomainError("strike must be positive")
    fwd = math.exp(mean_log + 0.5 * var_log)
    if var_log == 0:
        return discount * max(fwd - K, 0.0)
    d1 = _d1(mean_log, var_log, K)
    d2 = d1 - math.sqrt(var_log)
    return discount * (fwd * float(ndtr(d1)) - K * float(ndtr(d2)))


def _bs_put(mean_log: float, var_log: float, K: float, discount: float = 1.0) -> float:
    fwd = math.exp(mean_log + 0.5 * var_log)
    if var_log == 0:
        return discount * max(K - fwd, 0.0)
    d1 = _d1(mean_log, var_log, K)
    d2 = d1 - math.sqrt(var_log)
    return discount * (K * float(ndtr(-d2)) - fwd * float(ndtr(-d1)))


def rho_drift(mean_log: float, var_log: float, K: float, discount: float, T: float) -> float:
    """Sensitivity of the call price to a parallel shift of the drift.

    A unit drift shift moves log Y_T by T, so the derivative is
    T discount E[1{Y > K} Y].
    """
    if not var_log > 0:
        raise DomainError("var_log must be positive")
    if K <= 0:
        raise DomainError("strike must be positive")
    fwd = math.exp(mean_log + 0.5 * var_log)
    return T * discount * fwd * float(ndtr(_d1(mean_log, var_log, K)))


def vega_conversion(market: MarketParams, target_vol: float, U: float, drift_sens: float) -> float:
    """Limit of the index option's sensitivity to the stock volatility.

    Only valid for constant r, rho and sigma.
    """
    if not market.is_constant:
        raise HypothesisError("vega conversion needs constant r, rho and sigma")
    r, rho, sig = market.r.values[0], market.rho.values[0], market.sigma.values[0]
    return (r - rho) * target_vol * U / sig ** 2 * drift_sens
