"""Exact limiting multipliers and Monte Carlo checks for volatility-target indices."""

from .engine import EWMA, SMA, Capped, FeeAdjusted, GridSpec, IndexConfig, run_path, run_paths
from .market import MarketParams, PiecewiseCurve
from .montecarlo import clt_verify, equivalence_check, lln_verify, run_batch, summary
from .multipliers import (
    compute_U, compute_V, multipliers, q_binomial, q_gamma, sma_multipliers, u_bounds, v_bounds,
)
from .pricer import bs_call, limiting_params, rho_drift, terminal_lognormal, vega_conversion

__all__ = [
    "EWMA", "SMA", "Capped", "FeeAdjusted", "GridSpec", "IndexConfig", "run_path", "run_paths",
    "MarketParams", "PiecewiseCurve", "clt_verify", "equivalence_check", "lln_verify",
    "run_batch", "summary", "compute_U", "compute_V", "multipliers", "q_binomial", "q_gamma",
    "sma_multipliers", "u_bounds", "v_bounds", "bs_call", "limiting_params", "rho_drift",
    "terminal_lognormal", "vega_conversion",
]
