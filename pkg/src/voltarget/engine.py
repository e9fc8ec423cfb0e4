"""Path evolution of the stock, realised variance, leverage and index processes.

Three index processes are driven by the same Gaussian draws on every path:

* the model-free discrete index, compounded with arithmetic gross returns
  ``1 + (1 - w) int r + w (S_n / S_{n-1} - 1)``;
* the continuous index, whose log increment is exact given the leverage held
  over the step;
* the simplified process X, identical to the continuous index except that the
  leverage is computed from the pure-diffusion variance u instead of v.

All step functions below are written against numpy so they apply equally to a
scalar state and to a vector of paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NonpositiveIndexValue
from .market import MarketParams, SegmentStats, segment_table
from .multipliers import as_lambda


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class EWMA:
    name = "ewma"


@dataclass(frozen=True)
class SMA:
    window: int
    name = "sma"

    def __post_init__(self):
        if int(self.window) != self.window or self.window < 3:
            raise DomainError("SMA window must be an integer >= 3")


@dataclass(frozen=True)
class Capped:
    lam1: float
    lam2: float
    w_max: float
    name = "capped"

    def __post_init__(self):
        as_lambda(self.lam1)
        as_lambda(self.lam2)
        if not self.w_max > 0:
            raise DomainError("w_max must be positive")


@dataclass(frozen=True)
class FeeAdjusted:
    name = "fee"


@dataclass(frozen=True)
class IndexConfig:
    lam: float
    target_vol: float
    v0: float
    I0: float = 1.0
    variant: EWMA | SMA | Capped | FeeAdjusted = field(default_factory=EWMA)
    leverage_lag: int = 1

    def __post_init__(self):
        object.__setattr__(self, "lam", as_lambda(self.lam))
        if min(self.target_vol, self.v0, self.I0) <= 0:
            raise DomainError("target_vol, v0 and I0 must be positive")
        if int(self.leverage_lag) != self.leverage_lag or self.leverage_lag < 1:
            raise DomainError("leverage_lag must be an integer >= 1")

    @property
    def fee(self) -> bool:
        return isinstance(self.variant, FeeAdjusted)


@dataclass(frozen=True)
class GridSpec:
    T: float
    N: int

    def __post_init__(self):
        if not self.T > 0 or int(self.N) != self.N or self.N < 1:
            raise DomainError("grid needs T > 0 and integer N >= 1")

    @property
    def dt(self) -> float:
        return self.T / self.N


# ---------------------------------------------------------------------------
# single-step operations


def stock_log_return(seg: SegmentStats, dt: float, z):
    """Exact log return of the stock over one step given the standard normal z."""
    return (seg.rho - 0.5 * seg.sigma2) * dt + np.sqrt(seg.sigma2 * dt) * z


def ewma_variance_step(v_prev, simple_return, lam: float, dt: float):
    return lam * v_prev + (1.0 - lam) / dt * simple_return * simple_return


def leverage(variance, config: IndexConfig):
    """Risky-asset weight from the (lagged) variance state.

    ``variance`` is v for EWMA/SMA/fee variants and a pair (v1, v2) for the
    capped variant.
    """
    if isinstance(config.variant, Capped):
        v1, v2 = variance
        w = np.minimum(config.variant.w_max, config.target_vol / np.sqrt(v1))
        return np.minimum(w, config.target_vol / np.sqrt(v2))
    return config.target_vol / np.sqrt(variance)


def discrete_gross_return(w, seg: SegmentStats, dt: float, simple_return, fee: bool = False):
    gross = 1.0 + (1.0 - w) * seg.r * dt + w * simple_return
    if fee:
        gross = gross + w * seg.a * dt
    return gross


def discrete_index_step(log_index, w, seg: SegmentStats, dt: float, simple_return,
                        fee: bool = False, step: int = 0):
    """Compound the discrete index by one step.

    Scalars raise NonpositiveIndexValue when the gross return is not positive;
    arrays return NaN in those positions so a batch is never aborted.
    """
    gross = discrete_gross_return(w, seg, dt, simple_return, fee)
    if np.ndim(gross) == 0:
        if not gross > 0:
            raise NonpositiveIndexValue(step, float(gross))
        return log_index + math.log(gross)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(gross > 0, log_index + np.log(np.where(gross > 0, gross, 1.0)), np.nan)


def continuous_index_step(log_index, w, seg: SegmentStats, dt: float, z, fee: bool = False):
    inc = (seg.r * dt + w * (seg.rho - seg.r) * dt - 0.5 * w * w * seg.sigma2 * dt
           + w * np.sqrt(seg.sigma2 * dt) * z)
    if fee:
        inc = inc + w * seg.a * dt
    return log_index + inc


def diffusion_variance_step(u_prev, seg: SegmentStats, lam: float, z):
    # (1 - lam)/dt * (sigma sqrt(dt) z)^2
    return lam * u_prev + (1.0 - lam) * seg.sigma2 * z * z


def simplified_process_step(log_x, u, seg: SegmentStats, dt: float, z, config: IndexConfig):
    """Advance (log X, u) one step using leverage target_vol / sqrt(u_{n-1})."""
    w = config.target_vol / np.sqrt(u)
    new_log = continuous_index_step(log_x, w, seg, dt, z, config.fee)
    return new_log, diffusion_variance_step(u, seg, config.lam, z)


# ---------------------------------------------------------------------------
# variance trackers


class _EwmaTracker:
    def __init__(self, lam, v0, shape):
        self.lam = lam
        self.v = np.full(shape, float(v0))

    def state(self):
        return self.v

    def update(self, sq_annual):
        self.v = self.lam * self.v + (1.0 - self.lam) * sq_annual


class _CappedTracker:
    def __init__(self, lam1, lam2, v0, shape):
        self.a = _EwmaTracker(lam1, v0, shape)
        self.b = _EwmaTracker(lam2, v0, shape)

    def state(self):
        return (self.a.v, self.b.v)

    def update(self, sq_annual):
        self.a.update(sq_annual)
        self.b.update(sq_annual)


class _SmaTracker:
    """Simple average of the last L annualised squared returns.

    Before L returns are available the missing weight sits on v0:
    v_n = (1 - n/L) v0 + (1/L) sum of the n returns seen so far.
    """

    def __init__(self, window, v0, shape):
        self.L = window
        self.v0 = float(v0)
        self.buf = np.zeros((window,) + tuple(np.shape(np.empty(shape))))
        self.total = np.zeros(shape)
        self.n = 0
        self.v = np.full(shape, self.v0)

    def state(self):
        return self.v

    def update(self, sq_annual):
        slot = self.n % self.L
        if self.n >= self.L:
            self.total = self.total - self.buf[slot]
        self.buf[slot] = sq_annual
        self.total = self.total + sq_annual
        self.n += 1
        seen = min(self.n, self.L)
        # running sums can drift below zero by rounding once old entries leave
        self.v = (1.0 - seen / self.L) * self.v0 + np.maximum(self.total, 0.0) / self.L


def _tracker(config: IndexConfig, shape):
    var = config.variant
    if isinstance(var, SMA):
        return _SmaTracker(var.window, config.v0, shape)
    if isinstance(var, Capped):
        return _CappedTracker(var.lam1, var.lam2, config.v0, shape)
    return _EwmaTracker(config.lam, config.v0, shape)


# ---------------------------------------------------------------------------
# paths


@dataclass
class PathBatch:
    """Terminal values for a block of coupled paths (NaN in log_disc where flagged)."""

    log_S: np.ndarray
    log_disc: np.ndarray
    log_cont: np.ndarray
    log_x: np.ndarray
    flagged: np.ndarray
    flag_step: np.ndarray
    leverage: np.ndarray | None = None


@dataclass(frozen=True)
class PathResult:
    log_S: float
    log_disc: float
    log_cont: float
    log_x: float
    flagged: bool
    flag_step: int
    leverage: np.ndarray | None = None


def run_paths(market: MarketParams, config: IndexConfig, grid: GridSpec, z,
              trace: bool = False) -> PathBatch:
    """Evolve a block of coupled paths; row p of ``z`` holds the N draws of path p.

    Every operation is elementwise across rows, so each path's result depends
    only on its own row.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    P, N = z.shape
    if N != grid.N:
        raise DomainError(f"need {grid.N} draws per path, got {N}")
    if abs(market.horizon - grid.T) > 1e-12 * grid.T:
        raise DomainError("grid horizon differs from market horizon")
    table = segment_table(market, N)
    dt = grid.dt
    lag = config.leverage_lag
    fee = config.fee

    log_S = np.zeros(P)
    log0 = math.log(config.I0)
    log_disc = np.full(P, log0)
    log_cont = np.full(P, log0)
    log_x = np.full(P, log0)
    flag_step = np.zeros(P, dtype=np.int64)

    v_track = _tracker(config, P)
    u_track = _tracker(config, P)
    # states at steps n - lag .. n - 1; index 0 is the one used for leverage
    v_hist = [v_track.state()] * lag
    u_hist = [u_track.state()] * lag
    lev = np.empty((P, N)) if trace else None

    for n in range(N):
        seg = SegmentStats(table.r[n], table.rho[n], table.sigma2[n], table.a[n])
        zn = z[:, n]
        w = leverage(v_hist[0], config)
        wu = leverage(u_hist[0], config)
        if trace:
            lev[:, n] = w

        x = stock_log_return(seg, dt, zn)
        ret = np.expm1(x)
        log_S = log_S + x
        new_disc = discrete_index_step(log_disc, w, seg, dt, ret, fee)
        newly = np.isnan(new_disc) & (flag_step == 0)
        flag_step[newly] = n + 1
        log_disc = new_disc
        log_cont = continuous_index_step(log_cont, w, seg, dt, zn, fee)
        log_x = continuous_index_step(log_x, wu, seg, dt, zn, fee)

        v_track.update(ret * ret / dt)
        u_track.update(seg.sigma2 * zn * zn)
        v_hist = v_hist[1:] + [v_track.state()]
        u_hist = u_hist[1:] + [u_track.state()]

    return PathBatch(log_S, log_disc, log_cont, log_x, flag_step > 0, flag_step, lev)


def run_path(market: MarketParams, config: IndexConfig, grid: GridSpec, z,
             trace: bool = False) -> PathResult:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise DomainError("run_path takes a one-dimensional draw sequence")
    b = run_paths(market, config, grid, z[None, :], trace)
    return PathResult(float(b.log_S[0]), float(b.log_disc[0]), float(b.log_cont[0]),
                      float(b.log_x[0]), bool(b.flagged[0]), int(b.flag_step[0]),
                      None if b.leverage is None else b.leverage[0])
