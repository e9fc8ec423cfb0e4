"""Piecewise-constant coefficient curves and the market they describe."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class PiecewiseCurve:
    """Right-continuous step function on [0, horizon].

    ``values[i]`` applies on ``[breakpoints[i], breakpoints[i+1])``, the last
    value up to the horizon.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    horizon: float

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if not self.horizon > 0:
            raise DomainError("curve horizon must be positive")
        if len(bp) == 0 or bp[0] != 0.0:
            raise DomainError("first breakpoint must be 0")
        if len(vals) != len(bp):
            raise DomainError("need exactly one value per breakpoint")
        if any(b >= c for b, c in zip(bp, bp[1:])):
            raise DomainError("breakpoints must be strictly ascending")
        if bp[-1] >= self.horizon:
            raise DomainError("last breakpoint must lie before the horizon")

    @classmethod
    def constant(cls, value: float, horizon: float) -> "PiecewiseCurve":
        return cls((0.0,), (value,), horizon)

    @property
    def is_constant(self) -> bool:
        return len(set(self.values)) == 1

    def __call__(self, t: float) -> float:
        if not 0 <= t <= self.horizon:
            raise DomainError(f"t={t} outside [0, {self.horizon}]")
        return self.values[bisect.bisect_right(self.breakpoints, t) - 1]

    def integrate(self, t0: float, t1: float) -> float:
        return integrate_curve(self, t0, t1)

    def map(self, fn) -> "PiecewiseCurve":
        return PiecewiseCurve(self.breakpoints, tuple(fn(v) for v in self.values), self.horizon)


def integrate_curve(curve: PiecewiseCurve, t0: float, t1: float) -> float:
    """Exact integral of a step function over [t0, t1]."""
    # tolerate the last grid point landing a rounding error past the horizon
    if t1 > curve.horizon and t1 - curve.horizon <= 1e-12 * curve.horizon:
        t1 = curve.horizon
    if not (0 <= t0 <= t1 <= curve.horizon):
        raise DomainError(f"interval [{t0}, {t1}] not inside [0, {curve.horizon}]")
    if t0 == t1:
        return 0.0
    edges = list(curve.breakpoints) + [curve.horizon]
    i = bisect.bisect_right(edges, t0) - 1
    parts = []
    while i < len(curve.values) and edges[i] < t1:
        lo, hi = max(edges[i], t0), min(edges[i + 1], t1)
        if hi > lo:
            parts.append(curve.values[i] * (hi - lo))
        i += 1
    return math.fsum(parts)


def common_refinement(*curves: PiecewiseCurve) -> tuple[float, ...]:
    return tuple(sorted(set().union(*(c.breakpoints for c in curves))))


@dataclass(frozen=True)
class MarketParams:
    """Deterministic coefficients of dS/S = rho dt + sigma dW and the cash legs.

    ``r`` is the index cash rate, ``r_disc`` the discount rate used for pricing
    and ``a`` an optional adjustment (dividend protection or fee) accruing on
    the risky leg.
    """

    r: PiecewiseCurve
    rho: PiecewiseCurve
    sigma: PiecewiseCurve
    r_disc: PiecewiseCurve | None = None
    a: PiecewiseCurve | None = None
    sigma_lo: float | None = None
    sigma_hi: float | None = None

    def __post_init__(self):
        curves = [self.r, self.rho, self.sigma] + [c for c in (self.r_disc, self.a) if c]
        if len({c.horizon for c in curves}) != 1:
            raise DomainError("all curves must share one horizon")
        if self.r_disc is None:
            object.__setattr__(self, "r_disc", self.r)
        smin, smax = min(self.sigma.values), max(self.sigma.values)
        lo = smin if self.sigma_lo is None else self.sigma_lo
        hi = smax if self.sigma_hi is None else self.sigma_hi
        if not (0 < lo <= smin and smax <= hi < math.inf):
            raise DomainError(
                f"sigma must satisfy 0 < {lo} <= min sigma <= max sigma <= {hi} < inf")
        object.__setattr__(self, "sigma_lo", float(lo))
        object.__setattr__(self, "sigma_hi", float(hi))

    @classmethod
    def constant(cls, r, rho, sigma, T, r_disc=None, a=None) -> "MarketParams":
        c = PiecewiseCurve.constant
        return cls(c(r, T), c(rho, T), c(sigma, T),
                   None if r_disc is None else c(r_disc, T),
                   None if a is None else c(a, T))

    @property
    def horizon(self) -> float:
        return self.r.horizon

    @property
    def is_constant(self) -> bool:
        return self.r.is_constant and self.rho.is_constant and self.sigma.is_constant

    def with_sigma(self, sigma: PiecewiseCurve) -> "MarketParams":
        """Copy with a replaced volatility curve (bounds re-derived)."""
        return MarketParams(self.r, self.rho, sigma, self.r_disc, self.a)

    def discount_factor(self, T: float | None = None) -> float:
        T = self.horizon if T is None else T
        return math.exp(-integrate_curve(self.r_disc, 0.0, T))


@dataclass(frozen=True)
class SegmentStats:
    """Time averages over one grid step [t_{n-1}, t_n]."""

    r: float
    rho: float
    sigma2: float
    a: float = 0.0


def grid_time(n: int, T: float, N: int) -> float:
    # n*T/N evaluated exactly, then rounded once
    return float(Fraction(n) * Fraction(T) / Fraction(N))


def segment_stats(params: MarketParams, n: int, dt: float, N: int | None = None) -> SegmentStats:
    """Averages of r, rho, sigma^2 and a over the n-th step (1-based)."""
    T = params.horizon
    if N is None:
        N = max(1, round(T / dt))
    if n < 1 or n > N:
        raise DomainError(f"step {n} outside 1..{N}")
    t0, t1 = grid_time(n - 1, T, N), grid_time(n, T, N)
    width = t1 - t0
    r = integrate_curve(params.r, t0, t1) / width
    rho = integrate_curve(params.rho, t0, t1) / width
    s2 = integrate_curve(params.sigma.map(lambda s: s * s), t0, t1) / width
    a = integrate_curve(params.a, t0, t1) / width if params.a is not None else 0.0
    return SegmentStats(r, rho, s2, a)


@dataclass(frozen=True)
class SegmentTable:
    """Per-step averages for every step of a grid, as arrays of length N."""

    r: np.ndarray
    rho: np.ndarray
    sigma2: np.ndarray
    a: np.ndarray
    dt: float = field(default=0.0)


def segment_table(params: MarketParams, N: int) -> SegmentTable:
    T = params.horizon
    dt = T / N
    if params.is_constant and (params.a is None or params.a.is_constant):
        a = 0.0 if params.a is None else params.a.values[0]
        fill = lambda v: np.full(N, v)  # noqa: E731
        return SegmentTable(fill(params.r.values[0]), fill(params.rho.values[0]),
                            fill(params.sigma.values[0] ** 2), fill(a), dt)
    rows = [segment_stats(params, n, dt, N) for n in range(1, N + 1)]
    return SegmentTable(np.array([s.r for s in rows]), np.array([s.rho for s in rows]),
                        np.array([s.sigma2 for s in rows]), np.array([s.a for s in rows]), dt)
