"""Deterministic parallel simulation, summary statistics and empirical limit checks.

Draw ``i`` of path ``p`` comes from a Philox counter-based generator keyed by
``(seed, p)``, so every path is addressable without generating the others and
a batch gives the same numbers on any number of threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtri

from .engine import GridSpec, IndexConfig, run_paths
from .errors import DomainError
from .market import MarketParams
from .multipliers import as_lambda, compute_U, compute_V

CHUNK_PATHS = 1024
_TWO_M53 = 2.0 ** -53


# ---------------------------------------------------------------------------
# random streams


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    path_index: int

    def __post_init__(self):
        if not 0 <= self.master_seed < 2 ** 64:
            raise DomainError("seed must fit in an unsigned 64-bit integer")
        if not 0 <= self.path_index < 2 ** 64:
            raise DomainError("path index must be a non-negative 64-bit integer")

    def _bitgen(self) -> np.random.Philox:
        return np.random.Philox(key=[self.master_seed, self.path_index])

    def normals(self, n: int, start: int = 0) -> np.ndarray:
        """Draws ``start .. start + n - 1`` of this stream."""
        bg = self._bitgen()
        if start:
            # each counter value yields four 64-bit words
            blocks, skip = divmod(start, 4)
            bg = np.random.Philox(key=[self.master_seed, self.path_index],
                                  counter=[blocks, 0, 0, 0])
            if skip:
                bg.random_raw(skip)
        return raw_to_normal(bg.random_raw(n))


def raw_to_normal(raw: np.ndarray) -> np.ndarray:
    # midpoint of the 53-bit cell, strictly inside (0, 1)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53
    return ndtri(u)


def normal_draw(stream: RngStream, i: int) -> float:
    return float(stream.normals(1, start=i)[0])


def normal_matrix(seed: int, first_path: int, n_paths: int, n_draws: int) -> np.ndarray:
    out = np.empty((n_paths, n_draws))
    for j in range(n_paths):
        out[j] = RngStream(seed, first_path + j).normals(n_draws)
    return out


# ---------------------------------------------------------------------------
# batch runner


def _resolve_threads(threads: int) -> int:
    if threads < 0:
        raise DomainError("threads must be >= 0")
    if threads:
        return threads
    if hasattr(os, "sched_getaffinity"):
        return len(os.sched_getaffinity(0)) or 1
    return os.cpu_count() or 1


def _chunks(paths: int):
    return [(s, min(CHUNK_PATHS, paths - s)) for s in range(0, paths, CHUNK_PATHS)]


def map_chunks(fn, paths: int, threads: int = 0) -> list:
    """Apply ``fn(first_path, n_paths)`` to fixed-size path blocks, results in path order."""
    chunks = _chunks(paths)
    workers = min(_resolve_threads(threads), len(chunks))
    if workers <= 1:
        return [fn(s, n) for s, n in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: fn(*c), chunks))


@dataclass(frozen=True)
class SimResult:
    """Terminal log values of a batch; ``log_disc`` omits flagged paths."""

    log_S: np.ndarray
    log_disc: np.ndarray
    log_cont: np.ndarray
    log_x: np.ndarray
    flagged: np.ndarray
    config: IndexConfig
    grid: GridSpec
    paths: int
    seed: int

    @property
    def flagged_count(self) -> int:
        return int(self.flagged.sum())

    @property
    def log_disc_all(self) -> np.ndarray:
        """Discrete index for every path, NaN where flagged (pairs with log_cont)."""
        out = np.full(self.paths, np.nan)
        out[~self.flagged] = self.log_disc
        return out


def run_batch(market: MarketParams, config: IndexConfig, grid: GridSpec, paths: int,
              seed: int, threads: int = 0) -> SimResult:
    if paths < 1:
        raise DomainError("paths must be >= 1")

    def block(first, n):
        return run_paths(market, config, grid, normal_matrix(seed, first, n, grid.N))

    parts = map_chunks(block, paths, threads)
    cat = lambda name: np.concatenate([getattr(p, name) for p in parts])  # noqa: E731
    flagged = cat("flagged")
    log_disc = cat("log_disc")
    return SimResult(cat("log_S"), log_disc[~flagged], cat("log_cont"), cat("log_x"),
                     flagged, config, grid, paths, seed)


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std: float
    stderr_mean: float
    stderr_std: float
    n: int


def summary(samples) -> SummaryStats:
    """Mean and unbiased std with delta-method standard errors."""
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise DomainError("need at least two samples")
    mean = float(np.mean(x))
    d = x - mean
    var = float(np.dot(d, d)) / (n - 1)
    std = math.sqrt(var)
    m4 = float(np.mean(d ** 4))
    se_std = math.sqrt(max(m4 - var * var, 0.0) / n) / (2 * std) if std > 0 else 0.0
    return SummaryStats(mean, std, std / math.sqrt(n), se_std, n)


def silverman_bandwidth(samples) -> float:
    x = np.asarray(samples, dtype=float)
    return 1.06 * float(np.std(x, ddof=1)) * x.size ** -0.2


def kde(samples, bandwidth="silverman", grid=None, n_grid: int = 512):
    """Gaussian kernel density estimate.

    Parameters
    ----------
    samples : array_like
    bandwidth : float or "silverman"
    grid : array_like, optional
        Evaluation points; default spans the sample range padded by 4 bandwidths.

    Returns
    -------
    (x, density) : tuple of ndarray
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 1:
        raise DomainError("need at least one sample")
    if bandwidth == "silverman":
        if x.size < 2:
            raise DomainError("bandwidth rule needs at least two samples")
        h = silverman_bandwidth(x)
    else:
        h = float(bandwidth)
    if not h > 0:
        raise DomainError("bandwidth must be positive")
    if grid is None:
        grid = np.linspace(x.min() - 4 * h, x.max() + 4 * h, n_grid)
    grid = np.asarray(grid, dtype=float)
    dens = np.zeros_like(grid)
    step = max(1, 2 ** 22 // max(grid.size, 1))
    for s in range(0, x.size, step):
        u = (grid[:, None] - x[None, s:s + step]) / h
        dens += np.exp(-0.5 * u * u).sum(axis=1)
    return grid, dens / (x.size * h * math.sqrt(2 * math.pi))


def histogram(samples, bins=50):
    counts, edges = np.histogram(np.asarray(samples, dtype=float), bins=bins)
    return counts, edges


# ---------------------------------------------------------------------------
# law of large numbers / central limit checks on the diffusion variance driver


def omega_paths(lam: float, omega0: float, z: np.ndarray, unit_driver: bool = False) -> np.ndarray:
    """omega_0 .. omega_{N-1} for each row of ``z``.

    omega_n = lam omega_{n-1} + (1 - lam) xi_n with xi_n = Z_n^2, or xi_n = 1
    when ``unit_driver`` is set.
    """
    xi = np.ones_like(z) if unit_driver else z * z
    prev = np.empty_like(z)
    prev[:, 0] = omega0
    if z.shape[1] > 1:
        zi = np.full((z.shape[0], 1), lam * omega0)
        prev[:, 1:], _ = lfilter([1.0 - lam], [1.0, -lam], xi[:, :-1], axis=1, zi=zi)
    return prev


@dataclass(frozen=True)
class LLNResult:
    u_paths: np.ndarray
    v_paths: np.ndarray
    U: float
    V: float

    @property
    def u_mean(self) -> float:
        return float(np.mean(self.u_paths))

    @property
    def v_mean(self) -> float:
        return float(np.mean(self.v_paths))

    @property
    def u_dispersion(self) -> float:
        return float(np.std(self.u_paths, ddof=1)) if self.u_paths.size > 1 else math.nan

    @property
    def v_dispersion(self) -> float:
        return float(np.std(self.v_paths, ddof=1)) if self.v_paths.size > 1 else math.nan


def lln_verify(lam, v0: float, sigma: float, N: int, paths: int, seed: int,
               threads: int = 0, unit_driver: bool = False) -> LLNResult:
    """Per-path Cesaro averages of omega^{-1/2} and omega^{-1} against U and V."""
    lam = as_lambda(lam)
    if N < 1 or paths < 1:
        raise DomainError("N and paths must be >= 1")
    omega0 = v0 / sigma ** 2

    def block(first, n):
        out_u, out_v = np.empty(n), np.empty(n)
        for j in range(n):
            om = omega_paths(lam, omega0, RngStream(seed, first + j).normals(N)[None, :],
                             unit_driver)[0]
            out_u[j] = np.mean(om ** -0.5)
            out_v[j] = np.mean(1.0 / om)
        return out_u, out_v

    parts = map_chunks(block, paths, threads)
    return LLNResult(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
                     compute_U(lam)[0], compute_V(lam)[0])


@dataclass(frozen=True)
class CLTResult:
    sums: np.ndarray
    sample_var: float
    var_stderr: float
    skewness: float
    skew_stderr: float
    excess_kurtosis: float
    kurt_stderr: float
    V: float


def clt_verify(lam, v0: float, sigma: float, N: int, paths: int, seed: int,
               threads: int = 0) -> CLTResult:
    """Distribution across paths of N^{-1/2} sum_k Z_k omega_{k-1}^{-1/2}."""
    lam = as_lambda(lam)
    if N < 1 or paths < 2:
        raise DomainError("need N >= 1 and paths >= 2")
    omega0 = v0 / sigma ** 2
    rows = 256

    def block(first, n):
        out = np.empty(n)
        for s in range(0, n, rows):
            m = min(rows, n - s)
            z = normal_matrix(seed, first + s, m, N)
            om = omega_paths(lam, omega0, z)
            out[s:s + m] = np.sum(z / np.sqrt(om), axis=1) / math.sqrt(N)
        return out

    sums = np.concatenate(map_chunks(block, paths, threads))
    n = sums.size
    d = sums - sums.mean()
    m2, m3, m4 = (float(np.mean(d ** k)) for k in (2, 3, 4))
    var = m2 * n / (n - 1)
    return CLTResult(sums, var, math.sqrt(max(m4 - m2 * m2, 0.0) / n),
                     m3 / m2 ** 1.5, math.sqrt(6.0 / n),
                     m4 / (m2 * m2) - 3.0, math.sqrt(24.0 / n), compute_V(lam)[0])


# ---------------------------------------------------------------------------
# discrete versus continuous index


@dataclass(frozen=True)
class EquivalenceRow:
    N: int
    mean_abs_diff: float
    stderr: float
    flagged_fraction: float


def equivalence_check(market: MarketParams, config: IndexConfig, T: float, Ns, paths: int,
                      seed: int, threads: int = 0) -> list[EquivalenceRow]:
    """Mean |log I_disc - log I_cont| over unflagged coupled paths for each N."""
    rows = []
    for N in Ns:
        res = run_batch(market, config, GridSpec(T, int(N)), paths, seed, threads)
        ok = ~res.flagged
        diff = np.abs(res.log_disc - res.log_cont[ok])
        se = float(np.std(diff, ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else math.nan
        rows.append(EquivalenceRow(int(N), float(np.mean(diff)) if diff.size else math.nan, se,
                                   res.flagged_count / res.paths))
    return rows
