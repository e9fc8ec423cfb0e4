"""Command-line front end: one CSV table per command.

Every command is a function ``cmd_*(cfg) -> (header, rows)`` so the same tables
can be produced from Python; ``main`` only parses flags and writes the file.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from functools import lru_cache
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .engine import GridSpec
from .errors import ConvergenceError, DomainError, HypothesisError
from .montecarlo import clt_verify, histogram, kde, lln_verify, run_batch, summary
from .multipliers import compute_U, compute_V, u_bounds, v_bounds
from .pricer import bs_call, limiting_params, rho_drift, terminal_lognormal, vega_conversion

SCHEMA_VERSION = 1

HEADERS = {
    "multipliers": ["lambda", "U", "U_lo", "U_hi", "V", "V_lo", "V_hi"],
    "density": ["x", "kde", "hist_density", "limit_density"],
    "vol-convergence": ["lambda", "N", "sample_std", "stderr_std", "limit_std"],
    "price-convergence": ["lambda", "N", "mc_price", "mc_stderr", "limit_price"],
    "vega": ["lambda", "N", "mc_vega", "mc_stderr", "converted_vega"],
    "lln-clt": ["lambda", "lln_N", "lln_paths", "U_emp", "U_disp", "U", "V_emp", "V_disp", "V",
                "clt_N", "clt_paths", "clt_var", "clt_var_se", "skew", "skew_se",
                "excess_kurt", "kurt_se"],
}


@lru_cache(maxsize=None)
def _uv(lam: float) -> tuple[float, float]:
    return compute_U(lam)[0], compute_V(lam)[0]


def _limit_moments(cfg: ExperimentConfig, lam: float, market=None):
    market = cfg.market if market is None else market
    U, V = _uv(lam)
    params = limiting_params(market, lam, cfg.target_vol, U, V)
    return terminal_lognormal(params, cfg.I0, cfg.T)


def _call_payoffs(log_index, strike, discount):
    return discount * np.maximum(np.exp(log_index) - strike, 0.0)


def cmd_multipliers(cfg: ExperimentConfig):
    rows = []
    for lam in cfg.multiplier_lambdas:
        U, V = _uv(lam)
        ulo, uhi = u_bounds(lam)
        vlo, vhi = v_bounds(lam)
        rows.append([lam, U, ulo, uhi, V, vlo, vhi])
    return HEADERS["multipliers"], rows


def cmd_density(cfg: ExperimentConfig):
    lam, N = cfg.lambdas[0], cfg.Ns[0]
    res = run_batch(cfg.market, cfg.index_config(lam), GridSpec(cfg.T, N), cfg.paths, cfg.seed,
                    cfg.threads)
    mean, var = _limit_moments(cfg, lam)
    sd = math.sqrt(var)
    x = np.linspace(mean - 5 * sd, mean + 5 * sd, cfg.grid_points)
    samples = res.log_disc
    if samples.size >= 2:
        _, dens = kde(samples, cfg.bandwidth, grid=x)
        counts, edges = histogram(samples, cfg.bins)
        width = np.diff(edges)
        bin_dens = counts / (samples.size * width)
        idx = np.searchsorted(edges, x, side="right") - 1
        inside = (idx >= 0) & (idx < counts.size)
        hist = np.where(inside, bin_dens[np.clip(idx, 0, counts.size - 1)], 0.0)
    else:
        dens = hist = np.full(x.size, math.nan)
    limit = np.exp(-0.5 * (x - mean) ** 2 / var) / math.sqrt(2 * math.pi * var)
    return HEADERS["density"], [list(r) for r in zip(x, dens, hist, limit)]


def cmd_vol_convergence(cfg: ExperimentConfig):
    rows = []
    for lam in cfg.lambdas:
        limit = cfg.target_vol * math.sqrt(_uv(lam)[1] * cfg.T)
        for N in cfg.Ns:
            res = run_batch(cfg.market, cfg.index_config(lam), GridSpec(cfg.T, N), cfg.paths,
                            cfg.seed, cfg.threads)
            s = summary(res.log_cont)
            rows.append([lam, N, s.std, s.stderr_std, limit])
    return HEADERS["vol-convergence"], rows


def cmd_price_convergence(cfg: ExperimentConfig):
    rows = []
    disc = cfg.market.discount_factor(cfg.T)
    for lam in cfg.lambdas:
        mean, var = _limit_moments(cfg, lam)
        limit = bs_call(mean, var, cfg.strike, disc)
        for N in cfg.Ns:
            res = run_batch(cfg.market, cfg.index_config(lam), GridSpec(cfg.T, N), cfg.paths,
                            cfg.seed, cfg.threads)
            s = summary(_call_payoffs(res.log_cont, cfg.strike, disc))
            rows.append([lam, N, s.mean, s.stderr_mean, limit])
    return HEADERS["price-convergence"], rows


def bumped_vega(cfg: ExperimentConfig, lam: float, N: int):
    """Central difference in sigma with the same draws on both legs; returns (mean, stderr)."""
    ds = cfg.bump
    disc = cfg.market.discount_factor(cfg.T)
    legs = []
    for sign in (1.0, -1.0):
        market = cfg.market.with_sigma(cfg.market.sigma.map(lambda s: s + sign * ds))
        res = run_batch(market, cfg.index_config(lam), GridSpec(cfg.T, N), cfg.paths,
                        cfg.seed, cfg.threads)
        legs.append(_call_payoffs(res.log_cont, cfg.strike, disc))
    diff = (legs[0] - legs[1]) / (2 * ds)
    if diff.size < 2:
        return float(diff.mean()), math.nan
    s = summary(diff)
    return s.mean, s.stderr_mean


def converted_vega(cfg: ExperimentConfig, lam: float) -> float:
    mean, var = _limit_moments(cfg, lam)
    disc = cfg.market.discount_factor(cfg.T)
    sens = rho_drift(mean, var, cfg.strike, disc, cfg.T)
    return vega_conversion(cfg.market, cfg.target_vol, _uv(lam)[0], sens)


def cmd_vega(cfg: ExperimentConfig):
    rows = []
    for lam in cfg.lambdas:
        analytic = converted_vega(cfg, lam)
        for N in cfg.Ns:
            mc, se = bumped_vega(cfg, lam, N)
            rows.append([lam, N, mc, se, analytic])
    return HEADERS["vega"], rows


def cmd_lln_clt(cfg: ExperimentConfig):
    rows = []
    for lam in cfg.lambdas:
        lln = lln_verify(lam, cfg.lln_v0, cfg.lln_sigma, cfg.lln_N, cfg.lln_paths, cfg.seed,
                         cfg.threads)
        clt = clt_verify(lam, cfg.lln_v0, cfg.lln_sigma, cfg.clt_N, cfg.clt_paths, cfg.seed,
                         cfg.threads)
        rows.append([lam, cfg.lln_N, cfg.lln_paths, lln.u_mean, lln.u_dispersion, lln.U,
                     lln.v_mean, lln.v_dispersion, lln.V, cfg.clt_N, cfg.clt_paths,
                     clt.sample_var, clt.var_stderr, clt.skewness, clt.skew_stderr,
                     clt.excess_kurtosis, clt.kurt_stderr])
    return HEADERS["lln-clt"], rows


COMMANDS = {
    "multipliers": cmd_multipliers,
    "density": cmd_density,
    "vol-convergence": cmd_vol_convergence,
    "price-convergence": cmd_price_convergence,
    "vega": cmd_vega,
    "lln-clt": cmd_lln_clt,
}


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    # repr round-trips, so equal floats always give equal bytes
    return repr(float(value))


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def run_command(name: str, cfg: ExperimentConfig, out_dir) -> Path:
    header, rows = COMMANDS[name](cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.csv"
    write_csv(path, header, rows)
    return path


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment INI file")
    common.add_argument("--out", default=".", help="output directory (default: .)")
    common.add_argument("--seed", type=int, help="override [simulation] seed")
    common.add_argument("--threads", type=int, help="worker threads, 0 = all cores")
    parser = argparse.ArgumentParser(
        prog="voltarget",
        description="Limiting-diffusion multipliers and Monte Carlo checks for "
                    "volatility-target indices.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s csv-schema {SCHEMA_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "density":
            p.add_argument("--bandwidth", help="KDE bandwidth or 'silverman'")
            p.add_argument("--bins", type=int, help="histogram bin count")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
        if getattr(args, "bandwidth", None):
            bw = args.bandwidth.strip().lower()
            cfg.bandwidth = bw if bw == "silverman" else float(bw)
        if getattr(args, "bins", None):
            cfg.bins = args.bins
        cfg.validate()
        path = run_command(args.command, cfg, args.out)
    except (ConfigError, DomainError, HypothesisError, ConvergenceError, OSError,
            ValueError) as exc:
        print(f"voltarget: error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
