"""Experiment configuration files.

INI syntax (``configparser``), five sections, every key optional unless noted::

    [market]
    T = 1.0                      ; required
    r = 0.05                     ; number, or step curve "0:0.05, 0.5:0.04"
    rho = 0.03
    sigma = 0.5
    r_disc = 0.05                ; defaults to r
    a = 0.0                      ; risky-leg adjustment, omitted means none

    [index]
    lambdas = 0.8, 0.85, 0.9     ; list, or range "start:stop:step" (inclusive)
    target_vol = 0.2
    v0 = 0.02
    I0 = 1.0
    variant = ewma               ; ewma | sma | capped | fee
    sma_window = 20              ; sma only
    lam1 = 0.9                   ; capped only
    lam2 = 0.97
    w_max = 1.5
    leverage_lag = 1

    [simulation]
    N = 1000, 2000, 5000
    paths = 50000
    seed = 20240917
    threads = 0

    [options]
    strike = 1.0
    bump = 0.001
    bandwidth = silverman        ; or a positive number
    bins = 50
    grid_points = 512

    [lln_clt]
    v0 = 0.02
    sigma = 0.5
    lln_N = 100000
    lln_paths = 1
    clt_N = 10000
    clt_paths = 10000

``[multipliers] lambdas`` gives the grid for the multipliers command and falls
back to ``[index] lambdas``. Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation

from .engine import EWMA, SMA, Capped, FeeAdjusted, IndexConfig
from .errors import DomainError
from .market import MarketParams, PiecewiseCurve
from .multipliers import as_lambda


class ConfigError(ValueError):
    pass


_ALLOWED = {
    "market": {"t", "r", "rho", "sigma", "r_disc", "a"},
    "index": {"lambdas", "target_vol", "v0", "i0", "variant", "sma_window", "lam1", "lam2",
              "w_max", "leverage_lag"},
    "simulation": {"n", "paths", "seed", "threads"},
    "multipliers": {"lambdas"},
    "options": {"strike", "bump", "bandwidth", "bins", "grid_points"},
    "lln_clt": {"v0", "sigma", "lln_n", "lln_paths", "clt_n", "clt_paths"},
}


def parse_number_list(text: str) -> list[float]:
    """``"a, b, c"`` or inclusive range ``"start:stop:step"``."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (Decimal(p.strip()) for p in text.split(":"))
            if step <= 0 or stop < start:
                raise ConfigError(f"bad range {text!r}")
            count = int((stop - start) / step) + 1
            return [float(start + i * step) for i in range(count)]
        return [float(Decimal(p.strip())) for p in text.split(",") if p.strip()]
    except (InvalidOperation, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def parse_curve(text: str, horizon: float) -> PiecewiseCurve:
    """A plain number, or ``"t0:v0, t1:v1, ..."`` breakpoints with t0 = 0."""
    text = text.strip()
    try:
        if ":" not in text:
            return PiecewiseCurve.constant(float(text), horizon)
        pairs = [p.split(":") for p in text.split(",") if p.strip()]
        return PiecewiseCurve(tuple(float(t) for t, _ in pairs),
                              tuple(float(v) for _, v in pairs), horizon)
    except (ValueError, DomainError) as exc:
        raise ConfigError(f"cannot parse curve {text!r}: {exc}") from exc


@dataclass
class ExperimentConfig:
    market: MarketParams
    lambdas: list[float]
    target_vol: float = 0.2
    v0: float = 0.02
    I0: float = 1.0
    variant: object = field(default_factory=EWMA)
    leverage_lag: int = 1
    Ns: list[int] = field(default_factory=lambda: [2000])
    paths: int = 50000
    seed: int = 20240917
    threads: int = 0
    multiplier_lambdas: list[float] = field(default_factory=list)
    strike: float = 1.0
    bump: float = 0.001
    bandwidth: object = "silverman"
    bins: int = 50
    grid_points: int = 512
    lln_v0: float = 0.02
    lln_sigma: float = 0.5
    lln_N: int = 100000
    lln_paths: int = 1
    clt_N: int = 10000
    clt_paths: int = 10000

    @property
    def T(self) -> float:
        return self.market.horizon

    def index_config(self, lam: float) -> IndexConfig:
        return IndexConfig(lam, self.target_vol, self.v0, self.I0, self.variant,
                           self.leverage_lag)

    def validate(self):
        if not self.lambdas:
            raise ConfigError("lambda grid is empty")
        for lam in self.lambdas + self.multiplier_lambdas:
            try:
                as_lambda(lam)
            except DomainError as exc:
                raise ConfigError(str(exc)) from exc
        if not self.Ns:
            raise ConfigError("N list is empty")
        if any(n < 1 for n in self.Ns):
            raise ConfigError("every N must be >= 1")
        if self.paths < 1 or self.lln_paths < 1 or self.clt_paths < 2:
            raise ConfigError("path counts must be positive (clt needs >= 2)")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in 64 bits")
        if self.bandwidth != "silverman" and not float(self.bandwidth) > 0:
            raise ConfigError("bandwidth must be 'silverman' or positive")
        return self


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ConfigError(f"expected an integer, got {text!r}")
    return int(value)


def _variant(sec) -> object:
    kind = sec.get("variant", "ewma").strip().lower()
    if kind == "ewma":
        return EWMA()
    if kind == "fee":
        return FeeAdjusted()
    if kind == "sma":
        return SMA(_int(sec["sma_window"]))
    if kind == "capped":
        return Capped(float(sec["lam1"]), float(sec["lam2"]), float(sec["w_max"]))
    raise ConfigError(f"unknown variant {kind!r}")


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    for name in cp.sections():
        if name not in _ALLOWED:
            raise ConfigError(f"unknown section [{name}]")
        extra = set(cp[name]) - _ALLOWED[name]
        if extra:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(extra))}")
    if "market" not in cp or "t" not in cp["market"]:
        raise ConfigError("[market] T is required")

    try:
        mk = cp["market"]
        T = float(mk["t"])
        curve = lambda key, default: parse_curve(mk.get(key, default), T)  # noqa: E731
        market = MarketParams(curve("r", "0.05"), curve("rho", "0.03"), curve("sigma", "0.5"),
                              curve("r_disc", "0") if "r_disc" in mk else None,
                              curve("a", "0") if "a" in mk else None)

        ix = cp["index"] if "index" in cp else {}
        sim = cp["simulation"] if "simulation" in cp else {}
        opt = cp["options"] if "options" in cp else {}
        ll = cp["lln_clt"] if "lln_clt" in cp else {}
        mult = cp["multipliers"] if "multipliers" in cp else {}

        lambdas = parse_number_list(ix.get("lambdas", "0.9"))
        bw = opt.get("bandwidth", "silverman").strip().lower()
        cfg = ExperimentConfig(
            market=market,
            lambdas=lambdas,
            target_vol=float(ix.get("target_vol", "0.2")),
            v0=float(ix.get("v0", "0.02")),
            I0=float(ix.get("i0", "1.0")),
            variant=_variant(ix) if ix else EWMA(),
            leverage_lag=_int(ix.get("leverage_lag", "1")),
            Ns=[_int(str(n)) for n in parse_number_list(sim.get("n", "2000"))],
            paths=_int(sim.get("paths", "50000")),
            seed=_int(sim.get("seed", "20240917")),
            threads=_int(sim.get("threads", "0")),
            multiplier_lambdas=parse_number_list(mult["lambdas"]) if "lambdas" in mult else list(lambdas),
            strike=float(opt.get("strike", "1.0")),
            bump=float(opt.get("bump", "0.001")),
            bandwidth=bw if bw == "silverman" else float(bw),
            bins=_int(opt.get("bins", "50")),
            grid_points=_int(opt.get("grid_points", "512")),
            lln_v0=float(ll.get("v0", "0.02")),
            lln_sigma=float(ll.get("sigma", "0.5")),
            lln_N=_int(ll.get("lln_n", "100000")),
            lln_paths=_int(ll.get("lln_paths", "1")),
            clt_N=_int(ll.get("clt_n", "10000")),
            clt_paths=_int(ll.get("clt_paths", "10000")),
        )
    except (KeyError, ValueError, DomainError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
