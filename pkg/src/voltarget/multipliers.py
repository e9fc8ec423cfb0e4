"""Drift and variance multipliers U(lambda), V(lambda) and their companions.

U and V are integrals over infinite products,

    U(lam) = sqrt(2 / (pi (1 - lam))) * int_0^inf prod_k (1 + t^2 lam^k)^(-1/2) dt
    V(lam) = 1 / (2 (1 - lam))       * int_0^inf prod_k (1 + t   lam^k)^(-1/2) dt

Neither has a closed form, so they are evaluated by adaptive quadrature of a
truncated product with every source of error (quadrature, product truncation,
domain cutoff) folded into a reported error estimate. The exponent -1 versions
of the same partial products do have closed forms (q-binomial theorem), and
those are exposed here too, both as checks on the quadrature machinery and for
the q-gamma based bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import ConvergenceError, DomainError

# U/V bound formulas switch to the sharper pair strictly above this value.
SHARP_BOUND_THRESHOLD = 0.7


@dataclass(frozen=True)
class LambdaParam:
    """EWMA decay in the open interval (0, 1)."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (0.0 < v < 1.0) or math.isnan(v):
            raise DomainError(f"lambda must lie in (0, 1), got {self.value!r}")
        object.__setattr__(self, "value", v)

    def __float__(self):
        return self.value


def as_lambda(lam) -> float:
    """Validate ``lam`` (float or LambdaParam) and return it as a float."""
    if isinstance(lam, LambdaParam):
        return lam.value
    return LambdaParam(lam).value


@dataclass(frozen=True)
class QuadratureSettings:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-12
    product_trunc_eps: float = 1e-12
    # start of geometric panelling, in units of the integrand's natural width
    domain_split: float = 4.0
    max_subdivisions: int = 200

    def __post_init__(self):
        if min(self.abs_tol, self.rel_tol, self.product_trunc_eps, self.domain_split) <= 0:
            raise DomainError("quadrature tolerances and domain_split must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")


@dataclass(frozen=True)
class MultiplierResult:
    u_value: float
    v_value: float
    u_err_est: float
    v_err_est: float
    u_bounds: tuple[float, float]
    v_bounds: tuple[float, float]


# ---------------------------------------------------------------------------
# q-special functions


def _one_minus_pow(q: float, j) -> float:
    # 1 - q**j without cancellation for q near 1
    if q > 0:
        return -math.expm1(j * math.log(q))
    return 1.0 - q**j


def q_binomial(n: int, k: int, q: float) -> float:
    """Gaussian (q-) binomial coefficient C_q(n, k)."""
    if n < 0 or k < 0 or k > n:
        raise DomainError(f"q_binomial requires 0 <= k <= n, got n={n}, k={k}")
    if q == 1:
        raise DomainError("q_binomial is undefined at q = 1")
    k = min(k, n - k)
    num = math.prod(_one_minus_pow(q, n - k + j) for j in range(1, k + 1))
    den = math.prod(_one_minus_pow(q, j) for j in range(1, k + 1))
    return num / den


def q_gamma(x: float, q: float, trunc_eps: float = 1e-14) -> float:
    """q-gamma function (1-q)^(1-x) prod_{n>=0} (1-q^(n+1)) / (1-q^(n+x)).

    The product stops once the next factor deviates from 1 by less than
    ``trunc_eps``; factor deviations decay like q^n so the omitted tail
    contributes a relative error of order trunc_eps / (1 - q).
    """
    if not x > 0:
        raise DomainError(f"q_gamma requires x > 0, got {x!r}")
    if not 0 < q < 1:
        raise DomainError(f"q_gamma requires q in (0, 1), got {q!r}")
    logq = math.log(q)
    # |dev_n| ~ q^n |q^x - q| / (1 - q^(n+x)) < trunc_eps
    gap = abs(math.exp(x * logq) - q)
    if gap == 0.0:
        n_terms = 1
    else:
        n_terms = max(1, int(math.ceil(math.log(trunc_eps / gap) / logq)) + 1)
    n = np.arange(n_terms, dtype=float)
    log_terms = np.log(-np.expm1((n + 1) * logq)) - np.log(-np.expm1((n + x) * logq))
    return math.exp((1.0 - x) * math.log1p(-q) + math.fsum(log_terms))


# ---------------------------------------------------------------------------
# closed-form partial product integrals


def partial_integral_squared(n: int, lam) -> float:
    """Exact value of int_0^inf prod_{k=0}^{n} (1 + t^2 lam^k)^(-1) dt."""
    lam = as_lambda(lam)
    if n < 1:
        raise DomainError("n must be >= 1")
    log_ratio = math.fsum(
        math.log(_one_minus_pow(lam, k + 0.5)) - math.log(_one_minus_pow(lam, k + 1))
        for k in range(n)
    )
    return 0.5 * math.pi * math.exp(log_ratio)


def partial_integral_linear(n: int, lam) -> float:
    """Exact value of int_0^inf prod_{k=0}^{n} (1 + t lam^k)^(-1) dt."""
    lam = as_lambda(lam)
    if n < 1:
        raise DomainError("n must be >= 1")
    return -math.log(lam) / _one_minus_pow(lam, n)


def infinite_integral_squared(lam) -> float:
    """n -> inf limit of partial_integral_squared via the q-gamma function."""
    lam = as_lambda(lam)
    return 0.5 * math.pi * math.sqrt(1.0 - lam) / q_gamma(0.5, lam)


# ---------------------------------------------------------------------------
# quadrature of products


def _tail_bound_log(lam, power, expo, n_factors, T):
    """log of an upper bound on int_T^inf prod_{k<n_factors} (1 + t^p lam^k)^(-e) dt.

    Uses (1 + t^p lam^k)^(-e) <= (t^p lam^k)^(-e) on the first m factors and
    <= 1 on the rest, minimised over m. Returns +inf if no m gives decay.
    """
    m = np.arange(1, n_factors + 1, dtype=float)
    decay = power * expo * m - 1.0
    ok = decay > 0
    if not ok.any():
        return math.inf
    m, decay = m[ok], decay[ok]
    logb = -expo * m * (m - 1) / 2.0 * math.log(lam) - decay * math.log(T) - np.log(decay)
    return float(logb.min())


def product_integral(lam, power: int, expo: float, n_factors=None,
                     settings: QuadratureSettings | None = None,
                     abs_target: float | None = None):
    """Integrate prod_k (1 + t^power lam^k)^(-expo) over [0, inf).

    ``n_factors=None`` means the infinite product. Returns (value, err_est),
    where err_est bounds quadrature error, the product truncation and the
    analytic tail beyond the integration cutoff.
    """
    lam = as_lambda(lam)
    s = settings or QuadratureSettings()
    target = s.abs_tol if abs_target is None else abs_target
    log_lam = math.log(lam)
    scale = (1.0 - lam) ** (1.0 / power)
    split = s.domain_split * scale
    infinite = n_factors is None

    def n_active(T):
        if not infinite:
            return n_factors
        # include factor k while lam^k T^p > eps
        return int(math.floor(math.log(s.product_trunc_eps / T**power) / log_lam)) + 1

    tail_budget = 0.05 * target
    T = split
    while True:
        K = n_active(T)
        if _tail_bound_log(lam, power, expo, K, T) <= math.log(tail_budget):
            break
        T *= 2.0
        if T > 1e300:
            raise ConvergenceError("integrand tail does not decay fast enough")
    tail_err = math.exp(_tail_bound_log(lam, power, expo, K, T))

    trunc_rel = 0.0
    if infinite:
        # omitted factors k >= K shrink the integrand by at most
        # exp(-expo * T^p * lam^K / (1 - lam)) on [0, T]
        while True:
            trunc_rel = math.expm1(expo * T**power * math.exp(K * log_lam) / (1.0 - lam))
            if trunc_rel <= 0.05 * target:
                break
            K += 16

    pows = np.exp(np.arange(K) * log_lam)

    def integrand(t):
        return math.exp(-expo * float(np.log1p(t**power * pows).sum()))

    edges = [0.0, split]
    while edges[-1] < T:
        edges.append(min(2.0 * edges[-1], T))
    panel_tol = 0.8 * target / (len(edges) - 1)
    total, quad_err = [], 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, err, info = integrate.quad(integrand, a, b, epsabs=panel_tol, epsrel=s.rel_tol,
                                        limit=s.max_subdivisions, full_output=1)[:3]
        if err > max(panel_tol, s.rel_tol * abs(val)) and info["last"] >= s.max_subdivisions:
            raise ConvergenceError(
                f"subdivision budget exhausted on [{a}, {b}] (err {err:.3g})")
        total.append(val)
        quad_err += err
    value = math.fsum(total)
    return value, quad_err + trunc_rel * value + tail_err


def compute_U(lam, settings: QuadratureSettings | None = None):
    """U(lambda) with an absolute error estimate."""
    lam = as_lambda(lam)
    s = settings or QuadratureSettings()
    pref = math.sqrt(2.0 / (math.pi * (1.0 - lam)))
    raw, err = product_integral(lam, 2, 0.5, settings=s, abs_target=s.abs_tol / pref)
    value, err = pref * raw, pref * err
    if err > s.abs_tol:
        raise ConvergenceError(f"U({lam}) error estimate {err:.3g} exceeds abs_tol")
    return value, err


def compute_V(lam, settings: QuadratureSettings | None = None):
    """V(lambda) with an absolute error estimate."""
    lam = as_lambda(lam)
    s = settings or QuadratureSettings()
    pref = 0.5 / (1.0 - lam)
    raw, err = product_integral(lam, 1, 0.5, settings=s, abs_target=s.abs_tol / pref)
    value, err = pref * raw, pref * err
    if err > s.abs_tol:
        raise ConvergenceError(f"V({lam}) error estimate {err:.3g} exceeds abs_tol")
    return value, err


# ---------------------------------------------------------------------------
# bounds


def q_gamma_half_bounds(lam):
    """Theta-function bracket for q_gamma(1/2, lam^2)."""
    lam = as_lambda(lam)
    log_inv = -math.log(lam)
    hi = lam ** (-0.125) * math.sqrt(math.pi * (1.0 - lam * lam) / (2.0 * log_inv))
    lo = hi * (1.0 - 2.0 * math.exp(-2.0 * math.pi**2 / log_inv))
    return lo, hi


def _ewma_ratio(lam):
    # log(1/lam) / (1/lam - 1)
    return -math.log(lam) / (1.0 / lam - 1.0)


def u_bounds(lam):
    """Lower/upper bounds on U(lambda)."""
    lam = as_lambda(lam)
    if lam > SHARP_BOUND_THRESHOLD:
        base = _ewma_ratio(lam)
        lo = math.sqrt(lam ** (-1.2) * base)
        damp = 1.0 - 2.0 * math.exp(-2.0 * math.pi**2 / -math.log(lam))
        hi = math.sqrt(lam ** (-1.25) * base) / damp
        return lo, hi
    g = q_gamma(0.5, lam * lam)
    lo = math.sqrt(0.5 * math.pi * (1.0 + lam)) / g
    return lo, lo / math.sqrt(lam)


def v_bounds(lam):
    """Lower/upper bounds on V(lambda)."""
    lam = as_lambda(lam)
    base = _ewma_ratio(lam)
    if lam > SHARP_BOUND_THRESHOLD:
        return lam ** (-1.45) * base, lam ** (-1.5) * base
    return base / lam, base / (lam * lam)


def multipliers(lam, settings: QuadratureSettings | None = None) -> MultiplierResult:
    u, ue = compute_U(lam, settings)
    v, ve = compute_V(lam, settings)
    return MultiplierResult(u, v, ue, ve, u_bounds(lam), v_bounds(lam))


# ---------------------------------------------------------------------------
# simple moving average window


def sma_multipliers(L: int):
    """Closed-form (U, V) for a length-L simple moving average of squared returns."""
    if int(L) != L or L <= 2:
        raise DomainError(f"SMA window must be an integer >= 3, got {L!r}")
    L = int(L)
    u = math.exp(0.5 * math.log(L / 2.0) + gammaln((L - 1) / 2.0) - gammaln(L / 2.0))
    return u, L / (L - 2.0)


def sma_multipliers_quadrature(L: int, abs_tol: float = 1e-11):
    """(U, V) for the SMA window by direct quadrature of the Laplace representation.

    With xi = Z^2 and weights 1/L on L terms the product collapses to
    (1 + 2t/L)^(-L/2); U uses kernel 1/sqrt(pi t), V the unit kernel.
    """
    if int(L) != L or L <= 2:
        raise DomainError(f"SMA window must be an integer >= 3, got {L!r}")
    L = int(L)

    def phi(t):
        return math.exp(-0.5 * L * math.log1p(2.0 * t / L))

    v = integrate.quad(phi, 0, 1, epsabs=abs_tol, epsrel=1e-13)[0] + integrate.quad(
        phi, 1, np.inf, epsabs=abs_tol, epsrel=1e-13, limit=500)[0]
    # t = s^2 removes the 1/sqrt(t) singularity
    def phi_u(s):
        return 2.0 / math.sqrt(math.pi) * phi(s * s)

    u = integrate.quad(phi_u, 0, 1, epsabs=abs_tol, epsrel=1e-13)[0] + integrate.quad(
        phi_u, 1, np.inf, epsabs=abs_tol, epsrel=1e-13, limit=500)[0]
    return u, v
