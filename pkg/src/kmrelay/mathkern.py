"""Scalar special functions with domain checks and log-domain companions.

Values come from :mod:`scipy.special` (exponentially scaled variants where
possible). When a scaled value is unavailable, the log companions fall back
to the large-argument expansion, a log-domain power series (I) or a ratio
recurrence over the order (K), so ``log_bessel_*`` stay finite far beyond
double range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


@dataclass(frozen=True)
class Accuracy:
    """Truncation control for the internal series fallbacks."""

    rel_tol: float = 1e-15
    max_iter: int = 10_000

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1e-3):
            raise DomainError(f"rel_tol must lie in (0, 1e-3), got {self.rel_tol}")
        if self.max_iter < 1:
            raise DomainError(f"max_iter must be >= 1, got {self.max_iter}")


DEFAULT_ACCURACY = Accuracy()


def _finite(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")
    return value


def log_gamma(s):
    """ln Gamma(s) for s > 0."""
    s = _finite("s", s)
    if s <= 0.0:
        raise DomainError(f"log_gamma needs s > 0, got {s}")
    return float(sp.gammaln(s))


# -- modified Bessel function of the first kind ------------------------------

def _check_bessel_i(v, x):
    v = _finite("v", v)
    x = _finite("x", x)
    if x < 0.0:
        raise DomainError(f"bessel_i needs x >= 0, got {x}")
    # I_v is positive on x > 0 for v > -1; the kappa-mu density needs v = mu - 1 > -1
    if v <= -1.0:
        raise DomainError(f"bessel_i needs v > -1, got {v}")
    return v, x


def bessel_i(v, x):
    """Modified Bessel function of the first kind I_v(x).

    Returns ``inf`` once the true value exceeds double range; use
    :func:`log_bessel_i` there.
    """
    v, x = _check_bessel_i(v, x)
    return float(sp.iv(v, x))


def _log_bessel_i_series(v, x, acc):
    # I_v(x) = (x/2)^v sum_k (x^2/4)^k / (k! Gamma(v+k+1)), terms summed in log space
    log_q = 2.0 * math.log(0.5 * x)
    log_term = -sp.gammaln(v + 1.0)
    log_sum = log_term
    for k in range(1, acc.max_iter):
        log_term += log_q - math.log(k) - math.log(v + k)
        log_sum = np.logaddexp(log_sum, log_term)
        # terms decrease once k exceeds ~x/2
        if k > x and log_term < log_sum + math.log(acc.rel_tol):
            break
    return v * math.log(0.5 * x) + float(log_sum)


def _log_hankel(v, x, sign, acc):
    # ln of the large-x series 1 + sum_k sign^k prod_{j<=k} (4v^2 - (2j-1)^2) / (8 j x);
    # callers only reach it with x far above v^2, where it converges fast
    mu = 4.0 * v * v
    total, term = 1.0, 1.0
    for j in range(1, acc.max_iter):
        term *= sign * (mu - (2 * j - 1) ** 2) / (8.0 * j * x)
        total += term
        if abs(term) <= acc.rel_tol * abs(total):
            break
    return math.log(total)


def _large_argument(v, x):
    return x > 1e8 and x > 1e4 * v * v


def log_bessel_i(v, x, accuracy: Accuracy = DEFAULT_ACCURACY):
    """ln I_v(x); ``-inf`` at x = 0 for v > 0."""
    v, x = _check_bessel_i(v, x)
    if x == 0.0:
        if v == 0.0:
            return 0.0
        return -math.inf if v > 0.0 else math.inf
    scaled = float(sp.ive(v, x))
    if 0.0 < scaled < math.inf:
        return math.log(scaled) + x
    if _large_argument(v, x):
        # the exponentially small second Hankel branch is below double precision here
        return x - 0.5 * math.log(2.0 * math.pi * x) + _log_hankel(v, x, -1.0, accuracy)
    return _log_bessel_i_series(v, x, accuracy)


# -- modified Bessel function of the second kind -----------------------------

def _check_bessel_k(v, x):
    v = abs(_finite("v", v))
    x = _finite("x", x)
    if x <= 0.0:
        raise DomainError(f"bessel_k needs x > 0, got {x}")
    return v, x


def bessel_k(v, x):
    """Modified Bessel function of the second kind K_v(x), even in v."""
    v, x = _check_bessel_k(v, x)
    return float(sp.kv(v, x))


def log_bessel_k(v, x, accuracy: Accuracy = DEFAULT_ACCURACY):
    """ln K_v(x), finite even where K_v(x) overflows (large |v|, small x)."""
    v, x = _check_bessel_k(v, x)
    if v < 1e-150:
        # K is even and smooth in v, so this is exact to O(v^2); scipy
        # returns nan for subnormal orders
        v = 0.0
    scaled = float(sp.kve(v, x))
    if 0.0 < scaled < math.inf:
        return math.log(scaled) - x
    if _large_argument(v, x):
        return 0.5 * math.log(math.pi / (2.0 * x)) - x + _log_hankel(v, x, 1.0, accuracy)
    if v >= 0.5 and x < 1e-100:
        # leading small-argument term, relative error O(x^2)
        return float(sp.gammaln(v)) - math.log(2.0) + v * math.log(2.0 / x)
    n = int(math.floor(v))
    if n == 0:
        raise DomainError(f"K_{v}({x}) is not representable")
    if n - 1 > accuracy.max_iter:
        raise DomainError(f"order {v} exceeds the recurrence budget")
    frac = v - n
    log_lo = log_bessel_k(frac, x, accuracy)
    log_k = log_bessel_k(frac + 1.0, x, accuracy)
    # r_nu = K_{nu+1}/K_nu obeys r_nu = 1/r_{nu-1} + 2 nu / x, all positive
    ratio = math.exp(log_k - log_lo)
    nu = frac + 1.0
    for _ in range(n - 1):
        ratio = 1.0 / ratio + 2.0 * nu / x
        log_k += math.log(ratio)
        nu += 1.0
    return log_k


# -- incomplete gamma functions ----------------------------------------------

def _check_gamma(s, x):
    s = _finite("s", s)
    x = float(x)
    if math.isnan(x):
        raise DomainError("x must not be NaN")
    if s <= 0.0:
        raise DomainError(f"incomplete gamma needs s > 0, got {s}")
    if x < 0.0:
        raise DomainError(f"incomplete gamma needs x >= 0, got {x}")
    return s, x


def gamma_lower_reg(s, x):
    """Regularized lower incomplete gamma P(s, x) = gamma(s, x) / Gamma(s)."""
    s, x = _check_gamma(s, x)
    return float(sp.gammainc(s, x))


def gamma_upper_reg(s, x):
    """Regularized upper incomplete gamma Q(s, x) = 1 - P(s, x)."""
    s, x = _check_gamma(s, x)
    return float(sp.gammaincc(s, x))


def gamma_lower(s, x):
    """Lower incomplete gamma function gamma(s, x)."""
    s, x = _check_gamma(s, x)
    return float(sp.gammainc(s, x) * sp.gamma(s))


def gamma_upper(s, x):
    """Upper incomplete gamma function Gamma(s, x) = Gamma(s) - gamma(s, x)."""
    s, x = _check_gamma(s, x)
    return float(sp.gammaincc(s, x) * sp.gamma(s))
