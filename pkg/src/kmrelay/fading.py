"""kappa-mu power distribution: density, distribution function and sampling.

The power Z = h^2 of a kappa-mu channel is a Poisson mixture of gammas:
J ~ Poisson(kappa*mu), Z | J ~ Gamma(shape mu + J, scale omega / phi) with
phi = mu (1 + kappa). The distribution function is therefore the series

    F(z) = sum_q Pois(q; kappa mu) P(mu + q, phi z / omega)

with P the regularized lower incomplete gamma function.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import mathkern
from .series import (
    DEFAULT_POLICY,
    SeriesConvergenceError,
    SeriesPolicy,
    SeriesValue,
    poisson_mixture,
)


@dataclass(frozen=True)
class KappaMuParams:
    """One fading link: dominant/scattered power ratio, cluster count, mean power."""

    kappa: float = 0.0
    mu: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        for name in ("kappa", "mu", "omega"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if self.kappa < 0.0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if self.mu <= 0.0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if self.omega <= 0.0:
            raise ValueError(f"omega must be > 0, got {self.omega}")

    @property
    def phi(self) -> float:
        return self.mu * (1.0 + self.kappa)

    @property
    def poisson_rate(self) -> float:
        return self.kappa * self.mu

    @property
    def log_upsilon(self) -> float:
        """ln of the density's normalizing constant (kappa > 0 only)."""
        k, m, w = self.kappa, self.mu, self.omega
        return (math.log(m) + 0.5 * (m + 1.0) * math.log1p(k) - m * k
                - 0.5 * (m - 1.0) * math.log(k) - 0.5 * (m + 1.0) * math.log(w))


class FadingKind(enum.Enum):
    GENERAL = "kappa-mu"
    RICE = "rice"
    NAKAGAMI = "nakagami"
    RAYLEIGH = "rayleigh"


def rice(k_factor: float, omega: float = 1.0) -> KappaMuParams:
    return KappaMuParams(kappa=k_factor, mu=1.0, omega=omega)


def nakagami(m: float, omega: float = 1.0) -> KappaMuParams:
    return KappaMuParams(kappa=0.0, mu=m, omega=omega)


def rayleigh(omega: float = 1.0) -> KappaMuParams:
    return KappaMuParams(kappa=0.0, mu=1.0, omega=omega)


def classify(p: KappaMuParams) -> FadingKind:
    """Most specific named family the parameters belong to."""
    if p.kappa == 0.0:
        return FadingKind.RAYLEIGH if p.mu == 1.0 else FadingKind.NAKAGAMI
    if p.mu == 1.0:
        return FadingKind.RICE
    return FadingKind.GENERAL


def _check_z(z):
    z = float(z)
    if math.isnan(z) or z < 0.0:
        raise mathkern.DomainError(f"power z must be >= 0, got {z}")
    return z


def log_pdf(p: KappaMuParams, z: float) -> float:
    z = _check_z(z)
    k, m, w = p.kappa, p.mu, p.omega
    if z == 0.0:
        if m > 1.0:
            return -math.inf
        if m < 1.0:
            return math.inf
        return math.log(p.phi / w) - k * m
    if k == 0.0:
        # gamma density, shape mu, mean omega
        rate = m / w
        return m * math.log(rate) + (m - 1.0) * math.log(z) - rate * z - mathkern.log_gamma(m)
    arg = 2.0 * m * math.sqrt(k * (1.0 + k) * z / w)
    return (p.log_upsilon + 0.5 * (m - 1.0) * math.log(z) - p.phi * z / w
            + mathkern.log_bessel_i(m - 1.0, arg))


def pdf(p: KappaMuParams, z: float) -> float:
    """Density of the channel power Z at z."""
    return math.exp(log_pdf(p, z))


def _lower_form(p: KappaMuParams, z: float) -> bool:
    # sum lower incomplete gammas while z sits below the mixture's bulk,
    # upper ones beyond it; both truncate by the same Poisson tail bound
    return p.phi * z / p.omega <= p.mu + p.poisson_rate


class SplitValue(NamedTuple):
    """A probability and its complement, each computed without cancellation
    in whichever tail the series was summed."""

    cdf: float
    sf: float
    terms: int
    converged: bool


def cdf_split(p: KappaMuParams, z: float, policy: SeriesPolicy = DEFAULT_POLICY) -> SplitValue:
    z = _check_z(z)
    if math.isinf(z):
        return SplitValue(1.0, 0.0, 0, True)
    x = p.phi * z / p.omega
    m, lam = p.mu, p.poisson_rate
    if _lower_form(p, z):
        r = poisson_mixture(lam, lambda q: mathkern.gamma_lower_reg(m + q, x),
                            policy, policy.max_terms_outer)
        return SplitValue(r.value, 1.0 - r.value, r.terms, r.converged)
    r = poisson_mixture(lam, lambda q: mathkern.gamma_upper_reg(m + q, x),
                        policy, policy.max_terms_outer, increasing=True)
    return SplitValue(1.0 - r.value, r.value, r.terms, r.converged)


def cdf_series(p: KappaMuParams, z: float, policy: SeriesPolicy = DEFAULT_POLICY,
               upper: bool = False) -> SeriesValue:
    """Series for F(z) (or 1 - F(z) with ``upper``) with convergence diagnostics."""
    r = cdf_split(p, z, policy)
    return SeriesValue(r.sf if upper else r.cdf, r.terms, r.converged)


def _strict(result: SeriesValue, what: str) -> float:
    if not result.converged:
        raise SeriesConvergenceError(
            f"{what} series did not converge within {result.terms} terms")
    return min(max(result.value, 0.0), 1.0)


def cdf(p: KappaMuParams, z: float, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """Pr[Z <= z]; raises SeriesConvergenceError if the term budget runs out."""
    return _strict(cdf_series(p, z, policy), "cdf")


def ccdf(p: KappaMuParams, z: float, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """Pr[Z > z], summed directly in the upper tail so small values keep relative accuracy."""
    return _strict(cdf_series(p, z, policy, upper=True), "ccdf")


def sample(p: KappaMuParams, rng: np.random.Generator, size=None):
    """Draw channel powers via the Poisson-gamma mixture (exact for real mu)."""
    j = rng.poisson(p.poisson_rate, size=size)
    g = rng.gamma(p.mu + j, size=size)
    return g * (p.omega / p.phi)
