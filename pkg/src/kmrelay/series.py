"""Truncation policy and the Poisson-weighted summation shared by all series.

Every infinite sum in the outage expressions has the shape

    sum_j  e^{-lam} lam^j / j!  *  g(j),     0 <= g(j) <= 1,

where ``g`` is a conditional probability that is monotone in ``j``. That gives
a rigorous stopping rule: the unsummed remainder is at most the Poisson tail
mass beyond ``j`` times a bound on ``g`` (``g(j)`` itself when ``g`` is
decreasing, 1 when increasing).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

from scipy import special as sp


class SeriesConvergenceError(ArithmeticError):
    """An infinite series hit its term budget before reaching tolerance."""


@dataclass(frozen=True)
class SeriesPolicy:
    """Truncation control for every infinite series.

    ``fixed_terms`` switches off adaptive stopping: each sum then uses
    exactly that many terms (20 reproduces the classic evaluation setting).
    Adaptive sums stop once the remainder bound drops below
    ``max(rel_tol * partial_sum, abs_tol)``.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-17
    max_terms_outer: int = 200
    max_terms_inner: int = 200
    fixed_terms: Optional[int] = None

    def __post_init__(self):
        if not self.rel_tol > 0.0:
            raise ValueError(f"rel_tol must be > 0, got {self.rel_tol}")
        if not self.abs_tol >= 0.0:
            raise ValueError(f"abs_tol must be >= 0, got {self.abs_tol}")
        if self.max_terms_outer < 1 or self.max_terms_inner < 1:
            raise ValueError("max_terms_outer and max_terms_inner must be >= 1")
        if self.fixed_terms is not None and self.fixed_terms < 1:
            raise ValueError(f"fixed_terms must be >= 1, got {self.fixed_terms}")

    @classmethod
    def fixed(cls, terms: int = 20) -> "SeriesPolicy":
        return cls(fixed_terms=terms)


DEFAULT_POLICY = SeriesPolicy()


class SeriesValue(NamedTuple):
    value: float
    terms: int
    converged: bool


def poisson_log_weight(lam: float, j: int) -> float:
    """ln of the Poisson(lam) mass at j (lam = 0 puts all mass on j = 0)."""
    if lam == 0.0:
        return 0.0 if j == 0 else -math.inf
    return j * math.log(lam) - lam - math.lgamma(j + 1.0)


def poisson_tail(lam: float, j: int) -> float:
    """Pr[N >= j] for N ~ Poisson(lam)."""
    if j <= 0:
        return 1.0
    if lam == 0.0:
        return 0.0
    return float(sp.gammainc(j, lam))


def poisson_mixture(
    lam: float,
    g: Callable[[int], float],
    policy: SeriesPolicy,
    max_terms: int,
    increasing: bool = False,
) -> SeriesValue:
    """Sum ``sum_j Pois(j; lam) g(j)`` for a monotone g with values in [0, 1]."""
    if policy.fixed_terms is not None:
        total = 0.0
        for j in range(policy.fixed_terms):
            total += math.exp(poisson_log_weight(lam, j)) * g(j)
        return SeriesValue(total, policy.fixed_terms, True)

    total = 0.0
    for j in range(max_terms):
        w = math.exp(poisson_log_weight(lam, j))
        gj = g(j)
        total += w * gj
        bound = poisson_tail(lam, j + 1) * (1.0 if increasing else gj)
        if bound <= max(policy.rel_tol * total, policy.abs_tol):
            return SeriesValue(total, j + 1, True)
    return SeriesValue(total, max_terms, False)
