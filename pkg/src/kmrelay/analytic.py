"""Closed-form ergodic outage probability of the harvesting full-duplex relay.

Outage happens when either hop's rate drops below c_th, i.e. when the
loop-back power exceeds b/upsilon or the product W = h1^2 h2^2 falls below
upsilon/a. With the three links independent,

    P_out = 1 - F_Z(b / upsilon) * (1 - F_W(upsilon / a)).

F_Z is the kappa-mu series of :mod:`kmrelay.fading`. F_W expands both
channel powers as Poisson mixtures of gammas (shapes mu1 + n and mu2 + l).
For integer mu1 + n the conditional survival of the product is a finite sum
of K-Bessel terms:

    Pr[G_{mu1+n} H_{mu2+l} > s] = sum_{k=0}^{mu1+n-1}
        2 s^{(mu2+l+k)/2} K_{mu2+l-k}(2 sqrt(s)) / (k! Gamma(mu2+l)),

with s = phi1 phi2 upsilon / a. Every term is assembled in log space.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, NamedTuple

import numpy as np
from scipy import integrate

from . import fading, mathkern
from .fading import KappaMuParams
from .series import (
    DEFAULT_POLICY,
    SeriesPolicy,
    SeriesValue,
    poisson_log_weight,
    poisson_mixture,
    poisson_tail,
)
from .sysmodel import ParameterError, SystemParams

LOG2 = math.log(2.0)


class Method(str, enum.Enum):
    UNIFIED = "unified"
    RICE = "rice"
    NAKAGAMI = "nakagami"
    RAYLEIGH = "rayleigh"
    RAYLEIGH_HIGH_SNR = "rayleigh_highsnr"


@dataclass(frozen=True)
class OutageResult:
    value: float
    method: Method
    terms_used: Dict[str, int] = field(default_factory=dict)
    converged: bool = True
    raw: float = math.nan

    def __float__(self):
        return self.value


def _result(raw, method, terms=None, converged=True):
    return OutageResult(min(max(raw, 0.0), 1.0), method, dict(terms or {}), converged, raw)


def _is_integer(x: float) -> bool:
    return abs(x - round(x)) < 1e-12


# -- product of two kappa-mu powers -----------------------------------------

class _Split(NamedTuple):
    cdf: float
    sf: float
    terms: Dict[str, int]
    converged: bool


class _ProductSurvival:
    """Conditional survival S(n, l) = Pr[G_{mx+n} H_{my+l} > s] for integer mx.

    S(n, l) grows with n by one K-Bessel term, so each column l keeps a
    running cumulative sum.
    """

    def __init__(self, mx: int, my: float, s: float):
        self.mx = mx
        self.my = my
        self.log_s = math.log(s)
        self.arg = 2.0 * math.sqrt(s)
        self._log_k = {}
        self._columns = {}

    def _log_bessel(self, j):
        # order my + j with j = l - k an integer offset
        if j not in self._log_k:
            self._log_k[j] = mathkern.log_bessel_k(self.my + j, self.arg)
        return self._log_k[j]

    def _term(self, k, l):
        return math.exp(LOG2 - math.lgamma(k + 1.0) - math.lgamma(self.my + l)
                        + 0.5 * (self.my + l + k) * self.log_s + self._log_bessel(l - k))

    def __call__(self, n: int, l: int) -> float:
        col = self._columns.setdefault(l, [])
        top = self.mx + n  # number of k terms
        while len(col) < top:
            k = len(col)
            col.append((col[-1] if col else 0.0) + self._term(k, l))
        return min(col[top - 1], 1.0)


def _product_series(x: KappaMuParams, y: KappaMuParams, t: float, policy: SeriesPolicy) -> _Split:
    mx = int(round(x.mu))
    s = x.phi * y.phi * t / (x.omega * y.omega)
    surv = _ProductSurvival(mx, y.mu, s)
    # sum the tail that is small: below the product's bulk the cdf, above it the survival
    upper = s > (x.mu + x.poisson_rate) * (y.mu + y.poisson_rate)
    inner_terms = []
    inner_ok = []

    def column(l):
        if upper:
            g = lambda n: surv(n, l)
        else:
            g = lambda n: max(1.0 - surv(n, l), 0.0)
        r = poisson_mixture(x.poisson_rate, g, policy, policy.max_terms_inner, increasing=upper)
        inner_terms.append(r.terms)
        inner_ok.append(r.converged)
        return min(r.value, 1.0)

    outer = poisson_mixture(y.poisson_rate, column, policy, policy.max_terms_outer,
                            increasing=upper)
    terms = {"l": outer.terms, "n": max(inner_terms)}
    ok = outer.converged and all(inner_ok)
    if upper:
        return _Split(1.0 - outer.value, outer.value, terms, ok)
    return _Split(outer.value, 1.0 - outer.value, terms, ok)


def _product_quadrature(x: KappaMuParams, y: KappaMuParams, t: float,
                        policy: SeriesPolicy) -> _Split:
    """Pr[XY <= t] = int F_X(t/u) f_Y(u) du, integrated over ln u."""
    upper = x.phi * y.phi * t / (x.omega * y.omega) > (x.mu + x.poisson_rate) * (y.mu + y.poisson_rate)
    max_terms = [0]
    ok = [True]

    def integrand(v):
        u = y.omega * math.exp(v)
        if u == 0.0 or math.isinf(u):
            return 0.0
        dens = math.exp(fading.log_pdf(y, u) + math.log(y.omega) + v)
        if dens == 0.0:
            return 0.0
        r = fading.cdf_split(x, t / u, policy)
        max_terms[0] = max(max_terms[0], r.terms)
        ok[0] = ok[0] and r.converged
        return (r.sf if upper else r.cdf) * dens

    total, err = 0.0, 0.0
    for lo, hi in ((-math.inf, -4.0), (-4.0, 3.0), (3.0, math.inf)):
        val, e = integrate.quad(integrand, lo, hi, epsabs=1e-13, epsrel=1e-11, limit=200)
        total += val
        err += e
    converged = ok[0] and err <= max(1e-9, policy.rel_tol * abs(total))
    terms = {"n": max_terms[0], "quad": 1}
    if upper:
        return _Split(1.0 - total, total, terms, converged)
    return _Split(total, 1.0 - total, terms, converged)


def product_cdf_split(x: KappaMuParams, y: KappaMuParams, t: float,
                      policy: SeriesPolicy = DEFAULT_POLICY) -> _Split:
    """Pr[XY <= t] and its complement for independent kappa-mu powers X, Y.

    The finite K-Bessel sum needs an integer shape on one factor; the product
    is symmetric, so the factors are swapped when only mu2 is an integer.
    With neither integer the density-weighted integral is evaluated instead.
    """
    if t <= 0.0:
        return _Split(0.0, 1.0, {}, True)
    if math.isinf(t):
        return _Split(1.0, 0.0, {}, True)
    if _is_integer(x.mu):
        return _product_series(x, y, t, policy)
    if _is_integer(y.mu):
        return _product_series(y, x, t, policy)
    return _product_quadrature(x, y, t, policy)


def cdf_loopback(sys: SystemParams, upsilon: float, policy: SeriesPolicy = DEFAULT_POLICY) -> SeriesValue:
    """Pr[Z <= b/upsilon]: probability the relay hop supports SNR threshold upsilon."""
    if upsilon <= 0.0:
        raise mathkern.DomainError(f"upsilon must be > 0, got {upsilon}")
    return fading.cdf_series(sys.link3, sys.b / upsilon, policy)


def cdf_product(sys: SystemParams, upsilon: float, policy: SeriesPolicy = DEFAULT_POLICY) -> SeriesValue:
    """Pr[h1^2 h2^2 <= upsilon/a]: probability the destination SNR falls below upsilon."""
    if upsilon <= 0.0:
        raise mathkern.DomainError(f"upsilon must be > 0, got {upsilon}")
    r = product_cdf_split(sys.link1, sys.link2, upsilon / sys.a, policy)
    return SeriesValue(r.cdf, sum(r.terms.values()), r.converged)


# -- outage expressions -------------------------------------------------------

def outage_unified(sys: SystemParams, policy: SeriesPolicy = DEFAULT_POLICY) -> OutageResult:
    """Outage for arbitrary kappa-mu links."""
    ups = sys.upsilon
    if ups == 0.0:
        return _result(0.0, Method.UNIFIED)
    fz = fading.cdf_split(sys.link3, sys.b / ups, policy)
    fw = product_cdf_split(sys.link1, sys.link2, ups / sys.a, policy)
    raw = 1.0 - fz.cdf * fw.sf
    terms = {"q": fz.terms, **fw.terms}
    return _result(raw, Method.UNIFIED, terms, fz.converged and fw.converged)


def _require(cond, name, message):
    if not cond:
        raise ParameterError(name, message)


def _truncation(lam: float, policy: SeriesPolicy, cap: int):
    """A-priori term count leaving Poisson(lam) tail mass below rel_tol/100."""
    if policy.fixed_terms is not None:
        return policy.fixed_terms, True
    for n in range(1, cap + 1):
        if poisson_tail(lam, n) <= 1e-2 * policy.rel_tol:
            return n, True
    return cap, False


def outage_rice(sys: SystemParams, policy: SeriesPolicy = DEFAULT_POLICY) -> OutageResult:
    """Outage with Rice links (mu = 1 on every hop).

    A direct triple sum with a-priori truncation, kept apart from the
    unified path so the two cross-check each other.
    """
    for i, link in enumerate(sys.links, 1):
        _require(link.mu == 1.0, f"mu{i}", f"Rice fading needs mu = 1, got {link.mu}")
    ups = sys.upsilon
    if ups == 0.0:
        return _result(0.0, Method.RICE)
    k1, k2, k3 = (link.kappa for link in sys.links)
    n_q, ok_q = _truncation(k3, policy, policy.max_terms_outer)
    n_n, ok_n = _truncation(k1, policy, policy.max_terms_outer)
    n_l, ok_l = _truncation(k2, policy, policy.max_terms_inner)

    x3 = (1.0 + k3) * sys.b / (ups * sys.link3.omega)
    f_z = sum(math.exp(poisson_log_weight(k3, q)) * mathkern.gamma_lower_reg(q + 1.0, x3)
              for q in range(n_q))

    s = (1.0 + k1) * (1.0 + k2) * ups / (sys.a * sys.link1.omega * sys.link2.omega)
    arg = 2.0 * math.sqrt(s)
    log_s = math.log(s)
    log_k = {j: mathkern.log_bessel_k(1 + j, arg) for j in range(-n_n, n_l + 1)}
    sf_w = 0.0
    for n in range(n_n):
        wn = poisson_log_weight(k1, n)
        if wn == -math.inf:
            continue
        for l in range(n_l):
            wl = poisson_log_weight(k2, l)
            if wl == -math.inf:
                continue
            k = np.arange(n + 1)
            logs = np.array([log_k[l - kk] for kk in k])
            terms = np.exp(wn + wl + LOG2 - np.array([math.lgamma(kk + 1.0) for kk in k])
                           - math.lgamma(l + 1.0) + 0.5 * (l + 1 + k) * log_s + logs)
            sf_w += float(terms.sum())
    raw = 1.0 - f_z * sf_w
    return _result(raw, Method.RICE, {"q": n_q, "n": n_n, "l": n_l}, ok_q and ok_n and ok_l)


def outage_nakagami(sys: SystemParams) -> OutageResult:
    """Finite closed form for Nakagami-m links (kappa = 0 everywhere)."""
    for i, link in enumerate(sys.links, 1):
        _require(link.kappa == 0.0, f"kappa{i}", f"Nakagami fading needs kappa = 0, got {link.kappa}")
    x, y = sys.link1, sys.link2
    if not _is_integer(x.mu):
        _require(_is_integer(y.mu), "mu1", f"needs an integer m on link 1 or 2, got {x.mu}, {y.mu}")
        x, y = y, x
    ups = sys.upsilon
    if ups == 0.0:
        return _result(0.0, Method.NAKAGAMI)
    m1, m2, m3 = int(round(x.mu)), y.mu, sys.link3.mu
    relay_ok = mathkern.gamma_lower_reg(m3, m3 * sys.b / (ups * sys.link3.omega))
    s = m1 * m2 * ups / (sys.a * x.omega * y.omega)
    arg = 2.0 * math.sqrt(s)
    dest_ok = 0.0
    for k in range(m1):
        dest_ok += math.exp(LOG2 - math.lgamma(k + 1.0) - math.lgamma(m2)
                            + 0.5 * (m2 + k) * math.log(s) + mathkern.log_bessel_k(m2 - k, arg))
    return _result(1.0 - relay_ok * dest_ok, Method.NAKAGAMI, {}, True)


def _require_rayleigh(sys):
    for i, link in enumerate(sys.links, 1):
        _require(link.kappa == 0.0 and link.mu == 1.0, f"link{i}",
                 f"Rayleigh fading needs kappa = 0 and mu = 1, got {link.kappa}, {link.mu}")


def outage_rayleigh(sys: SystemParams) -> OutageResult:
    _require_rayleigh(sys)
    ups = sys.upsilon
    if ups == 0.0:
        return _result(0.0, Method.RAYLEIGH)
    z = 2.0 * math.sqrt(ups / (sys.a * sys.link1.omega * sys.link2.omega))
    dest_ok = math.exp(math.log(z) + mathkern.log_bessel_k(1.0, z))
    relay_ok = -math.expm1(-sys.b / (ups * sys.link3.omega))
    return _result(1.0 - relay_ok * dest_ok, Method.RAYLEIGH)


def outage_rayleigh_highsnr(sys: SystemParams) -> OutageResult:
    """Rayleigh outage with z K_1(z) replaced by 1: exp(-b/upsilon)."""
    _require_rayleigh(sys)
    ups = sys.upsilon
    if ups == 0.0:
        return _result(0.0, Method.RAYLEIGH_HIGH_SNR)
    return _result(math.exp(-sys.b / (ups * sys.link3.omega)), Method.RAYLEIGH_HIGH_SNR)


def applicable_methods(sys: SystemParams):
    """Methods whose preconditions the links satisfy, most general first."""
    methods = [Method.UNIFIED]
    if all(link.mu == 1.0 for link in sys.links):
        methods.append(Method.RICE)
    if all(link.kappa == 0.0 for link in sys.links) and (
            _is_integer(sys.link1.mu) or _is_integer(sys.link2.mu)):
        methods.append(Method.NAKAGAMI)
    if all(link.kappa == 0.0 and link.mu == 1.0 for link in sys.links):
        methods += [Method.RAYLEIGH, Method.RAYLEIGH_HIGH_SNR]
    return methods


def outage(sys: SystemParams, method, policy: SeriesPolicy = DEFAULT_POLICY) -> OutageResult:
    method = Method(method)
    if method is Method.UNIFIED:
        return outage_unified(sys, policy)
    if method is Method.RICE:
        return outage_rice(sys, policy)
    if method is Method.NAKAGAMI:
        return outage_nakagami(sys)
    if method is Method.RAYLEIGH:
        return outage_rayleigh(sys)
    return outage_rayleigh_highsnr(sys)
