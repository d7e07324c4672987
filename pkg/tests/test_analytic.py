import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special as sp

from kmrelay import analytic as an
from kmrelay import fading as fd
from kmrelay.analytic import Method
from kmrelay.fading import KappaMuParams
from kmrelay.series import SeriesPolicy
from kmrelay.sysmodel import ParameterError, SystemParams, mc_outage

TIGHT = SeriesPolicy(rel_tol=1e-13)

# Pr[Z <= 2] for kappa=2, mu=1.5: mpmath quadrature of the Bessel density (25 digits)
LOOPBACK_K2_M1P5 = 0.9308952862266831286176653
# Pr[XY <= 0.1], X ~ (1, 2), Y ~ (1, 1): 2-D quadrature of the joint density in
# log coordinates; a 1-D quadrature of F_X(t/y) f_Y(y) agrees to 3e-15
PRODUCT_K1M2_K1M1 = 0.11683565073479374


def links(k1, m1, k2, m2, k3, m3):
    return dict(link1=KappaMuParams(k1, m1), link2=KappaMuParams(k2, m2),
                link3=KappaMuParams(k3, m3))


def ten_a():
    # zeta = 1 and unit distances: a = ps / sigma_d2 = 10
    return SystemParams(alpha=0.5, eta=1.0, ps=1.0, d1=1.0, d2=1.0, sigma_d2=0.1,
                        **links(1.0, 2.0, 1.0, 1.0, 2.0, 1.5))


# -- intermediate distribution functions -----------------------------------

def test_loopback_reference():
    s = ten_a()
    assert s.b == pytest.approx(1.0)
    r = an.cdf_loopback(s, 0.5, TIGHT)
    assert r.converged
    assert r.value == pytest.approx(LOOPBACK_K2_M1P5, rel=1e-13)


def test_product_reference():
    s = ten_a()
    assert s.a == pytest.approx(10.0)
    r = an.cdf_product(s, 1.0, TIGHT)
    assert r.converged
    assert r.value == pytest.approx(PRODUCT_K1M2_K1M1, rel=1e-12)


def test_product_reference_monte_carlo():
    rng = np.random.default_rng(20)
    n = 4_000_000
    x = fd.sample(KappaMuParams(1.0, 2.0), rng, n)
    y = fd.sample(KappaMuParams(1.0, 1.0), rng, n)
    p = np.mean(x * y <= 0.1)
    assert abs(p - PRODUCT_K1M2_K1M1) < 4.0 * math.sqrt(p * (1 - p) / n)


def test_loopback_nakagami_reduction():
    s = SystemParams(**links(0, 1, 0, 1, 0.0, 2.5))
    for ups in (0.1, 1.0, 7.0):
        expected = sp.gammainc(2.5, 2.5 * s.b / ups)
        assert an.cdf_loopback(s, ups).value == pytest.approx(expected, rel=1e-13)


def test_loopback_limits_and_monotone():
    s = SystemParams(**links(0, 1, 0, 1, 2.0, 1.5))
    assert an.cdf_loopback(s, 1e-12).value == pytest.approx(1.0)
    assert an.cdf_loopback(s, 1e12).value == pytest.approx(0.0, abs=1e-9)
    vals = [an.cdf_loopback(s, u).value for u in np.geomspace(0.01, 100, 30)]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


def test_product_nakagami_reduction():
    s = SystemParams(**links(0.0, 2.0, 0.0, 3.0, 0, 1))
    ups = s.upsilon
    m1, m2 = 2, 3.0
    z = 2.0 * math.sqrt(m1 * m2 * ups / s.a)
    sf = sum(2.0 / (math.factorial(k) * math.gamma(m2)) * (m1 * m2 * ups / s.a) ** ((m2 + k) / 2)
             * sp.kv(m2 - k, z) for k in range(m1))
    assert an.cdf_product(s, ups).value == pytest.approx(1.0 - sf, rel=1e-12, abs=1e-15)


def test_product_limits():
    s = SystemParams(**links(1.0, 2.0, 0.5, 1.0, 0, 1))
    assert an.cdf_product(s, 1e-300).value == pytest.approx(0.0, abs=1e-12)
    assert an.cdf_product(s, 1e300).value == pytest.approx(1.0)
    with pytest.raises(ValueError):
        an.cdf_product(s, 0.0)
    with pytest.raises(ValueError):
        an.cdf_loopback(s, -1.0)


def test_product_is_symmetric():
    x, y = KappaMuParams(0.7, 3.0), KappaMuParams(2.0, 1.0)
    for t in (0.01, 0.5, 4.0):
        a = an.product_cdf_split(x, y, t, TIGHT)
        b = an.product_cdf_split(y, x, t, TIGHT)
        assert a.cdf == pytest.approx(b.cdf, rel=1e-11, abs=1e-15)


@pytest.mark.parametrize("x,y", [
    (KappaMuParams(1.0, 2.0), KappaMuParams(1.0, 1.0)),
    (KappaMuParams(0.0, 3.0), KappaMuParams(2.5, 4.0)),
])
def test_quadrature_agrees_with_series(x, y):
    for t in (0.05, 1.0, 20.0):
        series = an._product_series(x, y, t, TIGHT)
        quad = an._product_quadrature(x, y, t, TIGHT)
        assert quad.cdf == pytest.approx(series.cdf, rel=1e-8, abs=1e-13)


def test_noninteger_shapes_take_swap_or_quadrature():
    # mu1 non-integer, mu2 integer: factors swap, series still used
    r = an.product_cdf_split(KappaMuParams(1.0, 1.5), KappaMuParams(1.0, 2.0), 0.3)
    assert set(r.terms) == {"l", "n"}
    # neither integer: quadrature with the independent 1-D integral as reference
    x, y = KappaMuParams(0.5, 1.5), KappaMuParams(2.0, 0.7)
    t = 0.4
    r = an.product_cdf_split(x, y, t, TIGHT)
    ref = sum(integrate.quad(lambda u: fd.pdf(y, math.exp(u)) * math.exp(u)
                             * fd.cdf(x, t * math.exp(-u), TIGHT), a, b,
                             epsabs=1e-14, epsrel=1e-12, limit=200)[0]
              for a, b in ((-60, -4), (-4, 0), (0, 3), (3, 6)))
    assert r.cdf == pytest.approx(ref, rel=1e-8)


# -- outage expressions ---------------------------------------------------

def test_zero_threshold_gives_zero_outage():
    s = SystemParams(c_th=0.0)
    for m in an.applicable_methods(s):
        assert an.outage(s, m).value == 0.0


def test_high_snr_unit_example():
    s = SystemParams(alpha=0.5, eta=1.0, c_th=0.5)
    assert s.upsilon == pytest.approx(1.0)
    assert an.outage_rayleigh_highsnr(s).value == pytest.approx(math.exp(-1.0), rel=1e-14)
    assert an.outage_rayleigh_highsnr(s).method is Method.RAYLEIGH_HIGH_SNR


def test_high_snr_monotone_in_eta_and_upsilon():
    # larger eta: smaller b, larger outage; larger upsilon: larger outage
    prev = -1.0
    for eta in (0.2, 0.4, 0.7, 1.0):
        v = an.outage_rayleigh_highsnr(SystemParams(eta=eta)).value
        assert v > prev
        prev = v
    prev = -1.0
    for c in (0.05, 0.2, 0.5, 1.0):
        v = an.outage_rayleigh_highsnr(SystemParams(c_th=c)).value
        assert v > prev
        prev = v


def test_rayleigh_perfect_link_limit():
    s = SystemParams(ps=1e12, c_th=1e-6, alpha=0.5)
    assert an.outage_rayleigh(s).value < 1e-5


def test_rayleigh_matches_nakagami_closed_form():
    for alpha in (0.05, 0.3, 0.7):
        s = SystemParams(alpha=alpha, sigma_d2=1e-4)
        assert an.outage_rayleigh(s).value == pytest.approx(an.outage_nakagami(s).value, abs=1e-12)


def test_method_preconditions():
    s = SystemParams(**links(1.0, 2.0, 0, 1, 0, 1))
    with pytest.raises(ParameterError) as info:
        an.outage_rice(s)
    assert info.value.field == "mu1"
    with pytest.raises(ParameterError):
        an.outage_nakagami(s)
    with pytest.raises(ParameterError):
        an.outage_rayleigh(s)
    with pytest.raises(ParameterError):
        an.outage_nakagami(SystemParams(**links(0, 1.5, 0, 2.5, 0, 1)))
    assert an.applicable_methods(s) == [Method.UNIFIED]
    assert an.applicable_methods(SystemParams()) == list(Method)


def test_nakagami_swaps_noninteger_m1():
    s = SystemParams(sigma_d2=1e-4, **links(0, 2.5, 0, 2.0, 0, 1.5))
    assert an.outage_nakagami(s).value == pytest.approx(an.outage_unified(s, TIGHT).value, abs=1e-10)


def test_result_records_terms_and_raw():
    s = SystemParams(sigma_d2=1e-4, **links(2.0, 2.0, 1.0, 3.0, 0.5, 1.5))
    r = an.outage_unified(s)
    assert r.converged and r.method is Method.UNIFIED
    assert set(r.terms_used) == {"q", "l", "n"}
    assert 0.0 <= r.value <= 1.0
    assert float(r) == r.value
    assert -1e-6 <= r.raw <= 1.0 + 1e-6


def test_fixed_policy_reports_fixed_counts():
    s = SystemParams(**links(2.0, 2.0, 1.0, 3.0, 0.5, 1.5))
    r = an.outage_unified(s, SeriesPolicy.fixed(20))
    assert r.terms_used["q"] == 20


def test_budget_exhaustion_flags_nonconvergence():
    s = SystemParams(sigma_d2=1e-4, **links(30.0, 3.0, 30.0, 3.0, 30.0, 3.0))
    r = an.outage_unified(s, SeriesPolicy(max_terms_outer=3, max_terms_inner=3))
    assert not r.converged
    r = an.outage_rice(replace(s, **links(30.0, 1, 30.0, 1, 30.0, 1)),
                       SeriesPolicy(max_terms_outer=3, max_terms_inner=3))
    assert not r.converged


def test_monte_carlo_agreement_nakagami_example():
    s = SystemParams(sigma_d2=1e-4, **links(0, 2.0, 0, 3.0, 0, 2.0))
    mc = mc_outage(s, 1_000_000, seed=9)
    assert abs(an.outage_nakagami(s).value - mc.estimate) <= 3 * mc.stderr


def test_monte_carlo_agreement_rice_example():
    s = SystemParams(sigma_d2=1e-4, alpha=0.3, **links(2.0, 1, 0.5, 1, 1.5, 1))
    mc = mc_outage(s, 1_000_000, seed=10)
    assert abs(an.outage_rice(s).value - mc.estimate) <= 3 * mc.stderr


def test_monte_carlo_agreement_rayleigh_ten_million():
    s = SystemParams(sigma_d2=1e-4)
    mc = mc_outage(s, 10_000_000, seed=4)
    assert abs(an.outage_rayleigh(s).value - mc.estimate) <= 3 * mc.stderr


# -- the Rice expression as printed ----------------------------------------

def rice_transcription(s, literal, n_terms=60):
    """Rice outage term by term from the typeset expression.

    ``literal`` keeps two factors as printed: (k1+1)(k1+1) in the power and
    C_th in the Bessel argument. Otherwise they are (k1+1)(k2+1) and upsilon,
    as the substitution mu_i = 1 into the general result gives. The doubled
    l! in the printed weight is kept either way: one copy is the Poisson
    weight, the other Gamma(mu2 + l).
    """
    k1, k2, k3 = (link.kappa for link in s.links)
    ups, a, b = s.upsilon, s.a, s.b
    f_z = sum(k3 ** q / (math.gamma(q + 1) * math.factorial(q))
              * sp.gammainc(q + 1, (1 + k3) * b / ups) * math.gamma(q + 1)
              for q in range(n_terms)) * math.exp(-k3)
    power = (k1 + 1) * ((k1 + 1) if literal else (k2 + 1)) * ups / a
    arg = 2 * math.sqrt((1 + k1) * (1 + k2) * (s.c_th if literal else ups) / a)
    total = 0.0
    for n in range(n_terms):
        for l in range(n_terms):
            for k in range(n + 1):
                log_w = (n * math.log(k1) + l * math.log(k2) - math.lgamma(n + 1)
                         - 2 * math.lgamma(l + 1) - math.lgamma(k + 1)
                         + 0.5 * (l + k + 1) * math.log(power))
                total += math.exp(log_w) * sp.kv(k - l - 1, arg)
    bracket = 1.0 - 2.0 * total * math.exp(-(k1 + k2))
    return 1.0 - f_z * (1.0 - bracket)


def test_rice_corrected_transcription_matches_both_routes():
    s = SystemParams(sigma_d2=1e-4, alpha=0.2, **links(2.0, 1, 0.5, 1, 1.0, 1))
    corrected = rice_transcription(s, literal=False)
    assert corrected == pytest.approx(an.outage_rice(s, TIGHT).value, abs=1e-12)
    assert corrected == pytest.approx(an.outage_unified(s, TIGHT).value, abs=1e-10)


def test_rice_literal_transcription_departs():
    # records the gap rather than choosing for the authors; the corrected
    # form is the one that the Monte Carlo estimate supports
    s = SystemParams(sigma_d2=1e-4, alpha=0.2, **links(2.0, 1, 0.5, 1, 1.0, 1))
    literal = rice_transcription(s, literal=True)
    corrected = rice_transcription(s, literal=False)
    mc = mc_outage(s, 1_000_000, seed=21)
    assert abs(corrected - mc.estimate) <= 3 * mc.stderr
    assert abs(literal - mc.estimate) > 10 * mc.stderr
    # with equal kappa_1 = kappa_2 only the Bessel argument differs
    sym = replace(s, **links(1.0, 1, 1.0, 1, 1.0, 1))
    assert abs(rice_transcription(sym, True) - rice_transcription(sym, False)) > 1e-3


# -- properties -------------------------------------------------------------

kappas = st.floats(0.0, 4.0)
int_mus = st.sampled_from([1.0, 2.0, 3.0])


@st.composite
def systems(draw):
    return SystemParams(
        link1=KappaMuParams(draw(kappas), draw(int_mus)),
        link2=KappaMuParams(draw(kappas), draw(st.floats(0.5, 4.0))),
        link3=KappaMuParams(draw(kappas), draw(st.floats(0.5, 4.0))),
        alpha=draw(st.floats(0.05, 0.9)), ps=draw(st.floats(0.1, 2.0)),
        eta=draw(st.floats(0.2, 1.0)), c_th=draw(st.floats(0.01, 1.0)),
        sigma_d2=draw(st.sampled_from([1e-4, 1e-3, 1e-2])))


@settings(max_examples=40, deadline=None)
@given(s=systems(), f=st.floats(1.05, 4.0))
def test_outage_monotone_in_resources(s, f):
    base = an.outage_unified(s).value
    tol = 1e-9
    assert an.outage_unified(replace(s, ps=s.ps * f)).value <= base + tol
    assert an.outage_unified(replace(s, c_th=s.c_th * f)).value >= base - tol
    assert an.outage_unified(replace(s, d1=s.d1 * f)).value >= base - tol
    assert an.outage_unified(replace(s, d2=s.d2 * f)).value >= base - tol
    # a alone: sigma_d2 scales a without touching b
    assert an.outage_unified(replace(s, sigma_d2=s.sigma_d2 / f)).value <= base + tol


@settings(max_examples=40, deadline=None)
@given(s=systems(), f=st.floats(1.05, 4.0))
def test_eta_enters_only_through_zeta(s, f):
    # raising eta is the same as raising alpha to match zeta, minus the
    # rate penalty of the longer harvesting slot
    eta = s.eta / f
    alpha = s.alpha * s.eta / (s.alpha * s.eta + eta * (1.0 - s.alpha))
    moved = replace(s, eta=eta, alpha=alpha)
    assert moved.zeta == pytest.approx(s.zeta, rel=1e-12)
    assert moved.upsilon >= s.upsilon
    assert an.outage_unified(moved).value >= an.outage_unified(s).value - 1e-9


def test_outage_not_pointwise_monotone_in_eta():
    # smaller eta shrinks the relay's loop-back power faster than it shrinks
    # the destination SNR, so at a fixed alpha the outage can fall
    s = SystemParams(alpha=0.5, c_th=1.0, ps=1.0, sigma_d2=1e-4)
    hi, lo = an.outage_rayleigh(s).value, an.outage_rayleigh(replace(s, eta=0.5)).value
    assert lo < hi - 5e-3
    mc_hi = mc_outage(s, 1_000_000, seed=31)
    mc_lo = mc_outage(replace(s, eta=0.5), 1_000_000, seed=32)
    assert mc_lo.estimate < mc_hi.estimate - 3 * math.hypot(mc_lo.stderr, mc_hi.stderr)


def test_minimum_over_alpha_nonincreasing_in_eta():
    from kmrelay.experiments import optimal_alpha
    s = SystemParams(ps=1.0, sigma_d2=1e-4, **links(0, 2.0, 0, 2.0, 0, 3.0))
    best = [optimal_alpha(replace(s, eta=eta), "nakagami").outage for eta in (0.25, 0.5, 0.75, 1.0)]
    assert all(b <= a + 1e-12 for a, b in zip(best, best[1:]))


@settings(max_examples=60, deadline=None)
@given(s=systems())
def test_raw_value_in_range(s):
    r = an.outage_unified(s)
    assert r.converged
    assert -1e-6 <= r.raw <= 1.0 + 1e-6
    assert 0.0 <= r.value <= 1.0


@settings(max_examples=40, deadline=None)
@given(s=systems())
def test_unified_matches_nakagami_when_kappa_zero(s):
    s = replace(s, link1=replace(s.link1, kappa=0.0), link2=replace(s.link2, kappa=0.0),
                link3=replace(s.link3, kappa=0.0))
    assert an.outage_unified(s, TIGHT).value == pytest.approx(an.outage_nakagami(s).value, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(k=st.tuples(kappas, kappas, kappas), s=systems())
def test_unified_matches_rice_when_mu_one(k, s):
    s = replace(s, **links(k[0], 1.0, k[1], 1.0, k[2], 1.0))
    assert an.outage_unified(s, TIGHT).value == pytest.approx(an.outage_rice(s, TIGHT).value, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(s=systems(), w=st.floats(0.3, 3.0))
def test_mean_power_scaling_equivalent_to_source_power(s, w):
    # omega on link 1 multiplies h1^2, which is the same as scaling Ps for the
    # destination hop; the relay hop does not see link 1 at all
    scaled = replace(s, link1=replace(s.link1, omega=w))
    moved = replace(s, ps=s.ps * w)
    a = an.outage_unified(scaled).value
    b = an.outage_unified(moved).value
    assert a == pytest.approx(b, abs=1e-9)
