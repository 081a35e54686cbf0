import numpy as np
import pytest
from oracles import dense_cycle_integral

from wkbcover.cover import build_cover, homology_basis, stratum_spec
from wkbcover.periods import (_endpoint_antiderivative, binomial_period_expansion, elem_integrand,
                              integrate_chain, integrate_differential, period_chart, regularized_pole_integral,
                              split_basis)
from wkbcover.ratfield import Poly, QextElem, RatFunc

GOLDEN_A = 0.48359517 - 0.99764727j
GOLDEN_B = -1.2524019 + 1.0565917j


def test_t_periods_are_2_pi_i_r(ref_cover):
    cov, cycles = ref_cover
    chart = period_chart(cov, cycles)
    for j, t in enumerate(chart.t_periods):
        assert abs(t - 2j * np.pi * cov.r[j]) < 1e-9


def test_exact_differential_integrates_to_zero(ref_cover):
    cov, cycles = ref_cover
    ext = cov.spec.to_float().ext()
    x = RatFunc(Poly.x(exact=False))
    exact = QextElem(0, x, ext).derivative()
    for c in split_basis(cycles)["a"] + split_basis(cycles)["b"]:
        val, _ = integrate_differential(cov, exact, c)
        assert abs(val) < 1e-10


def test_periods_match_dense_oracle_and_goldens(ref_cover):
    cov, cycles = ref_cover
    chart = period_chart(cov, cycles)
    b = split_basis(cycles)
    assert abs(chart.A[0] - dense_cycle_integral(cov, b["a"][0])) < 1e-8
    assert abs(chart.B[0] - dense_cycle_integral(cov, b["b"][0])) < 1e-8
    assert abs(chart.A[0] - GOLDEN_A) < 1e-7
    assert abs(chart.B[0] - GOLDEN_B) < 1e-7


def test_n3_chart_is_empty():
    cov = build_cover(stratum_spec([-1, 1, 1.5j], [1, 1.25, 0.75 + 0.125j]))
    chart = period_chart(cov)
    assert chart.A == [] and chart.B == [] and len(chart.t_periods) == 3


def test_rescaling_multiplies_periods(ref_spec, ref_cover):
    cov, cycles = ref_cover
    kappa = 1.7
    cov2 = build_cover(ref_spec.scaled(kappa))
    c1 = period_chart(cov, cycles).vector
    c2 = period_chart(cov2, cycles).vector
    assert np.allclose(c2, kappa * c1, rtol=1e-10)


def test_Q1_over_v_needs_no_subtraction(ref_cover):
    cov, cycles = ref_cover
    sp = cov.spec.to_float()
    ext = sp.ext()
    w = QextElem(0, sp.Q1_or_zero() * ext.inv_Q, ext)
    for j in range(cov.n):
        a, _ = regularized_pole_integral(cov, w, j, cycles, cutoff=0.05)
        b, _ = regularized_pole_integral(cov, w, j, cycles, cutoff=0.02)
        assert abs(a - b) < 1e-9


def test_pure_log_term_regularizes_to_zero(ref_spec):
    ext = ref_spec.to_float().ext()
    z, r = complex(ref_spec.z[0]), complex(ref_spec.r[0])
    x = RatFunc(Poly.x(exact=False))
    elem = QextElem(RatFunc.const(r, exact=False) / (x - RatFunc.const(z, exact=False)), 0, ext)
    xa, xb = 0.1 + 0.05j, -0.07 + 0.02j
    direct = r * (np.log(xb) - np.log(xa))  # straight path avoiding the branch of log
    reg = direct + _endpoint_antiderivative(elem, z, r, 1, xa) - _endpoint_antiderivative(elem, z, r, 1, xb)
    assert abs(reg) < 1e-12


def test_regularized_v_is_cutoff_independent(ref_cover):
    cov, cycles = ref_cover
    v = cov.spec.to_float().ext().y
    for j in range(cov.n):
        a, _ = regularized_pole_integral(cov, v, j, cycles, cutoff=0.05)
        b, _ = regularized_pole_integral(cov, v, j, cycles, cutoff=0.025)
        assert abs(a - b) < 1e-9


def test_binomial_low_terms(ref_cover):
    cov, cycles = ref_cover
    sp = cov.spec.to_float()
    ext = sp.ext()
    a = split_basis(cycles)["a"][0]
    Qt = sp.Q1_or_zero()
    c = binomial_period_expansion(cov, Qt, a, 1)
    v0, _ = integrate_chain(cov, elem_integrand(ext.y), a)
    v1, _ = integrate_chain(cov, elem_integrand(QextElem(0, Qt * ext.inv_Q, ext)), a)
    assert abs(c[0] - v0) < 1e-12
    assert abs(c[1] - 0.5 * v1) < 1e-12
