from fractions import Fraction

import numpy as np
import pytest
from oracles import dense_cycle_integral

from wkbcover.cover import random_exact_spec
from wkbcover.periods import split_basis
from wkbcover.ratfield import QextElem, RatFunc
from wkbcover.wkb import (closed_form_vk, normalized_difference, odd_even_split, residue_is_zero, riccati_recursion,
                          riccati_residual, schwarzian_q, symmetric_part_identity, turning_point_residues,
                          vk_differential, voros_table)

PROBES = [0.37 + 0.21j, -0.53 + 0.77j, 1.13 - 0.41j]


@pytest.fixture(scope="module")
def exact_series():
    return riccati_recursion(random_exact_spec(4, 2), 4)


@pytest.fixture(scope="module")
def bare_exact_series():
    return riccati_recursion(random_exact_spec(4, 2, with_Q1=False), 3)


def test_s0_is_half_p(exact_series):
    S = exact_series
    assert S.s(-1) == S.ext.elem(RatFunc.const(1, exact=True), 0)
    assert S.s(0) == S.ext.elem(S.p * RatFunc.const(Fraction(1, 2), exact=True), 0)


def test_q1_zero_low_orders(bare_exact_series):
    S = bare_exact_series
    assert S.s(0).is_zero()
    assert vk_differential(S, 1) == QextElem(0, -S.q * RatFunc.const(Fraction(1, 2), exact=True), S.ext)
    assert vk_differential(S, 2).is_zero()


def test_closed_forms_up_to_v1_exact(exact_series):
    for k in (-1, 0, 1):
        assert normalized_difference(vk_differential(exact_series, k), closed_form_vk(exact_series, k)) == 0.0


def test_v2_matches_recursion_form(exact_series):
    assert normalized_difference(vk_differential(exact_series, 2), closed_form_vk(exact_series, 2, literal=False)) == 0.0


def test_literal_v2_differs_when_q1_nonzero(exact_series):
    # the literal display drops the q Q1 weight and the Q1^3 sign; recorded in the ledger
    assert normalized_difference(vk_differential(exact_series, 2), closed_form_vk(exact_series, 2)) > 0


def test_v_minus1_is_v(exact_series):
    assert vk_differential(exact_series, -1) == exact_series.ext.y


def test_involution_twice_is_identity(exact_series):
    for t in exact_series.terms:
        assert t.involution().involution() == t


def test_projections_recombine(exact_series):
    inv, anti = odd_even_split(exact_series)
    for t, a, b in zip(exact_series.terms, inv, anti):
        assert a + b == t


def test_symmetric_identity_exact(exact_series):
    for k in range(-1, 4):
        assert symmetric_part_identity(exact_series, k).is_zero()


def test_turning_residues_exact_zero(exact_series):
    for k in range(-1, 4):
        assert residue_is_zero(turning_point_residues(exact_series, k)[0])


def test_qv_turning_residue_zero_without_q1(ref_spec_noq1, ref_cover):
    cov, _ = ref_cover
    S = riccati_recursion(ref_spec_noq1, 1, exact=False)
    for _, res, scale in turning_point_residues(S, 1, cov):
        assert abs(res) <= 1e-12 * scale


def test_voros_puncture_entries(ref_spec_noq1, ref_cover):
    from wkbcover.cover import build_cover, homology_basis
    cov = build_cover(ref_spec_noq1)
    cycles = homology_basis(cov)
    S = riccati_recursion(ref_spec_noq1, 2, exact=False)
    tab = voros_table(cov, S, cycles)
    for j, t in enumerate(split_basis(cycles)["t"]):
        vals = tab.values[t.label]
        r = cov.r[j]
        assert abs(vals[0] - 2j * np.pi * r) < 1e-9
        assert abs(vals[2] - 2j * np.pi / (8 * r)) < 1e-9
        assert abs(tab.residue_check[t.label][2] - vals[2]) < 1e-9


def test_voros_ab_entries_match_dense_oracle(ref_cover, ref_spec):
    cov, cycles = ref_cover
    S = riccati_recursion(ref_spec, 1, exact=False)
    tab = voros_table(cov, S, cycles)
    v1 = vk_differential(S, 1).to_float()
    a = split_basis(cycles)["a"][0]
    total = dense_cycle_integral(cov, a, v1.evaluate)
    assert abs(tab.values[a.label][2] - total) < 1e-8


def test_riccati_residual_slopes(ref_spec):
    hs = [0.2, 0.1, 0.05]
    for N in (2, 3):
        S = riccati_recursion(ref_spec, N, exact=False)
        res = [riccati_residual(S, PROBES, h) for h in hs]
        slope = np.polyfit(np.log(hs), np.log(res), 1)[0]
        assert abs(slope - N) < 0.15 * N


def test_large_hbar_residual_is_order_one(ref_spec):
    S = riccati_recursion(ref_spec, 2, exact=False)
    assert riccati_residual(S, PROBES, 1.0) > 1e-3


def test_schwarzian_q_at_a_point():
    from wkbcover.ratfield import Poly
    Q = RatFunc(Poly([1, 0, 1], exact=True))
    q = schwarzian_q(Q)
    # L = 2x/(1+x^2): q = (L^2 - 4 L') / (16 Q)
    from wkbcover.ratfield import to_complex
    assert to_complex(q(Fraction(0))) == -0.5
