from fractions import Fraction

import numpy as np
import pytest

from wkbcover.acceptance import REF_Q1, REF_R, REF_T, REF_Z
from wkbcover.cover import random_exact_spec
from wkbcover.gfun import (exact_branch_residue_routes, g_minus1_local, g_one, gterms, q_function,
                           qv_puncture_residues, qv_turning_leading, regular_at_punctures, schwarzian_check)
from wkbcover.moduli import ModuliPoint
from wkbcover.ratfield import Puncture, QextElem, RatFunc, is_zero, local_series


def test_q_matches_numerical_schwarzian(ref_cover):
    cov, _ = ref_cover
    q = q_function(cov, check=False)
    assert schwarzian_check(cov, q) < 1e-7


def test_qv_puncture_residues(ref_cover):
    cov, _ = ref_cover
    res = qv_puncture_residues(cov)
    for got, r in zip(res, cov.r):
        assert abs(got + 1 / (4 * r)) < 1e-9 * (1 + abs(got))


def test_qv_turning_leading_coefficient(ref_cover):
    cov, _ = ref_cover
    for c in qv_turning_leading(cov):
        assert abs(c - 5 / 12) < 1e-9


def test_shifted_qv_regular_at_each_puncture(ref_cover):
    cov, _ = ref_cover
    ext = cov.spec.to_float().ext()
    q = q_function(cov, check=False)
    # qv + v/(4 r_j^2) kills the pole at z_j only, so test one puncture at a time
    for z, r in zip(cov.z, cov.r):
        w = QextElem(0, q + RatFunc.const(1 / (4 * r ** 2), exact=False), ext)
        ser = local_series(w, Puncture(complex(z), complex(r)), 1, "linear", order=2)
        assert abs(complex(ser.coefficient(-1))) < 1e-9
    assert not regular_at_punctures(cov, QextElem(0, q, ext))


def test_exact_branch_routes_agree_n3():
    direct, via = exact_branch_residue_routes(random_exact_spec(3, 1))
    assert is_zero(direct - via * Fraction(36, 5))


@pytest.fixture(scope="module")
def point_pair():
    p1 = ModuliPoint.from_data(REF_Z, REF_R, REF_T, REF_Q1)
    p2 = ModuliPoint.from_data(REF_Z, REF_R, REF_T, [2 * c for c in REF_Q1])
    return p1, p2


def test_float_route_defect_small(point_pair):
    _, br = g_one(point_pair[0])
    assert br["route_defect"] < 1e-9 * (1 + max(abs(c) for c in br["branch_residues"]))


def test_q1_scaling(point_pair):
    p1, p2 = point_pair
    a1, _ = g_minus1_local(p1)
    a2, _ = g_minus1_local(p2)
    assert abs(a2 - 2 * a1) < 1e-10 * (1 + abs(a1))
    g1, br = g_one(p1)
    g2, _ = g_one(p2)
    # linear parts double, the cubic part grows eightfold
    assert abs(g2 - 2 * g1 - 6 * br["cubic_term"]) < 1e-9 * (1 + abs(g1))


def test_absent_q1_gives_zero_odd_terms():
    p = ModuliPoint.from_data(REF_Z, REF_R, REF_T, None)
    rep = gterms(p, p)
    assert rep.G_minus1 == 0 and rep.G_one == 0
    assert np.isfinite(rep.G_zero)
