from fractions import Fraction

import numpy as np
import pytest

from wkbcover.cover import random_exact_spec
from wkbcover.ratfield import (Poly, Puncture, QextElem, QuadExt, RatFunc, TurningPoint, exact_coeff, local_series,
                               residue_at, to_complex)

X = RatFunc(Poly.x(exact=True))
ONE = RatFunc.const(1, exact=True)


def test_derivative_of_inverse_is_minus_inverse_square():
    assert (ONE / X).derivative() == -(ONE / (X * X))


def test_cancellation_to_one():
    a = X / (X - ONE)
    b = (X - ONE) / X
    assert a * b == ONE


def test_derivative_matches_central_difference(ref_spec):
    Q = ref_spec.Q.to_float()
    dQ = Q.derivative()
    h = 1e-5
    for x in [0.37 + 0.21j, -0.53 + 0.77j, 1.13 - 0.41j, 0.1 - 0.6j, -1.4 + 0.2j]:
        fd = (Q(x + h) - Q(x - h)) / (2 * h)
        assert abs(fd - dQ(x)) <= 1e-9 * max(1.0, abs(dQ(x))) * 1e2


def _ext_x():
    return QuadExt(X)


def test_involution_flips_odd_part_and_squares_to_identity():
    ext = _ext_x()
    a = QextElem(X + ONE, X * X, ext)
    m = a.involution()
    assert m == QextElem(X + ONE, -(X * X), ext)
    assert m.involution() == a


def test_derivative_of_y_for_Q_equal_x():
    ext = _ext_x()
    dy = ext.y.derivative()
    assert dy == QextElem(0, ONE / (X * RatFunc.const(2, exact=True)), ext)


def test_y_squared_is_Q():
    ext = _ext_x()
    sq = ext.y * ext.y
    assert sq == QextElem(X, 0, ext)
    assert sq.odd.is_zero()


def test_ring_axioms_exact(rng):
    spec = random_exact_spec(4, 7)
    ext = spec.ext()

    def rand_elem():
        c = [exact_coeff(Fraction(int(k), 3)) for k in rng.integers(-5, 6, size=4)]
        a = RatFunc(Poly(c[:2], exact=True))
        b = RatFunc(Poly(c[2:], exact=True))
        return QextElem(a, b, ext)

    for _ in range(3):
        p, q, r = rand_elem(), rand_elem(), rand_elem()
        assert (p * q) * r == p * (q * r)
        assert p * (q + r) == p * q + p * r


def test_ring_axioms_float(rng, ref_spec):
    ext = ref_spec.to_float().ext()
    for _ in range(3):
        els = []
        for _ in range(3):
            c = rng.normal(size=4) + 1j * rng.normal(size=4)
            els.append(QextElem(RatFunc(Poly(list(c[:2]), exact=False)), RatFunc(Poly(list(c[2:]), exact=False)), ext))
        p, q, r = els
        lhs, rhs = (p * q) * r, p * (q * r)
        assert lhs.equals(rhs, rtol=1e-12)
        assert (p * (q + r)).equals(p * q + p * r, rtol=1e-12)


def test_v_in_hat_chart_starts_with_three_hat_squared(ref_cover):
    cov, _ = ref_cover
    ext = cov.spec.to_float().ext()
    P = cov.spec.numerator.to_float()
    for x in cov.turning_points:
        s = local_series(ext.y, TurningPoint(P, complex(x)), 1, "hat", order=6)
        assert abs(complex(s.coefficient(2)) - 3) < 1e-10
        for k in range(s.min_exp, 2):
            assert abs(complex(s.coefficient(k))) < 1e-10


def test_v_at_puncture_leading_coefficient_is_r(ref_cover):
    cov, _ = ref_cover
    ext = cov.spec.to_float().ext()
    for j in range(cov.n):
        s = local_series(ext.y, Puncture(complex(cov.z[j]), complex(cov.r[j])), 1, "zeta", order=3)
        assert abs(complex(s.coefficient(-1)) - cov.r[j]) < 1e-10
        assert residue_at(ext.y, Puncture(complex(cov.z[j]), complex(cov.r[j])), 1) == pytest.approx(cov.r[j], abs=1e-10)


def test_Q1_over_v_has_even_powers_in_hat_chart(ref_cover):
    cov, _ = ref_cover
    sp = cov.spec.to_float()
    ext = sp.ext()
    w = QextElem(0, sp.Q1_or_zero() * ext.inv_Q, ext)
    P = sp.numerator
    for x in cov.turning_points:
        s = local_series(w, TurningPoint(P, complex(x)), 1, "hat", order=8)
        odd = [abs(complex(s.coefficient(k))) for k in range(s.min_exp, 8) if k % 2]
        assert max(odd) < 1e-9


def test_residue_of_dx_over_x():
    ext = QuadExt(X * X + ONE)
    assert to_complex(residue_at(QextElem(ONE / X, 0, ext), 0)) == 1


def test_residue_of_qv_at_puncture(ref_cover):
    from wkbcover.gfun import qv_puncture_residues
    cov, _ = ref_cover
    res = qv_puncture_residues(cov)
    for j in range(cov.n):
        assert abs(res[j] + 1 / (4 * cov.r[j])) < 1e-10


def test_to_complex_of_gaussian_rational():
    assert to_complex(exact_coeff((Fraction(1, 2), Fraction(-3, 4)))) == 0.5 - 0.75j
