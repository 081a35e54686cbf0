import numpy as np
import pytest

from wkbcover.acceptance import DIRECTIONS, REF_R, REF_T, REF_Z
from wkbcover.moduli import (ModuliPoint, chart_direction_derivative, closedness_study, hmap_generating_check,
                             integrate_form_along_path, lemma1_check, moduli_move, nonclosed_control, pairing,
                             product_differential, qv_elem, tau_one_form, theta_form)
from wkbcover.ratfield import RatFunc

# Theta_(-2 Q1) at the reference point, components on (dA, dB)
THETA_M2Q1_GOLDEN = np.array([-0.35343688 + 1.95699727j, -1.77465431 - 0.61234043j])


def test_identity_move(ref_point):
    p = moduli_move(ref_point, ref_point.chart_vector)
    assert np.allclose(p.params, ref_point.params, atol=1e-14)


def test_forward_backward_move_returns(ref_point):
    eps = 1e-2
    e = np.array([1.0, 0.0])
    fwd = moduli_move(ref_point, ref_point.chart_vector + eps * e)
    back = moduli_move(fwd, ref_point.chart_vector)
    assert np.max(np.abs(back.params - ref_point.params)) < 10 * eps ** 2
    assert np.max(np.abs(back.params - ref_point.params)) < 1e-10


def test_jacobian_matches_finite_differences(ref_point):
    J = ref_point.jacobian()
    h = 1e-5
    for k in range(len(ref_point.params)):
        e = np.zeros(len(ref_point.params), dtype=complex)
        e[k] = h
        fd = (ref_point.moved(ref_point.params + e).chart_vector
              - ref_point.moved(ref_point.params - e).chart_vector) / (2 * h)
        assert np.max(np.abs(fd - J[:, k])) < 1e-6


def test_zero_family_gives_zero_form(ref_point):
    f = theta_form(ref_point, RatFunc.const(0.0, exact=False))
    assert np.all(f.components == 0)


def test_theta_is_linear_in_family(ref_point):
    f1 = theta_form(ref_point)
    f3 = theta_form(ref_point, ref_point.Q1 * RatFunc.const(-2.0, exact=False))
    assert np.allclose(f3.components, -2 * f1.components, rtol=1e-12)


def test_theta_golden_and_dense_oracle(ref_point):
    from oracles import dense_cycle_integral
    F = ref_point.Q1 * RatFunc.const(-2.0, exact=False)
    comps = theta_form(ref_point, F).components
    assert np.allclose(comps, THETA_M2Q1_GOLDEN, atol=1e-7)
    Ff = F.to_float()
    Qf = ref_point.spec.to_float().Q
    g = lambda x, y: Ff(x) / y
    a = dense_cycle_integral(ref_point.cover, ref_point.basis["a"][0], g)
    b = dense_cycle_integral(ref_point.cover, ref_point.basis["b"][0], g)
    assert abs(comps[0] - b) < 1e-8 and abs(comps[1] + a) < 1e-8


def test_theta_components_are_pairings(ref_point):
    d = DIRECTIONS[0]
    w = ref_point.periods(theta_form.__globals__["over_v"](ref_point, ref_point.Q1))
    dv = chart_direction_derivative(lambda p: p.chart_vector, ref_point, d)
    assert abs(theta_form(ref_point)(d) - pairing(w, dv)) < 1e-10


def test_tau_form_is_pairing_with_qv(ref_point):
    d = DIRECTIONS[1]
    w = ref_point.periods(qv_elem(ref_point))
    dv = chart_direction_derivative(lambda p: p.chart_vector, ref_point, d)
    assert abs(tau_one_form(ref_point)(d) - pairing(w, dv) / (12j * np.pi)) < 1e-10


def test_tau_form_scales_inverse_kappa(ref_point):
    kappa = 1.3
    r = [kappa * x for x in REF_R]
    T = [kappa ** 2 * t for t in REF_T]
    scaled = ModuliPoint.from_data(REF_Z, r, T, None)
    assert np.allclose(tau_one_form(scaled).components, tau_one_form(ref_point).components / kappa, rtol=1e-9)


def test_exact_and_control_closedness_slopes(ref_point):
    u, w = DIRECTIONS
    ex = closedness_study(product_differential, ref_point, u, w, eps0=0.05)
    ctl = closedness_study(nonclosed_control, ref_point, u, w, eps0=0.05)
    assert ex.slope > 3 or max(abs(d) for d in ex.defects) < 1e-10
    assert abs(ctl.slope - 2) < 0.1


def test_closed_loop_integral_vanishes(ref_point):
    c = ref_point.chart_vector
    u, w = DIRECTIONS
    path = [c + 0.05 * u, c + 0.05 * (u + w), c + 0.05 * w, c]
    val, _ = integrate_form_along_path(theta_form, ref_point, path, nodes=8)
    assert abs(val) < 1e-8


def test_homotopic_paths_agree(ref_point):
    c = ref_point.chart_vector
    u, w = DIRECTIONS
    end = c + 0.05 * (u + w)
    v1, _ = integrate_form_along_path(tau_one_form, ref_point, [c + 0.05 * u, end])
    v2, _ = integrate_form_along_path(tau_one_form, ref_point, [c + 0.05 * w, end])
    assert abs(v1 - v2) < 1e-8


def test_lemma_boundary_vanishes_for_v_v(ref_point):
    out = lemma1_check(ref_point, DIRECTIONS[0], w2="v")
    assert abs(out["boundary_78"]) < 1e-9
    assert abs(out["defect"]) < 1e-9


def test_lemma_identity_and_form_agreement(ref_point):
    out = lemma1_check(ref_point, DIRECTIONS[1])
    assert abs(out["defect"]) < 1e-5
    assert abs(out["rhs_78"] - out["rhs_79"]) < 1e-9


def test_hmap_trivial_without_q1():
    p = ModuliPoint.from_data(REF_Z, REF_R, REF_T, None)
    out = hmap_generating_check(p, [0.1, 0.05])
    for row in out["rows"]:
        assert abs(row["theta_diff"]) < 1e-12 and abs(row["hbar_theta"]) < 1e-12
        assert row["residual"] < 1e-12
