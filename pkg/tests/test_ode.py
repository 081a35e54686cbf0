import numpy as np
import pytest

from wkbcover.ode import (OdeError, generator_loops, lambda_exponent, loop_eigenvalues, monodromy_rep,
                          puncture_loop, puncture_spectrum, relation_defect, transport, transport_potential)


def test_constant_potential_matches_closed_form():
    # hbar V = c gives phi'' = (c/hbar) phi, so (phi, hbar phi') evolves by cosh/sinh of k L
    hbar, c = 0.5, 1.3 - 0.4j
    k = np.sqrt(c / hbar)
    a, b = 0.2 + 0.1j, 1.1 - 0.3j
    res = transport_potential(lambda x: c, hbar, [a, b])
    L = b - a
    expect = np.array([[np.cosh(k * L), np.sinh(k * L) / (hbar * k)],
                       [hbar * k * np.sinh(k * L), np.cosh(k * L)]])
    assert np.allclose(res.matrix, expect, rtol=1e-10, atol=1e-12)


def test_wronskian_preserved_on_loop(ref_spec):
    loop = puncture_loop(ref_spec, 0)
    res = transport_potential(lambda x: 1.0, 0.5, loop)
    assert res.wronskian_drift < 1e-9
    T = transport(ref_spec, 0.5, loop)
    assert abs(np.linalg.det(T) - 1) < 1e-9


def test_path_composition(ref_spec):
    p = [-3.0 + 0.5j, -2.0 + 1.7j, -0.5 + 2.2j]
    TA = transport(ref_spec, 0.5, p[:2])
    TB = transport(ref_spec, 0.5, p[1:])
    TAB = transport(ref_spec, 0.5, p)
    assert np.allclose(TAB, TB @ TA, rtol=1e-9, atol=1e-10)


def test_clearance_refused(ref_spec):
    z0 = complex(ref_spec.to_float().z[0])
    with pytest.raises(OdeError):
        transport(ref_spec, 0.5, [z0 - 1, z0 + 1e-5, z0 + 1])


def test_lambda_exponent():
    assert abs(lambda_exponent(2.0, 1.0) - (1 + np.sqrt(17)) / 2) < 1e-14
    lam = lambda_exponent(1.0, 0.01)
    assert abs(lam * (lam - 1) - 1e4) < 1e-8
    assert abs(lam - (0.5 + 100)) < 0.01


def test_loop_eigenvalues_product_and_parabolic():
    M = np.array([[3.0, 1.0], [2.0, 1.0]], dtype=complex)
    M /= np.sqrt(np.linalg.det(M))
    big, small = loop_eigenvalues(M)
    assert abs(big * small - 1) < 1e-14
    assert abs(big + small - np.trace(M)) < 1e-12
    with pytest.raises(OdeError):
        loop_eigenvalues(np.array([[1.0, 1.0], [0.0, 1.0]]))


@pytest.mark.slow
def test_puncture_eigenvalues_reference(ref_spec):
    for j in range(4):
        sp = puncture_spectrum(ref_spec, 0.1, j)
        assert sp.relative_error < 1e-6


def test_generator_relation_and_base_independence(ref_spec):
    rep = monodromy_rep(ref_spec, 0.5)
    assert rep.relation_defect < 1e-8
    assert max(rep.det_defects.values()) < 1e-9
    # a nearby base point conjugates each generator, so traces agree
    rep2 = monodromy_rep(ref_spec, 0.5, base=rep.base - 0.3j)
    # longer spokes from the moved base lose more digits; bound by its own drift
    tol = 100 * max(rep2.wronskian_drift, 1e-10)
    assert rep2.relation_defect < tol
    t1, t2 = rep.traces(), rep2.traces()
    for j in t1:
        assert abs(t1[j] - t2[j]) < tol * (1 + abs(t1[j]))


def test_generator_loops_sorted_by_angle(ref_spec):
    base, order, loops = generator_loops(ref_spec)
    z = [complex(c) for c in ref_spec.to_float().z]
    angles = [np.angle(z[j] - base) for j in order]
    assert angles == sorted(angles)
    assert all(loops[j][0] == base and loops[j][-1] == base for j in order)


def test_relation_defect_trivial():
    R = np.array([[np.cos(0.3), -np.sin(0.3)], [np.sin(0.3), np.cos(0.3)]])
    assert relation_defect([R, R.T]) < 1e-15
    assert relation_defect([R]) > 0.1
