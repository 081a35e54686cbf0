import numpy as np
import pytest

from wkbcover.cover import (CoverError, build_cover, circle, gram_matrix, homology_basis, intersection_number,
                            random_exact_spec, stadium, stratum_spec)
from wkbcover.periods import split_basis

N5 = dict(z=[-1.2, 1.1, 0.3 + 1.4j, -0.2 - 1.3j, 1.6 + 0.9j],
          r=[0.9 + 0.1j, 1.1 - 0.05j, 0.8 + 0.07j, 1.0 + 0.03j, 0.7 - 0.02j],
          T=[-0.6 - 2.1j, 0.4 + 0.3j])


@pytest.fixture(scope="module")
def n5_cover():
    spec = stratum_spec(N5["z"], N5["r"], N5["T"])
    cov = build_cover(spec)
    return cov, homology_basis(cov)


def test_n3_has_two_turning_points_and_genus_zero():
    spec = stratum_spec([-1, 1, 1.5j], [1, 1.25, 0.75 + 0.125j])
    cov = build_cover(spec)
    assert len(cov.turning_points) == 2
    assert cov.genus == 0
    basis = split_basis(homology_basis(cov))
    assert basis["a"] == [] and basis["b"] == []
    assert len(basis["t"]) == 3


def test_n4_has_four_turning_points_genus_one(ref_cover):
    cov, cycles = ref_cover
    assert len(cov.turning_points) == 4
    assert cov.genus == 1
    basis = split_basis(cycles)
    assert len(basis["a"]) == 1 and len(basis["b"]) == 1


def test_roots_move_continuously_under_puncture_perturbation(ref_spec):
    from wkbcover.acceptance import REF_Q1, REF_R, REF_T, REF_Z
    cov0 = build_cover(ref_spec)
    z = list(REF_Z)
    z[2] = z[2] + 1e-3
    moved = build_cover(stratum_spec(z, REF_R, REF_T, REF_Q1), order_hint=cov0.turning_points)
    # companion-matrix oracle
    c = np.array(moved.P.coeffs, dtype=complex)
    comp = np.diag(np.ones(len(c) - 2, dtype=complex), -1)
    comp[:, -1] = -c[:-1] / c[-1]
    oracle = np.linalg.eigvals(comp)
    for x in moved.turning_points:
        assert np.min(np.abs(oracle - x)) < 1e-10
    assert np.max(np.abs(moved.turning_points - cov0.turning_points)) < 0.05


def test_intersection_a_b_is_half(ref_cover):
    cov, cycles = ref_cover
    b = split_basis(cycles)
    assert intersection_number(b["a"][0], b["b"][0], cov) == pytest.approx(0.5)
    assert intersection_number(b["b"][0], b["a"][0], cov) == pytest.approx(-0.5)


def test_self_intersection_zero(ref_cover):
    cov, cycles = ref_cover
    for c in cycles:
        if c.closure == "closed":
            assert intersection_number(c, c, cov) == 0


def test_t_loops_do_not_meet_a_loops(n5_cover):
    cov, cycles = n5_cover
    b = split_basis(cycles)
    for t in b["t"]:
        for a in b["a"]:
            assert intersection_number(t, a, cov) == 0


def test_gram_matrix_canonical_on_n5(n5_cover):
    cov, cycles = n5_cover
    G = gram_matrix(cycles, cov)
    g = cov.genus
    expect = np.zeros_like(G)
    expect[:g, g:2 * g] = 0.5 * np.eye(g)
    expect[g:2 * g, :g] = -0.5 * np.eye(g)
    assert np.allclose(G, expect)


def test_loop_around_one_turning_point_flips_sheet(ref_cover):
    cov, _ = ref_cover
    x = complex(cov.turning_points[0])
    others = [f for f in cov.feature_points() if abs(f - x) > 1e-12]
    loop = circle(x, 0.3 * min(abs(f - x) for f in others))
    assert cov.end_sheet(loop, 1) == -1


def test_loop_around_two_turning_points_keeps_sheet(ref_cover):
    cov, cycles = ref_cover
    a = split_basis(cycles)["a"][0]
    assert cov.end_sheet(a.polyline, 1) == 1


def test_loop_around_puncture_keeps_sheet(ref_cover):
    cov, cycles = ref_cover
    for t in split_basis(cycles)["t"]:
        assert cov.end_sheet(t.polyline, t.start_sheet) == t.start_sheet


def test_duplicate_punctures_rejected():
    with pytest.raises(CoverError):
        stratum_spec([0, 0, 1], [1, 1, 1])


def test_biresidues_match_r_squared():
    spec = random_exact_spec(4, 2)
    for j in range(spec.n):
        assert spec.biresidue(j) == spec.r[j] ** 2
