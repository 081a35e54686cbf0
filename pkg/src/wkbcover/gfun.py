"""The terms G_{-1}, G_0, G_1 of the monodromy generating function.

Every piece is itemized: regularized pole-to-pole integrals per puncture,
residues per turning point, and the path integrals of Theta_(Q1) and of
d log tau_B (taken relative to a reference point).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .cover import SpectralCover
from .moduli import (ModuliPoint, chart_direction_derivative, integrate_form_along_path, over_v, pairing,
                     qv_elem, tau_one_form, theta_form)
from .periods import binom_half, integrate_path, elem_integrand, power_over_v
from .ratfield import (Puncture, QextElem, QuadExt, RatFunc, SeriesBudgetError, TurningPoint, is_zero,
                       local_series)
from .wkb import schwarzian_q

SCHWARZIAN_TOL = 1e-7


class GFunError(RuntimeError):
    """Failed cross-check or series extraction."""


# ---------------------------------------------------------------- q

def q_function(cover: SpectralCover, check: bool = True, tol: float = SCHWARZIAN_TOL) -> RatFunc:
    """q = -S_v / (2Q) with S_v the Schwarzian of int v (the Bergman connection vanishes in the affine chart)."""
    Q = cover.spec.to_float().Q
    q = schwarzian_q(Q)
    if check:
        err = schwarzian_check(cover, q)
        if err > tol:
            raise GFunError(f"numerical Schwarzian disagrees with q (relative {err:.2e})")
    return q


def _sample_points(cover: SpectralCover, count: int = 5) -> list[tuple[complex, float]]:
    feats = np.concatenate([cover.feature_points(), [a for a, _ in cover.cuts], [b for _, b in cover.cuts]])
    center = complex(np.mean(cover.z))
    span = float(np.max(np.abs(cover.feature_points() - center)))
    out = []
    k = 0
    while len(out) < count and k < 400:
        ang = 2.39996 * k
        rad = span * (0.15 + 0.9 * ((k * 0.618034) % 1))
        x = center + rad * np.exp(1j * ang)
        d = min(float(np.min(np.abs(feats - x))), min(_seg_dist(x, a, b) for a, b in cover.cuts))
        if d > 0.1 * span:
            out.append((x, 0.3 * d))
        k += 1
    return out


def _seg_dist(p: complex, a: complex, b: complex) -> float:
    t = np.clip(((p - a) * np.conj(b - a)).real / abs(b - a) ** 2, 0, 1)
    return abs(p - (a + t * (b - a)))


def schwarzian_check(cover: SpectralCover, q: RatFunc, m: int = 32) -> float:
    """max relative |q - q_num| where q_num = -S(F)/(2Q), F = int v by quadrature.

    Derivatives of F come from its samples on a circle (discrete Cauchy formula).
    """
    f = elem_integrand(cover.spec.to_float().ext().y)
    worst = 0.0
    for x0, rho in _sample_points(cover):
        w = np.exp(2j * np.pi * np.arange(m) / m)
        vals = np.array([integrate_path(cover, f, [x0, x0 + rho * wk], 1, 1e-14)[0] for wk in w])
        c = np.fft.fft(vals) / m  # c_k = F^(k)(x0) rho^k / k!
        d1, d2, d3 = c[1] / rho, 2 * c[2] / rho ** 2, 6 * c[3] / rho ** 3
        S = d3 / d1 - 1.5 * (d2 / d1) ** 2
        q_num = -S / (2 * cover.Qval(x0))
        qv = complex(q(x0))
        worst = max(worst, abs(q_num - qv) / max(abs(qv), 1e-300))
    return worst


def qv_puncture_residues(cover: SpectralCover) -> list[complex]:
    """Residues of qv at z_j^(1) (expected -1/(4 r_j))."""
    ext = cover.spec.to_float().ext()
    qv = QextElem(0, schwarzian_q(ext.Q), ext)
    return [complex(local_series(qv, Puncture(complex(z), complex(r)), 1, "linear", order=3).coefficient(-1))
            for z, r in zip(cover.z, cover.r)]


def qv_turning_leading(cover: SpectralCover) -> list[complex]:
    """Coefficient of hat-xi^-4 of qv at every turning point (expected 5/12)."""
    ext = cover.spec.to_float().ext()
    qv = QextElem(0, schwarzian_q(ext.Q), ext)
    P = cover.spec.to_float().numerator
    return [complex(local_series(qv, TurningPoint(P, complex(x)), 1, "hat", order=2).coefficient(-4))
            for x in cover.turning_points]


def regular_at_punctures(cover: SpectralCover, w: QextElem, tol: float = 1e-9) -> bool:
    """True when w has no pole at any z_j^(1) (local series starts at power >= 0)."""
    for z, r in zip(cover.z, cover.r):
        ser = local_series(w.to_float(), Puncture(complex(z), complex(r)), 1, "linear", order=2)
        for k in range(ser.min_exp, 0):
            if abs(complex(ser.coefficient(k))) > tol * (1 + abs(complex(ser.coefficient(0)))):
                return False
    return True


# ---------------------------------------------------------------- turning-point residues for G_1

def branch_residue_direct(ext: QuadExt, Q1: RatFunc, tp: TurningPoint, order: int = 6):
    """res_{x_i} (Q1/v) / int_{x_i} v in the hat chart, where int_{x_i} v = hat-xi^3.

    Q1/v = (c_0 + c_2 xi^2 + ...) dxi, so the residue is c_2.
    """
    w = QextElem(0, Q1 * ext.inv_Q, ext)
    return local_series(w, tp, 1, "hat", order=order).coefficient(2)


def branch_residue_via_qv(ext: QuadExt, Q1: RatFunc, tp: TurningPoint, order: int = 6):
    """res_{x_i} qv * int_{x_i} Q1/v in the hat chart (equals 5/36 of the direct residue)."""
    w = QextElem(0, Q1 * ext.inv_Q, ext)
    qv = QextElem(0, schwarzian_q(ext.Q), ext)
    ws = local_series(w, tp, 1, "hat", order=order)
    qs = local_series(qv, tp, 1, "hat", order=order)
    # int_0^xi of sum c_k xi^k is sum c_k xi^(k+1)/(k+1)
    exact = ext.exact
    total = 0
    for k in range(max(ws.min_exp, 0), -qs.min_exp - 1):
        term = qs.coefficient(-k - 2) * ws.coefficient(k)
        total = total + (term * Fraction(1, k + 1) if exact else complex(term) / (k + 1))
    return total


def _antiderivative(ser):
    """int_0 of a series without a 1/w term."""
    if ser.min_exp <= -1 and not is_zero(ser.coefficient(-1)):
        raise GFunError("antiderivative of a series with a residue")
    lo = max(ser.min_exp, 0)
    cs = []
    for k in range(lo, ser.order):
        c = ser.coefficient(k)
        cs.append(c * Fraction(1, k + 1) if not isinstance(c, (complex, float)) else c / (k + 1))
    return ser._like(cs, lo + 1, ser.order + 1)


def t_chart_branch_residues(ext: QuadExt, Q1: RatFunc, tp: TurningPoint, order: int = 6) -> tuple:
    """Both residues in the t chart x = x_i + t^2 (works in exact arithmetic).

    direct: res (Q1/v) / int_{x_i} v;  via: res qv * int_{x_i} Q1/v.
    """
    w = QextElem(0, Q1 * ext.inv_Q, ext)
    qv = QextElem(0, schwarzian_q(ext.Q), ext)
    ws = local_series(w, tp, 1, "t", order=order)
    vs = local_series(ext.y, tp, 1, "t", order=order + 4)
    qs = local_series(qv, tp, 1, "t", order=order)
    direct = (ws * _antiderivative(vs).inverse()).coefficient(-1)
    via = (qs * _antiderivative(ws)).coefficient(-1)
    return direct, via


def exact_branch_residue_routes(spec) -> tuple:
    """Both residue routes at the generic root of P, in exact arithmetic (t chart)."""
    ext = spec.ext()
    Q1 = spec.Q1_or_zero()
    return _t_chart_free(ext, Q1, TurningPoint(spec.numerator), "t")


def _t_chart_free(ext, Q1, tp, route):
    order = 4
    while True:
        try:
            if route == "direct":
                return branch_residue_direct(ext, Q1, tp, order)
            if route == "t":
                return t_chart_branch_residues(ext, Q1, tp, order)
            return branch_residue_via_qv(ext, Q1, tp, order)
        except SeriesBudgetError as exc:
            order += 4
            if order > 24:
                raise GFunError(f"series extraction failed: {exc}") from exc


# ---------------------------------------------------------------- assembly

@dataclass
class GTermsReport:
    G_minus1: complex
    G_zero: complex
    G_one: complex
    breakdown: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        enc = lambda c: [complex(c).real, complex(c).imag]

        def conv(x):
            if isinstance(x, dict):
                return {k: conv(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [conv(v) for v in x]
            if isinstance(x, (complex, np.complexfloating)):
                return enc(x)
            if isinstance(x, (np.floating, float)):
                return float(x)
            return x

        return {"G_minus1": enc(self.G_minus1), "G_zero": enc(self.G_zero), "G_one": enc(self.G_one),
                "breakdown": conv(self.breakdown), "errors": conv(self.errors)}


def _reg_sum(point: ModuliPoint, w: QextElem, weights: Sequence[complex]) -> tuple[complex, list]:
    items = [complex(point.reg_integral(w, j)) for j in range(point.gauge.n)]
    return complex(sum(c * v for c, v in zip(weights, items))), items


def _has_q1(point: ModuliPoint) -> bool:
    return not point.Q1.is_zero()


def g_minus1_local(point: ModuliPoint) -> tuple[complex, dict]:
    """Sum (pi i r_j / 2) int_{z_j^(2)}^{z_j^(1)} Q1/v (the part of G_{-1} that is not a path integral)."""
    if not _has_q1(point):
        return 0j, {}
    r = np.array(point.gauge.r)
    w = over_v(point, point.Q1)
    val, items = _reg_sum(point, w, np.pi * 1j * r / 2)
    return val, {"reg_Q1_over_v": items}


def g_minus1(point: ModuliPoint, reference: ModuliPoint, nodes: int = 8) -> complex:
    """G_{-1} = hat G_(Q1) + sum (pi i r_j/2) int Q1/v, hat G integrated from the reference."""
    if not _has_q1(point):
        return 0j
    hatG, _ = integrate_form_along_path(theta_form, reference, [point.chart_vector], nodes)
    return hatG + g_minus1_local(point)[0]


def g_zero_local(point: ModuliPoint) -> tuple[complex, dict]:
    """-sum (pi i r_j/2) int (qv + v/(4 r_j^2)) + sum pi i r_j binom(1/2, 2) int Q1^2/v^3."""
    r = np.array(point.gauge.r)
    ext = point.ext
    q = point.q.to_float()
    items_tau = []
    total = 0j
    for j in range(point.gauge.n):
        w = QextElem(0, q + RatFunc.const(1 / (4 * r[j] ** 2), exact=False), ext)
        val = complex(point.reg_integral(w, j))
        items_tau.append(val)
        total += -np.pi * 1j * r[j] / 2 * val
    out = {"reg_qv_plus": items_tau}
    if _has_q1(point):
        w2 = power_over_v(ext, point.Q1, 2)
        val, items = _reg_sum(point, w2, np.pi * 1j * r * binom_half(2))
        total += val
        out["reg_Q1sq_over_v3"] = items
    return total, out


def g_zero(point: ModuliPoint, reference: ModuliPoint, nodes: int = 8) -> complex:
    """G_0 = -12 pi i log tau_B|_r (relative to the reference) + local terms."""
    log_tau, _ = integrate_form_along_path(tau_one_form, reference, [point.chart_vector], nodes)
    return -12j * np.pi * log_tau + g_zero_local(point)[0]


def g_one(point: ModuliPoint, order: int = 6) -> tuple[complex, dict]:
    """G_1 = -sum_i (5 pi i/72) res_{x_i}((Q1/v)/int_{x_i} v) + sum (pi i r_j/4) int q Q1/v
    + sum pi i/(16 r_j) int Q1/v + sum pi i r_j binom(1/2, 3) int Q1^3/v^5."""
    if not _has_q1(point):
        return 0j, {}
    r = np.array(point.gauge.r)
    ext = point.ext
    Q1 = point.Q1
    P = point.spec.numerator.to_float()
    res_direct, res_via = [], []
    for x in point.cover.turning_points:
        tp = TurningPoint(P, complex(x))
        res_direct.append(complex(_t_chart_free(ext, Q1, tp, "direct")))
        res_via.append(complex(_t_chart_free(ext, Q1, tp, "via")))
    branch = -5j * np.pi / 72 * sum(res_direct)
    q = point.q.to_float()
    t_qQ1, items_qQ1 = _reg_sum(point, QextElem(0, q * Q1 * ext.inv_Q, ext), np.pi * 1j * r / 4)
    t_Q1, items_Q1 = _reg_sum(point, over_v(point, Q1), np.pi * 1j / (16 * r))
    t_cub, items_cub = _reg_sum(point, power_over_v(ext, Q1, 3), np.pi * 1j * r * binom_half(3))
    total = branch + t_qQ1 + t_Q1 + t_cub
    route_defect = max((abs(a - 36 / 5 * b) for a, b in zip(res_direct, res_via)), default=0.0)
    return total, {"branch_residues": res_direct, "branch_residues_via_qv": res_via,
                   "route_defect": route_defect, "branch_term": branch, "qQ1_term": t_qQ1,
                   "Q1_term": t_Q1, "cubic_term": t_cub, "reg_qQ1_over_v": items_qQ1,
                   "reg_Q1_over_v": items_Q1, "reg_Q1cube_over_v5": items_cub}


def gterms(point: ModuliPoint, reference: ModuliPoint, nodes: int = 8) -> GTermsReport:
    has = _has_q1(point)
    hatG = integrate_form_along_path(theta_form, reference, [point.chart_vector], nodes)[0] if has else 0j
    loc_m1, br_m1 = g_minus1_local(point)
    log_tau, _ = integrate_form_along_path(tau_one_form, reference, [point.chart_vector], nodes)
    loc_0, br_0 = g_zero_local(point)
    G1, br_1 = g_one(point)
    breakdown = {"hatG": hatG, "G_minus1_local": loc_m1, "log_tau_relative": log_tau, "G_zero_local": loc_0,
                 **{f"m1_{k}": v for k, v in br_m1.items()}, **{f"0_{k}": v for k, v in br_0.items()},
                 **{f"1_{k}": v for k, v in br_1.items()}}
    errors = {"quadrature_tol": point.tol, "path_nodes": nodes}
    return GTermsReport(hatG + loc_m1 if has else 0j, -12j * np.pi * log_tau + loc_0, G1, breakdown, errors)


# ---------------------------------------------------------------- defining 1-forms

def _dperiods(point: ModuliPoint, build, direction) -> np.ndarray:
    return chart_direction_derivative(lambda p: p.periods(build(p)), point, direction)


def _pair_terms(point: ModuliPoint, direction, terms: Sequence[tuple]) -> complex:
    """sum coef <oint w1, d oint w2> over (coef, build_w1, build_w2)."""
    cache_p, cache_d = {}, {}
    total = 0j
    for coef, b1, b2 in terms:
        if b1 not in cache_p:
            cache_p[b1] = point.periods(_BUILD[b1](point))
        if b2 not in cache_d:
            cache_d[b2] = _dperiods(point, _BUILD[b2], direction)
        total += coef * pairing(cache_p[b1], cache_d[b2])
    return complex(total)


_BUILD = {
    "v": lambda p: p.ext.y,
    "Q1/v": lambda p: over_v(p, p.Q1),
    "Q1^2/v^3": lambda p: power_over_v(p.ext, p.Q1, 2),
    "Q1^3/v^5": lambda p: power_over_v(p.ext, p.Q1, 3),
    "qv": lambda p: qv_elem(p),
    "qQ1/v": lambda p: QextElem(0, p.q.to_float() * p.Q1 * p.ext.inv_Q, p.ext),
}


def dG_minus1_form(point: ModuliPoint, direction) -> complex:
    """1/2 <v, d Q1/v> + 1/2 <Q1/v, d v>."""
    return _pair_terms(point, direction, [(0.5, "v", "Q1/v"), (0.5, "Q1/v", "v")])


def dG_zero_form(point: ModuliPoint, direction) -> complex:
    return _pair_terms(point, direction, [
        (0.25, "Q1/v", "Q1/v"), (-0.125, "v", "Q1^2/v^3"), (-0.125, "Q1^2/v^3", "v"),
        (-0.5, "v", "qv"), (-0.5, "qv", "v")])


def dG_one_form(point: ModuliPoint, direction) -> complex:
    return _pair_terms(point, direction, [
        (-1 / 16, "Q1^2/v^3", "Q1/v"), (-1 / 16, "Q1/v", "Q1^2/v^3"),
        (1 / 16, "v", "Q1^3/v^5"), (1 / 16, "Q1^3/v^5", "v"),
        (-0.25, "Q1/v", "qv"), (-0.25, "qv", "Q1/v"),
        (0.25, "v", "qQ1/v"), (0.25, "qQ1/v", "v")])
