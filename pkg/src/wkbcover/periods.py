"""Integrals of differentials over cycles on the cover.

Quadrature is adaptive Gauss-Legendre with an embedded-style pair (20 and 40
nodes on the same interval); the error estimate is the absolute difference,
summed in absolute value over accepted intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import binom

from .cover import CoverError, CycleSpec, SpectralCover, homology_basis
from .ratfield import Puncture, QextElem, RatFunc, local_series, to_complex

_LO = leggauss(20)
_HI = leggauss(40)


class QuadratureError(RuntimeError):
    """Tolerance not reached at the maximum subdivision depth."""


Integrand = Callable[[np.ndarray, np.ndarray], np.ndarray]


def elem_integrand(elem: QextElem) -> Integrand:
    """f(x, y) = even(x) + odd(x) y, the dx-coefficient of the differential."""
    fe = elem.to_float()
    even = None if fe.even.is_zero() else fe.even
    odd = None if fe.odd.is_zero() else fe.odd

    def f(x, y):
        out = np.zeros_like(x)
        if even is not None:
            out = out + even(x)
        if odd is not None:
            out = out + odd(x) * y
        return out

    return f


def _rule(f: Integrand, a: complex, b: complex, sheet: int, cover: SpectralCover, nodes):
    xg, wg = nodes
    x = (a + b) / 2 + (b - a) / 2 * xg
    y = sheet * cover.y1(x)
    return np.sum(wg * f(x, y)) * (b - a) / 2


def integrate_segment(f: Integrand, a: complex, b: complex, sheet: int, cover: SpectralCover,
                      tol: float = 1e-12, max_depth: int = 30) -> tuple[complex, float]:
    """Adaptive integral over a straight piece lying on one sheet (no cut crossing inside)."""
    stack = [(a, b, 0)]
    total = 0j
    err = 0.0
    length = abs(b - a)
    while stack:
        lo, hi, depth = stack.pop()
        v1 = _rule(f, lo, hi, sheet, cover, _LO)
        v2 = _rule(f, lo, hi, sheet, cover, _HI)
        e = abs(v2 - v1)
        local_tol = tol * max(abs(hi - lo) / length, 1e-6)
        if e <= local_tol or depth >= max_depth:
            if depth >= max_depth and e > local_tol:
                raise QuadratureError(f"quadrature tolerance {tol:g} not reached (error {e:.2e})")
            total += v2
            err += e
        else:
            mid = (lo + hi) / 2
            stack.append((mid, hi, depth + 1))
            stack.append((lo, mid, depth + 1))
    return total, err


def integrate_path(cover: SpectralCover, f: Integrand, verts: Sequence, sheet: int,
                   tol: float = 1e-12) -> tuple[complex, float, int]:
    """Integral along a lifted polyline; returns (value, error estimate, end sheet)."""
    pieces, end = cover.split_path(list(verts), sheet)
    total = 0j
    err = 0.0
    tol_piece = tol / max(len(pieces), 1)
    for a, b, s in pieces:
        if a == b:
            continue
        v, e = integrate_segment(f, a, b, s, cover, tol_piece)
        total += v
        err += e
    return total, err, end


def integrate_chain(cover: SpectralCover, f: Integrand, cycle: CycleSpec, tol: float = 1e-12) -> tuple[complex, float]:
    total = 0j
    err = 0.0
    for coef, verts, sheet in cycle.components:
        v, e, _ = integrate_path(cover, f, verts, sheet, tol)
        total += coef * v
        err += abs(coef) * e
    return total, err


def integrate_differential(cover: SpectralCover, elem, cycle: CycleSpec, tol: float = 1e-11) -> tuple[complex, float]:
    """Closed-cycle integral of a QextElem (read as a differential) or a raw integrand f(x, y)."""
    if cycle.closure != "closed":
        raise CoverError("use regularized_pole_integral for pole-to-pole arcs")
    f = elem_integrand(elem) if isinstance(elem, QextElem) else elem
    return integrate_chain(cover, f, cycle, tol)


# ---------------------------------------------------------------- period chart

@dataclass
class PeriodChart:
    A: list
    B: list
    t_periods: list
    A_err: list = field(default_factory=list)
    B_err: list = field(default_factory=list)
    t_err: list = field(default_factory=list)

    @property
    def vector(self) -> np.ndarray:
        return np.array(list(self.A) + list(self.B), dtype=complex)

    @property
    def dim(self) -> int:
        return len(self.A) + len(self.B)

    def to_json(self) -> dict:
        enc = lambda c: [c.real, c.imag]
        return {"A": [enc(a) for a in self.A], "B": [enc(b) for b in self.B],
                "t_periods": [enc(t) for t in self.t_periods],
                "A_err": self.A_err, "B_err": self.B_err, "t_err": self.t_err}


def split_basis(cycles: Sequence[CycleSpec]) -> dict:
    out = {"a": [], "b": [], "t": [], "kappa": []}
    for c in cycles:
        key = c.label.split("-")[0]
        out[key].append(c)
    return out


def period_chart(cover: SpectralCover, cycles: Sequence[CycleSpec] | None = None, tol: float = 1e-11,
                 t_check: float = 1e-8) -> PeriodChart:
    cycles = cycles if cycles is not None else homology_basis(cover)
    basis = split_basis(cycles)
    v = cover.spec.to_float().ext().y
    f = elem_integrand(v)
    A, Ae, B, Be, T, Te = [], [], [], [], [], []
    for c in basis["a"]:
        val, e = integrate_chain(cover, f, c, tol)
        A.append(val)
        Ae.append(e)
    for c in basis["b"]:
        val, e = integrate_chain(cover, f, c, tol)
        B.append(val)
        Be.append(e)
    for j, c in enumerate(basis["t"]):
        val, e = integrate_chain(cover, f, c, tol)
        T.append(val)
        Te.append(e)
        expect = 2j * np.pi * cover.r[j]
        if abs(val - expect) > t_check * max(1.0, abs(expect)):
            raise QuadratureError(f"t-period {j} = {val} differs from 2 pi i r_j = {expect}")
    return PeriodChart(A, B, T, Ae, Be, Te)


# ---------------------------------------------------------------- regularized pole-to-pole integrals

def _endpoint_antiderivative(elem: QextElem, z, r, local_sheet: int, xi: complex, order: int = 40,
                             expect_res=None) -> complex:
    """Regularized int_{z}^{z + xi} of elem: c_{-1} log xi + sum c_k xi^(k+1)/(k+1)."""
    ser = local_series(elem.to_float(), Puncture(complex(z), complex(r)), local_sheet, "linear", order=order)
    if ser.min_exp < -1 and any(abs(complex(ser.coefficient(k))) > 1e-9 for k in range(ser.min_exp, -1)):
        raise ValueError("singularity stronger than a simple pole at the puncture")
    c_m1 = complex(ser.coefficient(-1)) if ser.min_exp <= -1 else 0j
    if expect_res is not None and abs(c_m1 - expect_res) > 1e-8 * max(1.0, abs(expect_res)):
        raise ValueError(f"subtraction coefficient {c_m1} inconsistent with expected {expect_res}")
    out = c_m1 * np.log(xi) if c_m1 != 0 else 0j
    for k in range(max(ser.min_exp, 0), ser.order):
        out += complex(ser.coefficient(k)) * xi ** (k + 1) / (k + 1)
    return out


def arc_integral(cover: SpectralCover, elem: QextElem, verts: Sequence, sheet: int, j: int, cutoff: float | None = None,
                 tol: float = 1e-11) -> tuple[complex, float]:
    """Regularized integral along a polyline from z_j (on ``sheet``) back to z_j (other sheet)."""
    verts = [complex(p) for p in verts]
    zj = complex(cover.z[j])
    rj = complex(cover.r[j])
    feats = [f for f in cover.feature_points() if abs(f - zj) > 1e-12]
    R = min(abs(f - zj) for f in feats)
    delta = cutoff if cutoff is not None else 0.2 * min(R, abs(verts[1] - zj), abs(verts[-2] - zj))
    d_start = (verts[1] - zj) / abs(verts[1] - zj)
    d_end = (verts[-2] - zj) / abs(verts[-2] - zj)
    xa = zj + delta * d_start
    xb = zj + delta * d_end
    inner = [xa] + verts[1:-1] + [xb]
    f = elem_integrand(elem)
    val, err, end = integrate_path(cover, f, inner, sheet, tol)
    eps_j = int(cover.eps[j])
    s_start = 1 if sheet == eps_j else -1
    s_end = 1 if end == eps_j else -1
    val += _endpoint_antiderivative(elem, zj, rj, s_start, xa - zj)
    val -= _endpoint_antiderivative(elem, zj, rj, s_end, xb - zj)
    return val, err


def kappa_integral(cover: SpectralCover, elem: QextElem, kappa: CycleSpec, j: int, cutoff: float | None = None,
                   tol: float = 1e-11) -> tuple[complex, float]:
    """int over kappa-_j (half of the regularized path from z_j^(1) to z_j^(2))."""
    coef, verts, sheet = kappa.components[0]
    val, err = arc_integral(cover, elem, verts, sheet, j, cutoff, tol)
    return coef * val, abs(coef) * err


def regularized_pole_integral(cover: SpectralCover, elem: QextElem, j: int, cycles: Sequence[CycleSpec] | None = None,
                              cutoff: float | None = None, tol: float = 1e-11) -> tuple[complex, float]:
    """reg int from z_j^(2) to z_j^(1), i.e. minus twice the kappa-_j integral.

    The divergent part c_{-1} log(x - z_j) is removed analytically at both ends
    using the local series in the affine coordinate at z_j.
    """
    cycles = cycles if cycles is not None else homology_basis(cover)
    kap = split_basis(cycles)["kappa"][j]
    val, err = kappa_integral(cover, elem, kap, j, cutoff, tol)
    return -2 * val, 2 * err


# ---------------------------------------------------------------- binomial expansion

def binom_half(k: int) -> float:
    return float(binom(0.5, k))


def binom_half_exact(k: int) -> Fraction:
    out = Fraction(1)
    for i in range(k):
        out *= (Fraction(1, 2) - i) / (i + 1)
    return out


def power_over_v(spec_ext, Qt: RatFunc, k: int) -> QextElem:
    """Qtilde^k / v^(2k-1) as a differential: odd element with odd part Qt^k / Q^k."""
    if k == 0:
        return spec_ext.y
    return QextElem(0, (Qt * spec_ext.inv_Q) ** k, spec_ext)


def binomial_period_expansion(cover: SpectralCover, Qt: RatFunc, cycle: CycleSpec, K: int,
                              tol: float = 1e-11) -> list:
    """Coefficients binom(1/2, k) oint Qtilde^k / v^(2k-1), k = 0..K."""
    ext = cover.spec.to_float().ext()
    Qtf = Qt.to_float()
    out = []
    for k in range(K + 1):
        val, _ = integrate_differential(cover, power_over_v(ext, Qtf, k), cycle, tol)
        out.append(binom_half(k) * val)
    return out


def direct_deformed_period(cover: SpectralCover, Qt: RatFunc, hbar: float, cycle: CycleSpec,
                           tol: float = 1e-12) -> complex:
    """oint sqrt(Q + hbar Qtilde) = oint y sqrt(1 + hbar Qtilde/Q) along the same representative."""
    Qtf = Qt.to_float()

    def f(x, y):
        return y * np.sqrt(1 + hbar * Qtf(x) / cover.Qval(x))

    return integrate_chain(cover, f, cycle, tol)[0]
