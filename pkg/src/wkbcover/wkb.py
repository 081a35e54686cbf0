"""WKB series for phi'' = (Q/hbar^2 + Q1/hbar) phi in the sphere's affine chart.

With phi = exp(int s v), v = y dx, y^2 = Q, the function s satisfies the
Riccati equation ds + s^2 v = (-q + p/hbar + 1/hbar^2) v, p = Q1/Q, with
s = sum_{k >= -1} hbar^k s_k. The s_k live in C(x)[y]/(y^2 - Q) and the
recursion runs over that field, so every s_k is a global object.

Every s_k splits as a_k + b_k y. The mu-invariant part a_k gives the odd
differential v_k = a_k v, and only the v_k enter cycle integrals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .cover import QuadDiffSpec, SpectralCover, CycleSpec
from .periods import elem_integrand, integrate_chain, split_basis
from .ratfield import (FieldError, Puncture, QextElem, QuadExt, RatFunc, RootElem, SeriesBudgetError, TurningPoint,
                       local_series, to_complex)

DEFAULT_EXACT_CAP = 6


def _const(c, exact: bool) -> RatFunc:
    return RatFunc.const(Fraction(c) if exact else complex(c), exact=exact)


def schwarzian_q(Q: RatFunc) -> RatFunc:
    """q = -S_v / (2Q) with S_v the Schwarzian of int v.

    With L = Q'/Q one has S_v = L'/2 - L^2/8, so q = (L^2 - 4L') / (16 Q).
    """
    ex = Q.exact
    L = Q.derivative() / Q
    return (L * L - L.derivative() * _const(4, ex)) / (Q * _const(16, ex))


@dataclass
class WKBSeries:
    """s_{-1}, ..., s_N as elements of the quadratic extension."""

    terms: list
    ext: QuadExt
    Q1: RatFunc
    q: RatFunc
    branch: int = 1

    @property
    def order(self) -> int:
        return len(self.terms) - 2

    @property
    def exact(self) -> bool:
        return self.ext.exact

    def s(self, k: int) -> QextElem:
        if k < -1 or k > self.order:
            raise IndexError(f"order {k} outside -1..{self.order}")
        return self.terms[k + 1]

    @property
    def p(self) -> RatFunc:
        return self.Q1 * self.ext.inv_Q


def riccati_recursion(spec: QuadDiffSpec, N: int, exact: bool | None = None, branch: int = 1,
                      exact_cap: int = DEFAULT_EXACT_CAP) -> WKBSeries:
    """s_{-1} = branch, s_0 = branch p/2, s_{k+1} = -(branch/2)(s_k'/y + sum_{i+j=k, i,j>=0} s_i s_j)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if branch not in (1, -1):
        raise ValueError("branch is +1 or -1")
    exact = spec.exact if exact is None else (exact and spec.exact)
    if exact and N > exact_cap:
        raise FieldError(f"exact recursion capped at order {exact_cap}; use float mode")
    sp = spec if exact else spec.to_float()
    ext = sp.ext()
    Q1 = sp.Q1_or_zero()
    q = schwarzian_q(ext.Q)
    p = Q1 * ext.inv_Q
    half = _const(Fraction(branch, 2), exact)
    s = [ext.elem(_const(branch, exact), 0), ext.elem(p * half, 0)]
    for k in range(0, N):
        sk = s[k + 1]
        acc = sk.derivative().div_by_v()
        if k == 0:
            acc = acc + ext.elem(q, 0)
        for i in range(0, k + 1):
            acc = acc + s[i + 1] * s[k - i + 1]
        s.append(acc * (-half))
    return WKBSeries(s, ext, Q1, q, branch)


def odd_even_split(series: WKBSeries) -> tuple[list, list]:
    """Per order: (mu-invariant parts a_k as elements, y-parts b_k y as elements)."""
    inv = [t.even_projection() for t in series.terms]
    anti = [t.odd_projection() for t in series.terms]
    return inv, anti


def vk_differential(series: WKBSeries, k: int) -> QextElem:
    """v_k = a_k v (dx-coefficient), odd under the sheet swap."""
    a = series.s(k).even
    return QextElem(0, a, series.ext)


def closed_form_vk(series: WKBSeries, k: int, literal: bool = True) -> QextElem:
    """Closed forms for k <= 2 (dx-coefficients).

    v_{-1} = v, v_0 = Q1/(2v), v_1 = -Q1^2/(8v^3) - q v/2.
    For k = 2 ``literal`` gives (1/4)(q Q1/v - Q1^3/v^5); otherwise the form
    produced by the recursion, (1/4) q Q1/v + (1/16) Q1^3/v^5 + (1/8) d(dp/v).
    """
    ext, Q1, q, ex = series.ext, series.Q1, series.q, series.exact
    iQ = ext.inv_Q
    c = lambda v: _const(v, ex)
    if k == -1:
        return QextElem(0, c(series.branch), ext)
    if series.branch != 1:
        raise ValueError("closed forms are stated for the +1 branch")
    if k == 0:
        return QextElem(0, Q1 * iQ * c(Fraction(1, 2)), ext)
    if k == 1:
        return QextElem(0, -(Q1 * Q1 * iQ * iQ * c(Fraction(1, 8))) - q * c(Fraction(1, 2)), ext)
    if k == 2:
        if literal:
            odd = (q * Q1 * iQ - Q1 ** 3 * iQ ** 3) * c(Fraction(1, 4))
            return QextElem(0, odd, ext)
        p = Q1 * iQ
        dp_over_v = QextElem(0, p.derivative() * iQ, ext)  # (dp/v) as a function: p'/y = p' y/Q
        exact_part = dp_over_v.derivative().scale(Fraction(1, 8) if ex else 0.125)
        odd = q * Q1 * iQ * c(Fraction(1, 4)) + Q1 ** 3 * iQ ** 3 * c(Fraction(1, 16))
        return QextElem(0, odd, ext) + exact_part
    raise ValueError("closed forms only for k <= 2")


def normalized_difference(a: QextElem, b: QextElem) -> float:
    """0.0 exactly when a == b structurally; otherwise max |a - b| / max |a| on probe points."""
    d = a - b
    if d.is_zero():
        return 0.0
    fa, fd = a.to_float(), d.to_float()
    probe = [0.37 + 0.21j, -0.53 + 0.77j, 1.13 - 0.41j]
    num = max(abs(fd.odd(x)) + abs(fd.even(x)) for x in probe)
    den = max(abs(fa.odd(x)) + abs(fa.even(x)) for x in probe) or 1.0
    return max(float(num / den), 1e-300) if a.ext.exact else float(num / den)


def symmetric_part_identity(series: WKBSeries, k: int) -> RatFunc:
    """a_k' + 2 Q sum_{i+j=k} b_i a_j, the mu-invariant part of the order-k Riccati equation.

    Vanishes identically; the returned RatFunc is the defect. The sum contains
    b_{k+1}, so the series must reach order k + 1.
    """
    if k + 1 > series.order:
        raise IndexError(f"identity at order {k} needs s_{k + 1}")
    a = [t.even for t in series.terms]
    b = [t.odd for t in series.terms]
    acc = a[k + 1].derivative()
    tot = None
    for i in range(-1, k + 2):
        j = k - i
        if j > series.order or i > series.order:
            continue
        term = b[i + 1] * a[j + 1]
        tot = term if tot is None else tot + term
    if tot is not None:
        acc = acc + tot * series.ext.Q * _const(2, series.exact)
    return acc


def turning_point_residues(series: WKBSeries, k: int, cover: SpectralCover | None = None,
                           order: int | None = None) -> list:
    """Residues of v_k at the turning points.

    Exact mode returns one algebraic residue at the generic root of the numerator
    (a RootElem, zero iff the residue vanishes at every x_i). Float mode returns a
    list of (x_i, residue, leading-coefficient scale).
    """
    vk = vk_differential(series, k)
    P = series.ext.Q.num
    if series.exact:
        return [_t_chart_residue(vk, TurningPoint(P), order)]
    xs = cover.turning_points if cover is not None else P.to_float().roots()
    out = []
    for x in xs:
        ser, res = _t_chart_residue(vk, TurningPoint(P.to_float(), complex(x)), order, keep=True)
        scale = max([abs(complex(c)) for c in ser.coeffs] + [1e-300])
        out.append((complex(x), complex(res), scale))
    return out


def _t_chart_residue(vk: QextElem, tp: TurningPoint, order: int | None, keep: bool = False):
    """Coefficient of t^-1 dt, raising the truncation budget until it is known."""
    order = order if order is not None else 1
    while True:
        ser = local_series(vk, tp, 1, "t", order=order)
        try:
            res = ser.coefficient(-1)
            return (ser, res) if keep else res
        except SeriesBudgetError:
            order += 6
            if order > 64:
                raise


def residue_is_zero(res) -> bool:
    if isinstance(res, RootElem):
        return res.is_zero
    return res == 0 or (hasattr(res, "__bool__") and not res)


def riccati_residual(series: WKBSeries, xs: Sequence, hbar: float, sheet_values: Sequence | None = None) -> float:
    """max |S'/y + S^2 - (-q + p/hbar + 1/hbar^2)| over the sample points.

    S is the series truncated after s_N; the first uncancelled order is hbar^N.
    """
    N = series.order
    fl = [t.to_float() for t in series.terms]
    dfl = [t.derivative() for t in fl]
    xs = np.asarray(xs, dtype=complex)
    Qf = series.ext.Q.to_float()
    ys = np.sqrt(Qf(xs)) if sheet_values is None else np.asarray(sheet_values, dtype=complex)
    qf = series.q.to_float()(xs)
    pf = (series.Q1 * series.ext.inv_Q).to_float()(xs) if not series.Q1.is_zero() else 0 * xs
    S = sum(hbar ** (k - 1) * fl[k].evaluate(xs, ys) for k in range(N + 2))
    dS = sum(hbar ** (k - 1) * dfl[k].evaluate(xs, ys) for k in range(N + 2))
    lhs = dS / ys + S * S
    rhs = -qf + pf / hbar + 1 / hbar ** 2
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------- Voros table

@dataclass
class VorosTable:
    labels: list
    orders: list
    values: dict
    errors: dict
    residue_check: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        enc = lambda c: [complex(c).real, complex(c).imag]
        return {"orders": self.orders,
                "cycles": {lab: {"values": [enc(v) for v in self.values[lab]], "errors": self.errors[lab]}
                           for lab in self.labels},
                "t_residue_check": {lab: [enc(v) for v in vals] for lab, vals in self.residue_check.items()}}


def voros_table(cover: SpectralCover, series: WKBSeries, cycles: Sequence[CycleSpec], tol: float = 1e-11) -> VorosTable:
    """oint v_k over every closed cycle, k = -1..N; t-cycles also by residues at z_j^(1)."""
    labels, values, errors, res_check = [], {}, {}, {}
    ks = list(range(-1, series.order + 1))
    diffs = [vk_differential(series, k).to_float() for k in ks]
    integrands = [elem_integrand(d) for d in diffs]
    basis = split_basis(cycles)
    for c in basis["a"] + basis["b"] + basis["t"]:
        labels.append(c.label)
        vals, errs = [], []
        for f in integrands:
            v, e = integrate_chain(cover, f, c, tol)
            vals.append(v)
            errs.append(e)
        values[c.label] = vals
        errors[c.label] = errs
    for j, c in enumerate(basis["t"]):
        pt = Puncture(complex(cover.z[j]), complex(cover.r[j]))
        res = []
        for d in diffs:
            ser = local_series(d, pt, 1, "linear", order=4)
            res.append(2j * np.pi * complex(ser.coefficient(-1)))
        res_check[c.label] = res
    return VorosTable(labels, ks, values, errors, res_check)
