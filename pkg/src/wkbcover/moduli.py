"""Functions and 1-forms on the fixed-residue stratum in period coordinates.

A point is parametrized in a gauge chart: z_1, z_2, z_3 are pinned, the free
parameters are the remaining puncture positions and the coefficients of T in
P = L + D T (L the Lagrange interpolant that fixes the biresidues). The chart
(A_j, B_j) = (oint_{a-_j} v, oint_{b-_j} v) has the same dimension 2(n-3).

Cycle representatives are frozen along a study: a moved point reuses the
polylines of its parent (t-loops and kappa ends follow the punctures), so the
homology basis and the kappa routes vary continuously.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp

from .cover import (CoverError, CycleSpec, QuadDiffSpec, SpectralCover, _crossings, homology_basis, stratum_spec)
from .periods import (QuadratureError, elem_integrand, integrate_chain, kappa_integral, period_chart,
                      split_basis)
from .ratfield import QextElem, RatFunc
from .wkb import schwarzian_q


class ModuliError(RuntimeError):
    """Newton non-convergence, degenerate steps or invalid frozen representatives."""


# ---------------------------------------------------------------- gauge chart

@dataclass(frozen=True)
class GaugeChart:
    """Pinned z_1..z_3, fixed residues r and the numerator R of Q1 = R/D (held constant)."""

    z_fixed: tuple
    r: tuple
    R: tuple | None = None

    @property
    def n(self) -> int:
        return len(self.r)

    @property
    def dim(self) -> int:
        return 2 * (self.n - 3)

    def split(self, params) -> tuple[list, list]:
        params = np.asarray(params, dtype=complex)
        k = self.n - 3
        return list(self.z_fixed) + list(params[:k]), list(params[k:])

    def spec(self, params) -> QuadDiffSpec:
        z, T = self.split(params)
        return stratum_spec(z, self.r, T, self.R, exact=False)

    def coefficient_vector(self, params) -> np.ndarray:
        """Ascending coefficients of P (length 2n-3) followed by those of D (length n+1)."""
        z, T = self.split(params)
        sp = stratum_spec(z, self.r, T, None, exact=False)
        n = self.n
        P = np.zeros(2 * n - 3, dtype=complex)
        pc = np.asarray(sp.numerator.coeffs, dtype=complex)
        P[: len(pc)] = pc
        D = np.asarray(npoly.polyfromroots(z), dtype=complex)
        return np.concatenate([P, D])

    @classmethod
    def from_data(cls, z: Sequence, r: Sequence, T: Sequence, R: Sequence | None = None) -> tuple["GaugeChart", np.ndarray]:
        z = [complex(c) for c in z]
        gauge = cls(tuple(z[:3]), tuple(complex(c) for c in r), None if R is None else tuple(complex(c) for c in R))
        params = np.array(z[3:] + [complex(c) for c in T], dtype=complex)
        return gauge, params


def _circle_derivative(fn: Callable, h: float, m: int = 8):
    """f'(0) from m samples on the circle |t| = h (exact for polynomials of degree < m)."""
    w = np.exp(2j * np.pi * np.arange(m) / m)
    vals = [fn(h * wk) for wk in w]
    return sum(v / wk for v, wk in zip(vals, w)) / (m * h)


# ---------------------------------------------------------------- frozen cycles

def transport_cycles(cycles: Sequence[CycleSpec], old_z: Sequence, new_z: Sequence) -> list[CycleSpec]:
    """t-loops translate with their puncture; kappa arcs keep their route, ends follow z_j."""
    out = []
    t_idx = k_idx = 0
    for c in cycles:
        kind = c.label.split("-")[0]
        if kind == "t":
            dz = complex(new_z[t_idx]) - complex(old_z[t_idx])
            comps = [(coef, [p + dz for p in verts], s) for coef, verts, s in c.components]
            out.append(CycleSpec(c.label, comps, c.closure))
            t_idx += 1
        elif kind == "kappa":
            zj = complex(new_z[k_idx])
            comps = [(coef, [zj] + list(verts[1:-1]) + [zj], s) for coef, verts, s in c.components]
            out.append(CycleSpec(c.label, comps, c.closure))
            k_idx += 1
        else:
            out.append(c)
    return out


def _check_frozen(cover: SpectralCover, cycles: Sequence[CycleSpec]) -> None:
    clear = cover.tol.clearance
    for c in cycles:
        for coef, verts, s in c.components:
            if c.closure == "closed":
                if cover.clearance_of(verts) < clear:
                    raise ModuliError(f"frozen representative {c.label} lost clearance")
                if cover.end_sheet(verts, s) != s:
                    raise ModuliError(f"frozen representative {c.label} no longer closes")
            else:
                j = int(c.label.split("_")[1]) - 1
                if cover.clearance_of(verts[1:-1]) < clear:
                    raise ModuliError(f"frozen route {c.label} lost clearance")
                if cover.end_sheet(verts, s) != -s or s != int(cover.eps[j]):
                    raise ModuliError(f"frozen route {c.label} changed its end sheet")


# ---------------------------------------------------------------- points

class ModuliPoint:
    """A point of the stratum with its cover, frozen cycles and period chart."""

    def __init__(self, gauge: GaugeChart, params, cycles: Sequence[CycleSpec] | None = None,
                 order_hint: Sequence | None = None, tol: float = 1e-12):
        self.gauge = gauge
        self.params = np.asarray(params, dtype=complex)
        if len(self.params) != gauge.dim:
            raise ModuliError(f"expected {gauge.dim} parameters")
        self.tol = tol
        self.spec = gauge.spec(self.params)
        self.cover = SpectralCover(self.spec, order_hint=order_hint)
        if cycles is None:
            self.cycles = homology_basis(self.cover)
        else:
            self.cycles = list(cycles)
            _check_frozen(self.cover, self.cycles)
        self.basis = split_basis(self.cycles)
        self._chart = None
        self._ext = None
        self._q = None

    @classmethod
    def from_data(cls, z, r, T, R=None, **kw) -> "ModuliPoint":
        gauge, params = GaugeChart.from_data(z, r, T, R)
        return cls(gauge, params, **kw)

    def moved(self, params) -> "ModuliPoint":
        """Same gauge, new parameters, cycles carried over from this point."""
        params = np.asarray(params, dtype=complex)
        new_z, _ = self.gauge.split(params)
        cyc = transport_cycles(self.cycles, self.cover.z, new_z)
        return ModuliPoint(self.gauge, params, cyc, order_hint=self.cover.turning_points, tol=self.tol)

    # cached data
    @property
    def ext(self):
        if self._ext is None:
            self._ext = self.spec.ext()
        return self._ext

    @property
    def q(self) -> RatFunc:
        if self._q is None:
            self._q = schwarzian_q(self.ext.Q)
        return self._q

    @property
    def Q1(self) -> RatFunc:
        return self.spec.Q1_or_zero()

    @property
    def chart(self):
        if self._chart is None:
            self._chart = period_chart(self.cover, self.cycles, tol=self.tol)
        return self._chart

    @property
    def chart_vector(self) -> np.ndarray:
        return self.chart.vector

    @property
    def genus(self) -> int:
        return self.cover.genus

    # integrals
    def periods(self, w) -> np.ndarray:
        """(oint_{a-_j} w, oint_{b-_j} w) for a QextElem or a raw integrand f(x, y)."""
        f = elem_integrand(w) if isinstance(w, QextElem) else w
        out = [integrate_chain(self.cover, f, c, self.tol)[0] for c in self.basis["a"] + self.basis["b"]]
        return np.array(out, dtype=complex)

    def kappa(self, w: QextElem, j: int) -> complex:
        return kappa_integral(self.cover, w, self.basis["kappa"][j], j, tol=self.tol)[0]

    def reg_integral(self, w: QextElem, j: int) -> complex:
        """reg int from z_j^(2) to z_j^(1) along the frozen kappa route."""
        return -2 * self.kappa(w, j)

    # parameter derivatives
    def coefficient_derivatives(self, h: float = 1e-2) -> list[tuple[np.ndarray, np.ndarray]]:
        """(dP/dp, dD/dp) coefficient arrays for every parameter p."""
        n = self.gauge.n
        out = []
        for p in range(len(self.params)):
            e = np.zeros(len(self.params), dtype=complex)
            e[p] = 1

            def fn(t, e=e):
                return self.gauge.coefficient_vector(self.params + t * e)

            d = _circle_derivative(fn, h * (1 + abs(self.params[p])))
            out.append((d[: 2 * n - 3], d[2 * n - 3:]))
        return out

    def param_velocity_integrands(self) -> list[Callable]:
        """f_p(x, y) = dQ/dp / (2y): the fixed-x variation of v along parameter p."""
        P = np.asarray(self.gauge.coefficient_vector(self.params)[: 2 * self.gauge.n - 3])
        D = npoly.polyfromroots(self.cover.z)
        out = []
        for dP, dD in self.coefficient_derivatives():
            def f(x, y, dP=dP, dD=dD):
                Dx = npoly.polyval(x, D)
                dQ = (npoly.polyval(x, dP) * Dx - 2 * npoly.polyval(x, P) * npoly.polyval(x, dD)) / Dx ** 3
                return dQ / (2 * y)
            out.append(f)
        return out

    def jacobian(self) -> np.ndarray:
        """d(chart)/d(params): J[i, p] = oint_{s_i} dQ/dp / (2v)."""
        cols = [self.periods(f) for f in self.param_velocity_integrands()]
        return np.array(cols, dtype=complex).T

    def chart_velocity(self, direction) -> np.ndarray:
        """Parameter velocity c with J c = direction."""
        return np.linalg.solve(self.jacobian(), np.asarray(direction, dtype=complex))


# ---------------------------------------------------------------- moves and derivatives

def _newton(point: ModuliPoint, target: np.ndarray, tol: float, max_iter: int) -> ModuliPoint:
    cur = point
    scale = 1 + float(np.max(np.abs(target)))
    for _ in range(max_iter):
        res = target - cur.chart_vector
        if float(np.max(np.abs(res))) < tol * scale:
            return cur
        step = np.linalg.solve(cur.jacobian(), res)
        limit = 0.25 * (1 + float(np.max(np.abs(cur.params))))
        size = float(np.max(np.abs(step)))
        if size > limit:
            step = step * (limit / size)
        try:
            cur = cur.moved(cur.params + step)
        except CoverError as exc:
            raise ModuliError(f"Newton step left the generic locus: {exc}") from exc
    res = target - cur.chart_vector
    if float(np.max(np.abs(res))) < 100 * tol * scale:
        return cur
    raise ModuliError(f"Newton did not converge (residual {np.max(np.abs(res)):.2e})")


def moduli_move(point: ModuliPoint, target, trust: float = 0.05, tol: float = 1e-11,
                max_iter: int = 25) -> ModuliPoint:
    """The point whose chart equals ``target``, reached by Newton continuation.

    The displacement is split into sub-steps of relative size at most ``trust``.
    """
    target = np.asarray(target, dtype=complex)
    start = point.chart_vector
    dist = target - start
    if not np.any(dist):
        return point
    steps = max(1, math.ceil(float(np.max(np.abs(dist))) / (trust * (1 + float(np.max(np.abs(start)))))))
    cur = point
    for k in range(1, steps + 1):
        cur = _newton(cur, start + dist * k / steps, tol, max_iter)
    return cur


def default_step(point: ModuliPoint, rel: float = 1e-4) -> float:
    return rel * float(np.linalg.norm(point.chart_vector))


def chart_derivative(fn: Callable[[ModuliPoint], complex], point: ModuliPoint, direction, eps: float | None = None,
                     richardson: bool = True):
    """Directional derivative along a chart direction by central differences through moduli_move.

    One Richardson step combines steps eps and eps/2.
    """
    d = np.asarray(direction, dtype=complex)
    eps = eps if eps is not None else default_step(point)
    c0 = point.chart_vector

    def central(h):
        fp = fn(moduli_move(point, c0 + h * d))
        fm = fn(moduli_move(point, c0 - h * d))
        return (np.asarray(fp) - np.asarray(fm)) / (2 * h)

    d1 = central(eps)
    if not richardson:
        return d1
    d2 = central(eps / 2)
    return (4 * d2 - d1) / 3


def param_derivative(fn: Callable[[ModuliPoint], complex], point: ModuliPoint, velocity, h: float = 1e-3, m: int = 8):
    """d/dt fn(point moved to params + t velocity) at t = 0 by a circle stencil (no Newton solve)."""
    c = np.asarray(velocity, dtype=complex)
    scale = h / max(float(np.max(np.abs(c))), 1e-300) * (1 + float(np.max(np.abs(point.params))))
    return _circle_derivative(lambda t: np.asarray(fn(point.moved(point.params + t * c))), scale, m)


def chart_direction_derivative(fn: Callable[[ModuliPoint], complex], point: ModuliPoint, direction,
                               h: float = 1e-3):
    """Holomorphic directional derivative along a chart direction via the parameter velocity J^-1 e."""
    return param_derivative(fn, point, point.chart_velocity(direction), h)


def basis_directions(point: ModuliPoint) -> list[np.ndarray]:
    """Unit chart directions for dA_1..dA_g, dB_1..dB_g."""
    d = point.gauge.dim
    return [np.eye(d, dtype=complex)[i] for i in range(d)]


# ---------------------------------------------------------------- 1-forms

@dataclass
class OneFormSample:
    """Coefficients of dA_1..dA_g, dB_1..dB_g at a chart point."""

    components: np.ndarray
    chart: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    def __call__(self, direction) -> complex:
        return complex(np.dot(self.components, np.asarray(direction, dtype=complex)))

    def to_json(self) -> dict:
        return {"components": [[c.real, c.imag] for c in self.components],
                "chart": [[c.real, c.imag] for c in self.chart]}


def pairing(w1_periods: np.ndarray, w2_periods: np.ndarray) -> complex:
    """<oint w1, oint w2> = sum_j (oint_b w1 oint_a w2 - oint_a w1 oint_b w2)."""
    g = len(w1_periods) // 2
    a1, b1 = w1_periods[:g], w1_periods[g:]
    a2, b2 = w2_periods[:g], w2_periods[g:]
    return complex(np.sum(b1 * a2 - a1 * b2))


def form_from_periods(w_periods: np.ndarray, chart: np.ndarray | None = None) -> OneFormSample:
    """The 1-form <oint w, d oint v>: components (oint_b w, -oint_a w)."""
    g = len(w_periods) // 2
    comps = np.concatenate([w_periods[g:], -w_periods[:g]])
    return OneFormSample(comps, np.zeros(0, dtype=complex) if chart is None else chart)


def over_v(point: ModuliPoint, F: RatFunc) -> QextElem:
    """F/v as a differential (odd part F/Q)."""
    return QextElem(0, F.to_float() * point.ext.inv_Q, point.ext)


def theta_form(point: ModuliPoint, family: RatFunc | Callable | None = None) -> OneFormSample:
    """Theta_(F) = sum_j [ (oint_b F/v) dA_j - (oint_a F/v) dB_j ].

    ``family`` is a quadratic differential F (RatFunc) or a callable point -> F;
    the default is the point's Q1.
    """
    if family is None:
        F = point.Q1
    elif callable(family) and not isinstance(family, RatFunc):
        F = family(point)
    else:
        F = family
    if F.is_zero():
        return OneFormSample(np.zeros(point.gauge.dim, dtype=complex), point.chart_vector)
    return form_from_periods(point.periods(over_v(point, F)), point.chart_vector)


def qv_elem(point: ModuliPoint) -> QextElem:
    return QextElem(0, point.q.to_float(), point.ext)


def tau_one_form(point: ModuliPoint) -> OneFormSample:
    """d log tau_B at fixed r: (1/12 pi i) sum_j [ (oint_b qv) dA_j - (oint_a qv) dB_j ]."""
    f = form_from_periods(point.periods(qv_elem(point)), point.chart_vector)
    return OneFormSample(f.components / (12j * np.pi), f.chart)


def canonical_potential(point: ModuliPoint) -> OneFormSample:
    """theta = sum_j (B_j dA_j - A_j dB_j)."""
    return form_from_periods(point.chart_vector, point.chart_vector)


def product_differential(point: ModuliPoint) -> OneFormSample:
    """d(A_1 B_1): an exact control form."""
    c = point.chart_vector
    g = len(c) // 2
    comps = np.zeros(2 * g, dtype=complex)
    comps[0], comps[g] = c[g], c[0]
    return OneFormSample(comps, c)


def nonclosed_control(point: ModuliPoint) -> OneFormSample:
    """B_1 dA_1: d of it is dB_1 ^ dA_1, so it is not closed."""
    c = point.chart_vector
    g = len(c) // 2
    comps = np.zeros(2 * g, dtype=complex)
    comps[0] = c[g]
    return OneFormSample(comps, c)


# ---------------------------------------------------------------- closedness and path integrals

def closedness_defect(form: Callable[[ModuliPoint], OneFormSample], point: ModuliPoint, u, w,
                      eps: float) -> complex:
    """Trapezoid circulation of ``form`` around the chart parallelogram spanned by eps*u and eps*w."""
    u = np.asarray(u, dtype=complex)
    w = np.asarray(w, dtype=complex)
    c0 = point.chart_vector
    offsets = [0 * u, eps * u, eps * (u + w), eps * w]
    corners = [point]
    for off in offsets[1:]:
        corners.append(moduli_move(point, c0 + off))
    samples = [form(p) for p in corners]
    total = 0j
    for k in range(4):
        d = offsets[(k + 1) % 4] - offsets[k]
        total += 0.5 * (samples[k](d) + samples[(k + 1) % 4](d))
    return complex(total)


def fit_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.maximum(np.asarray(ys, dtype=float), 1e-300))
    return float(np.polyfit(lx, ly, 1)[0])


@dataclass
class ClosednessStudy:
    eps: list
    defects: list
    slope: float

    def to_json(self) -> dict:
        return {"eps": self.eps, "defects": [abs(d) for d in self.defects], "slope": self.slope}


def closedness_study(form: Callable[[ModuliPoint], OneFormSample], point: ModuliPoint, u, w,
                     eps0: float | None = None, levels: int = 3) -> ClosednessStudy:
    eps0 = eps0 if eps0 is not None else 0.02 * float(np.linalg.norm(point.chart_vector))
    eps = [eps0 / 2 ** k for k in range(levels)]
    defects = [closedness_defect(form, point, u, w, e) for e in eps]
    return ClosednessStudy(eps, defects, fit_slope(eps, [abs(d) for d in defects]))


def integrate_form_along_path(form: Callable[[ModuliPoint], OneFormSample], start: ModuliPoint,
                              path: Sequence, nodes: int = 8) -> tuple[complex, ModuliPoint]:
    """Gauss-Legendre quadrature of a 1-form along the chart polyline start -> path[0] -> ...

    ``path`` holds chart vectors or ModuliPoints. Returns (integral, point at the end).
    """
    xg, wg = leggauss(nodes)
    cur = start
    a = start.chart_vector
    total = 0j
    for item in path:
        b = item.chart_vector if isinstance(item, ModuliPoint) else np.asarray(item, dtype=complex)
        d = b - a
        for x, wt in zip(xg, wg):
            cur = moduli_move(cur, a + (x + 1) / 2 * d)
            total += 0.5 * wt * form(cur)(d)
        cur = moduli_move(cur, b)
        a = b
    return complex(total), cur


# ---------------------------------------------------------------- tau homogeneity

def euler_log_tau(cover: SpectralCover, cycles: Sequence[CycleSpec], tol: float = 1e-12) -> dict:
    """E log tau_B with E = sum (A d/dA + B d/dB) + sum r_k d/dr_k, from the variational formulas.

    d log tau / dA_j = (1/12 pi i) oint_b qv, d log tau / dB_j = -(1/12 pi i) oint_a qv,
    d log tau / d(2 pi i r_k) = -(1/12 pi i) int_{kappa-_k} (qv + v / (4 r_k^2)).
    """
    spec = cover.spec.to_float()
    ext = spec.ext()
    qv = QextElem(0, schwarzian_q(ext.Q), ext)
    basis = split_basis(cycles)
    fq = elem_integrand(qv)
    fv = elem_integrand(ext.y)
    A = [integrate_chain(cover, fv, c, tol)[0] for c in basis["a"]]
    B = [integrate_chain(cover, fv, c, tol)[0] for c in basis["b"]]
    qa = [integrate_chain(cover, fq, c, tol)[0] for c in basis["a"]]
    qb = [integrate_chain(cover, fq, c, tol)[0] for c in basis["b"]]
    period_part = sum(a * y - b * x for a, b, x, y in zip(A, B, qa, qb)) / (12j * np.pi)
    r_part = 0j
    for k, kap in enumerate(basis["kappa"]):
        rk = complex(cover.r[k])
        w = QextElem(0, schwarzian_q(ext.Q) + RatFunc.const(1 / (4 * rk * rk), exact=False), ext)
        r_part += -rk / 6 * kappa_integral(cover, w, kap, k, tol=tol)[0]
    return {"periods": complex(period_part), "residues": complex(r_part), "total": complex(period_part + r_part)}


def tau_scaling_integral(spec: QuadDiffSpec, kappa: float, nodes: int = 6, tol: float = 1e-12) -> dict:
    """Delta log tau_B along Q -> s^2 Q, s in [1, kappa]: int E log tau ds / s.

    The cover geometry is unchanged along the path, so the cycles of s = 1 are reused.
    """
    base = SpectralCover(spec.to_float())
    cycles = homology_basis(base)
    xg, wg = leggauss(nodes)
    total = 0j
    samples = []
    for x, wt in zip(xg, wg):
        s = 1 + (kappa - 1) * (x + 1) / 2
        cov = SpectralCover(spec.to_float().scaled(s))
        e = euler_log_tau(cov, cycles, tol)["total"]
        samples.append(e)
        total += 0.5 * wt * (kappa - 1) * e / s
    g = base.genus
    exponent = 5 * (2 * 0 - 2 + spec.n) / 72
    expected = exponent * math.log(kappa ** 2)
    return {"delta": complex(total), "expected": expected, "euler_samples": samples,
            "relative_error": abs(total - expected) / abs(expected), "genus": g}


def winding_terms(r: Sequence) -> tuple[list, np.ndarray]:
    """Change of r_j d log tau / d r_j when kappa-_j winds once more around z_k (half t-loop).

    -(r_j/6) * (1/2) * 2 pi i * (res qv + res v/(4 r_j^2)) at z_k^(1).
    """
    r = [complex(c) for c in r]
    keys = [(j, k) for j in range(len(r)) for k in range(len(r)) if j != k]
    vals = np.array([-(r[j] / 6) * 1j * np.pi * (-1 / (4 * r[k]) + r[k] / (4 * r[j] ** 2)) for j, k in keys])
    return keys, vals


def winding_decomposition(r: Sequence, deviation: complex, bound: int = 2) -> dict:
    """Smallest-residual integer combination of winding terms matching ``deviation``.

    Meet-in-the-middle search over coefficients in [-bound, bound]; a residual
    at rounding level means the deviation is a kappa-route convention constant.
    """
    import itertools
    from scipy.spatial import cKDTree
    keys, vals = winding_terms(r)
    half = len(keys) // 2
    rng = range(-bound, bound + 1)
    A = np.array(list(itertools.product(rng, repeat=half)))
    B = np.array(list(itertools.product(rng, repeat=len(keys) - half)))
    sa = A @ vals[:half]
    sb = B @ vals[half:]
    tree = cKDTree(np.c_[sb.real, sb.imag])
    t = deviation - sa
    dist, idx = tree.query(np.c_[t.real, t.imag])
    k = int(np.argmin(dist))
    coeffs = list(A[k]) + list(B[idx[k]])
    return {"keys": keys, "coefficients": [int(c) for c in coeffs], "residual": float(dist[k])}


# ---------------------------------------------------------------- Lemma-1 style identity

def _based_loops(point: ModuliPoint) -> tuple:
    """Genuine a and b loops (single-loop representatives, genus 1) re-based at a common point.

    Returns (alpha_verts, alpha_sheet, beta_verts, beta_sheet, base) with both
    loops starting at the same point of the cover.
    """
    if point.genus != 1:
        raise ModuliError("the boundary evaluation is implemented for genus-1 covers")
    cov = point.cover
    (ca, va, sa), = point.basis["a"][0].components
    (cb, vb, sb), = point.basis["b"][0].components
    hits = _crossings(va, vb)
    if not hits:
        raise ModuliError("a and b representatives do not meet")
    # the crossing where both loops lie on the same sheet is the intersection point
    for (ia, ta, ib, tb, _sign) in hits:
        pa = va[ia] + ta * (va[ia + 1] - va[ia])
        pb = vb[ib] + tb * (vb[ib + 1] - vb[ib])
        sheet_a = cov.end_sheet(list(va[:ia + 1]) + [pa], sa)
        sheet_b = cov.end_sheet(list(vb[:ib + 1]) + [pb], sb)
        if sheet_a != sheet_b:
            continue
        la = [pa] + list(va[ia + 1:]) + list(va[1:ia + 1]) + [pa]
        lb = [pb] + list(vb[ib + 1:]) + list(vb[1:ib + 1]) + [pb]
        return la, sheet_a, lb, sheet_b, pa
    raise ModuliError("no usable crossing")


def _path_ode(cover: SpectralCover, verts: list, sheet: int, state: np.ndarray, rhs: Callable,
              rtol: float) -> tuple[np.ndarray, int]:
    pieces, end = cover.split_path(verts, sheet)
    for a, b, s in pieces:
        if a == b:
            continue

        def f(t, u, a=a, b=b, s=s):
            x = a + t * (b - a)
            y = s * complex(cover.y1(x))
            return rhs(x, y, u) * (b - a)

        sol = solve_ivp(f, (0.0, 1.0), state, method="DOP853", rtol=rtol, atol=1e-14)
        if not sol.success:
            raise QuadratureError(sol.message)
        state = sol.y[:, -1]
    return state, end


def lemma1_check(point: ModuliPoint, direction, w2: str = "Q1", rtol: float = 1e-12,
                 fd_check: bool = False) -> dict:
    """Both sides of <oint v, d oint w2> = -1/2 int_bd (dw2 int v) + <oint w2, d oint v>.

    w1 = v and w2 = g v with g = Q1/Q (``w2="Q1"``) or g = 1 (``w2="v"``). The
    derivative is taken along the chart direction with the flat coordinate
    z = int_{p0}^x v held fixed, so dw2 = (dg - g' Z / y) v with Z = int_{p0}^x dv.
    The boundary of the fundamental polygon is the commutator of the genuine
    cycles alpha = sqrt2 a-, beta = sqrt2 b- based at their crossing p0. The
    second form +1/2 int_bd (w1 int dw2) is evaluated on the same path.
    """
    if w2 not in ("Q1", "v"):
        raise ValueError("w2 is 'Q1' or 'v'")
    direction = np.asarray(direction, dtype=complex)
    c = point.chart_velocity(direction)
    gauge = point.gauge
    n = gauge.n
    coeff = gauge.coefficient_vector(point.params)
    P = coeff[: 2 * n - 3]
    D = coeff[2 * n - 3:]
    derivs = point.coefficient_derivatives()
    dP = sum(ci * d[0] for ci, d in zip(c, derivs))
    dD = sum(ci * d[1] for ci, d in zip(c, derivs))
    R = np.array(gauge.R if (gauge.R is not None and w2 == "Q1") else [0], dtype=complex)
    Pp, Dp, Rp = npoly.polyder(P), npoly.polyder(D), npoly.polyder(R)

    def rhs(x, y, u):
        F, Z, _, G, _ = u
        Px, Dx = npoly.polyval(x, P), npoly.polyval(x, D)
        dPx, dDx = npoly.polyval(x, dP), npoly.polyval(x, dD)
        dv = (dPx * Dx - 2 * Px * dDx) / Dx ** 3 / (2 * y)
        if w2 == "v":
            dw2 = 0j
        else:
            # g = Q1 / Q = R D / P
            Rx = npoly.polyval(x, R)
            gp = (npoly.polyval(x, Rp) * Dx + Rx * npoly.polyval(x, Dp)) / Px - Rx * Dx * npoly.polyval(x, Pp) / Px ** 2
            dg = Rx * dDx / Px - Rx * Dx * dPx / Px ** 2
            dw2 = (dg - gp * Z / y) * y
        return np.array([y, dv, F * dw2, dw2, y * G], dtype=complex)

    la, sa, lb, sb, p0 = _based_loops(point)
    cov = point.cover
    state = np.zeros(5, dtype=complex)
    for verts, sheet in ((la, sa), (lb, sb), (la[::-1], sa), (lb[::-1], sb)):
        state, end = _path_ode(cov, verts, sheet, state, rhs, rtol)
        if end != sheet:
            raise ModuliError("based loop does not close on its sheet")
    bd78, bd79 = complex(state[2]), complex(state[4])

    def w2_periods(p: ModuliPoint) -> np.ndarray:
        return p.chart_vector if w2 == "v" else p.periods(over_v(p, p.Q1))

    v_periods = point.chart_vector
    d_w2 = param_derivative(w2_periods, point, c)
    lhs = pairing(v_periods, d_w2)
    second = pairing(w2_periods(point), direction)
    rhs78 = -0.5 * bd78 + second
    rhs79 = 0.5 * bd79 + second
    out = {"lhs": complex(lhs), "boundary_78": bd78, "boundary_79": bd79, "pairing_term": complex(second),
           "rhs_78": complex(rhs78), "rhs_79": complex(rhs79), "defect": float(abs(lhs - rhs78)),
           "defect_79": float(abs(lhs - rhs79)), "forms_agree": float(abs(rhs78 - rhs79)), "base_point": p0}
    if fd_check:
        lhs_fd = pairing(v_periods, chart_derivative(w2_periods, point, direction))
        out["lhs_moduli_fd"] = complex(lhs_fd)
        out["fd_vs_stencil"] = float(abs(lhs_fd - lhs))
    return out


# ---------------------------------------------------------------- hbar-map generating function

def shifted_point(point: ModuliPoint, hbar: complex) -> ModuliPoint:
    """The image of Q under Q -> Q + hbar Q1 (T -> T + hbar R), with the same frozen cycles."""
    gauge = point.gauge
    k = gauge.n - 3
    R = np.zeros(k, dtype=complex)
    if gauge.R is not None:
        R[: len(gauge.R)] = gauge.R
    params = point.params.copy()
    params[k:] = params[k:] + hbar * R
    return point.moved(params)


def hmap_generating_check(point: ModuliPoint, hbar_grid: Sequence[float], direction=None,
                          h: float = 1e-3) -> dict:
    """Residual of theta_1 - theta_0 = d[sum pi i r_j (reg v_1 - reg v_0)] + hbar Theta_(Q1).

    theta_1 is pulled back through Q -> Q + hbar Q1 and evaluated on the chart
    direction; derivatives use the holomorphic parameter stencil. The relation
    is exact in hbar. Each row also carries the residual of its first-order
    truncation, where reg v_1 - reg v_0 is replaced by hbar int Q1/(2v); that
    residual is O(hbar^2).
    """
    d = basis_directions(point)[0] if direction is None else np.asarray(direction, dtype=complex)
    c = point.chart_velocity(d)
    r = np.array(point.gauge.r)
    n = point.gauge.n
    v0_reg = lambda p: sum(np.pi * 1j * r[j] * p.reg_integral(p.ext.y, j) for j in range(n))
    theta0 = canonical_potential(point)(d)
    d_reg0 = param_derivative(v0_reg, point, c, h)
    Theta = theta_form(point)(d)
    half_q1 = lambda p: sum(np.pi * 1j * r[j] / 2 * p.reg_integral(over_v(p, p.Q1), j) for j in range(n))
    d_first = param_derivative(half_q1, point, c, h)
    rows = []
    for hb in hbar_grid:
        img = lambda p, hb=hb: shifted_point(p, hb)
        P1 = img(point)
        dchart1 = param_derivative(lambda p: img(p).chart_vector, point, c, h)
        theta1 = pairing(P1.chart_vector, dchart1)
        d_reg1 = param_derivative(lambda p: v0_reg(img(p)), point, c, h)
        res = theta1 - theta0 - (d_reg1 - d_reg0) - hb * Theta
        trunc = theta1 - theta0 - hb * (d_first + Theta)
        rows.append({"hbar": hb, "theta_diff": complex(theta1 - theta0), "reg_diff": complex(d_reg1 - d_reg0),
                     "hbar_theta": complex(hb * Theta), "residual": float(abs(res)),
                     "first_order_residual": float(abs(trunc))})
    hs = [r_["hbar"] for r_ in rows]
    slope = fit_slope(hs, [r_["residual"] for r_ in rows]) if len(rows) > 1 else float("nan")
    slope_trunc = fit_slope(hs, [r_["first_order_residual"] for r_ in rows]) if len(rows) > 1 else float("nan")
    return {"rows": rows, "slope": slope, "first_order_slope": slope_trunc}
