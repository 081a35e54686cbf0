"""The canonical double cover v^2 = Q over the n-punctured sphere.

Q = P / D^2 with D = prod (x - z_j) and deg P = 2n - 4, so Q is regular and
nonzero at infinity and has double poles with biresidue r_j^2 at the z_j.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .ratfield import (FieldError, Poly, QextElem, QuadExt, RatFunc, exact_coeff, to_complex,
                       _is_exact_value)


class CoverError(ValueError):
    """Invalid spec or degenerate geometry."""


# ---------------------------------------------------------------- specs

def _lagrange_numerator(z: Sequence, r: Sequence, exact: bool) -> Poly:
    """The unique L with deg L <= n-1 and L(z_j) = r_j^2 prod_{k != j} (z_j - z_k)^2."""
    n = len(z)
    L = Poly([], exact=exact)
    for j in range(n):
        others = [z[k] for k in range(n) if k != j]
        prod = 1
        for zk in others:
            prod = prod * (z[j] - zk)
        val = r[j] ** 2 * prod ** 2
        basis = Poly.from_roots(others, exact=exact)
        L = L + basis.scale(val / prod)
    return L


@dataclass(frozen=True)
class QuadDiffSpec:
    """Punctures (z_j, r_j), numerator P of Q = P/D^2, optional secondary differential Q1."""

    z: tuple
    r: tuple
    numerator: Poly
    Q1: RatFunc | None = None

    def __post_init__(self):
        n = len(self.z)
        if n < 3:
            raise CoverError("need at least three punctures")
        if len(self.r) != n:
            raise CoverError("one residue per puncture")
        zc = [to_complex(v) for v in self.z]
        for i in range(n):
            for k in range(i + 1, n):
                if abs(zc[i] - zc[k]) < 1e-12 * (1 + abs(zc[i])):
                    raise CoverError(f"punctures {i} and {k} coincide")
        if self.numerator.degree != 2 * n - 4:
            raise CoverError(f"numerator degree {self.numerator.degree} != 2n-4 = {2 * n - 4}")
        for j, rj in enumerate(self.r):
            if abs(to_complex(rj)) == 0:
                raise CoverError(f"r_{j} = 0")

    # derived data
    @property
    def n(self) -> int:
        return len(self.z)

    @property
    def exact(self) -> bool:
        return self.numerator.exact and all(_is_exact_value(v) for v in self.z + self.r)

    @property
    def D(self) -> Poly:
        return Poly.from_roots(list(self.z), exact=self.exact)

    @property
    def Q(self) -> RatFunc:
        return RatFunc.from_factors(self.numerator if self.exact else self.numerator.to_float(), [(self.D, 2)])

    def ext(self) -> QuadExt:
        P = self.numerator if self.exact else self.numerator.to_float()
        D = self.D
        lc = P.lc
        inv_Q = RatFunc.from_factors((D * D).scale(1 / lc), [(P.monic(), 1)])
        return QuadExt(self.Q, inv_Q)

    def Q1_or_zero(self) -> RatFunc:
        if self.Q1 is None:
            return RatFunc.const(0, exact=self.exact)
        return self.Q1 if self.exact else self.Q1.to_float()

    def biresidue(self, j: int):
        """lim (x - z_j)^2 Q(x) = P(z_j) / prod_{k != j} (z_j - z_k)^2."""
        zj = self.z[j]
        prod = 1
        for k, zk in enumerate(self.z):
            if k != j:
                prod = prod * (zj - zk)
        P = self.numerator
        val = P(zj) if self.exact else complex(P.to_float()(to_complex(zj)))
        return val / prod ** 2

    def biresidue_defect(self) -> float:
        out = 0.0
        for j in range(self.n):
            b = to_complex(self.biresidue(j))
            rj = to_complex(self.r[j])
            out = max(out, abs(b - rj ** 2) / abs(rj) ** 2)
        return out

    def to_float(self) -> "QuadDiffSpec":
        return QuadDiffSpec(tuple(to_complex(v) for v in self.z), tuple(to_complex(v) for v in self.r),
                            self.numerator.to_float(), None if self.Q1 is None else self.Q1.to_float())

    def with_Q1(self, Q1: RatFunc | None) -> "QuadDiffSpec":
        return QuadDiffSpec(self.z, self.r, self.numerator, Q1)

    def scaled(self, kappa) -> "QuadDiffSpec":
        """Q -> kappa^2 Q (r -> kappa r); Q1 unchanged."""
        k2 = kappa * kappa
        return QuadDiffSpec(self.z, tuple(kappa * rj for rj in self.r), self.numerator.scale(k2), self.Q1)

    def to_json(self) -> dict:
        enc = lambda c: [to_complex(c).real, to_complex(c).imag]
        d = {"z": [enc(v) for v in self.z], "r": [enc(v) for v in self.r],
             "numerator": [enc(c) for c in self.numerator.coeffs]}
        if self.Q1 is not None:
            d["Q1_numerator"] = [enc(c) for c in self.Q1.num.coeffs]
            d["Q1_denominator"] = [enc(c) for c in self.Q1.denominator.coeffs]
        return d


def stratum_spec(z: Sequence, r: Sequence, T: Sequence = (), Q1_coeffs: Sequence | None = None,
                 exact: bool | None = None) -> QuadDiffSpec:
    """Spec on the stratum with fixed r: P = L + D * T with deg T = n - 4.

    ``T`` lists the n-3 free coefficients of T (ascending; empty for n = 3).
    ``Q1_coeffs`` gives R in Q1 = R/D (deg R <= n - 4); None means Q1 absent.
    """
    n = len(z)
    if exact is None:
        exact = all(_is_exact_value(v) for v in list(z) + list(r) + list(T))
    if exact:
        z = [exact_coeff(v) for v in z]
        r = [exact_coeff(v) for v in r]
        T = [exact_coeff(v) for v in T]
    else:
        z = [to_complex(v) for v in z]
        r = [to_complex(v) for v in r]
        T = [to_complex(v) for v in T]
    zc = [to_complex(v) for v in z]
    for i in range(n):
        for k in range(i + 1, n):
            if abs(zc[i] - zc[k]) < 1e-12 * (1 + abs(zc[i])):
                raise CoverError(f"punctures {i} and {k} coincide")
    if len(r) != n:
        raise CoverError("one residue per puncture")
    if len(T) != max(n - 3, 0):
        raise CoverError(f"T needs {n - 3} coefficients for n = {n}")
    D = Poly.from_roots(z, exact=exact)
    P = _lagrange_numerator(z, r, exact)
    if n > 3:
        P = P + D * Poly(T, exact=exact)
    Q1 = None
    if Q1_coeffs is not None:
        Rc = [exact_coeff(c) for c in Q1_coeffs] if exact else [to_complex(c) for c in Q1_coeffs]
        if len(Rc) > max(n - 3, 0):
            raise CoverError("Q1 numerator degree must be <= n - 4")
        Q1 = RatFunc.from_factors(Poly(Rc, exact=exact), [(D, 1)])
    return QuadDiffSpec(tuple(z), tuple(r), P, Q1)


def random_exact_spec(n: int, seed: int, with_Q1: bool = True) -> QuadDiffSpec:
    """Random spec with small Gaussian-rational data (for exact identity tests)."""
    rng = np.random.default_rng(seed)

    def gq(scale=4, den=4):
        return QQ_gauss(Fraction(int(rng.integers(-scale * den, scale * den + 1)), den),
                        Fraction(int(rng.integers(-scale * den, scale * den + 1)), den))

    while True:
        z = [gq() for _ in range(n)]
        if len({(c.x, c.y) for c in z}) == n:
            break
    r = []
    for _ in range(n):
        while True:
            c = QQ_gauss(Fraction(int(rng.integers(2, 9)), 4), Fraction(int(rng.integers(-3, 4)), 8))
            if c:
                break
        r.append(c)
    T = [gq(2, 2) for _ in range(max(n - 3, 0))]
    Q1 = None
    if with_Q1:
        Q1 = [gq(2, 3) for _ in range(max(n - 3, 0))] or None
    spec = stratum_spec(z, r, T, Q1, exact=True)
    return spec


def QQ_gauss(a, b):
    from sympy.polys.domains import QQ_I
    return QQ_I(a, b)


# ---------------------------------------------------------------- geometry helpers

def seg_param_intersect(p1: complex, p2: complex, q1: complex, q2: complex):
    """(s, u) with p1 + s (p2 - p1) = q1 + u (q2 - q1), or None if parallel."""
    d1 = p2 - p1
    d2 = q2 - q1
    den = d1.real * d2.imag - d1.imag * d2.real
    if abs(den) < 1e-300:
        return None
    w = q1 - p1
    s = (w.real * d2.imag - w.imag * d2.real) / den
    u = (w.real * d1.imag - w.imag * d1.real) / den
    return s, u


def seg_dist(p: complex, a: complex, b: complex) -> float:
    ab = b - a
    if ab == 0:
        return abs(p - a)
    t = min(1.0, max(0.0, ((p - a) * np.conj(ab)).real / abs(ab) ** 2))
    return abs(p - (a + t * ab))


def seg_seg_dist(a1, a2, b1, b2) -> float:
    hit = seg_param_intersect(a1, a2, b1, b2)
    if hit is not None and 0 <= hit[0] <= 1 and 0 <= hit[1] <= 1:
        return 0.0
    return min(seg_dist(a1, b1, b2), seg_dist(a2, b1, b2), seg_dist(b1, a1, a2), seg_dist(b2, a1, a2))


def stadium(a: complex, b: complex, rad: float, m: int = 16) -> list:
    """Counterclockwise closed stadium (rounded rectangle) around segment [a, b]."""
    u = (b - a) / abs(b - a)
    nrm = 1j * u
    pts = []
    for k in range(m + 1):  # arc around b from -nrm to +nrm through +u
        pts.append(b + rad * (-nrm) * np.exp(1j * np.pi * k / m))
    for k in range(m + 1):  # arc around a from +nrm to -nrm through -u
        pts.append(a + rad * nrm * np.exp(1j * np.pi * k / m))
    pts.append(pts[0])
    return [complex(p) for p in pts]


def circle(c: complex, rad: float, start_angle: float = 0.0, m: int = 48, turns: float = 1.0) -> list:
    th = start_angle + 2 * np.pi * turns * np.arange(m + 1) / m
    return [complex(p) for p in c + rad * np.exp(1j * th)]


# ---------------------------------------------------------------- cycles

@dataclass
class CycleSpec:
    """A chain on the cover: sum of coefficient * (polyline lifted from start sheet).

    closure is "closed" for loops and "arc" for the pole-to-pole kappa chains.
    """

    label: str
    components: list  # list of (coef, vertices, start_sheet)
    closure: str = "closed"

    @property
    def polyline(self) -> list:
        return self.components[0][1]

    @property
    def start_sheet(self) -> int:
        return self.components[0][2]

    def reversed(self) -> "CycleSpec":
        return CycleSpec(self.label, [(c, list(v[::-1]), s) for c, v, s in self.components], self.closure)

    def to_json(self, cover: "SpectralCover | None" = None) -> dict:
        comps = []
        for c, verts, s in self.components:
            item = {"coef": c, "start_sheet": s, "vertices": [[p.real, p.imag] for p in verts]}
            if cover is not None:
                item["end_sheet"] = cover.end_sheet(verts, s)
            comps.append(item)
        return {"label": self.label, "closure": self.closure, "components": comps}


# ---------------------------------------------------------------- the cover

@dataclass
class Tolerances:
    root_tol: float = 1e-13
    simple_floor: float = 1e-8
    biresidue_tol: float = 1e-9
    clearance: float = 1e-3


class SpectralCover:
    """Turning points, cuts and a global sheet function y1 with y1^2 = Q off the cuts."""

    def __init__(self, spec: QuadDiffSpec, tol: Tolerances | None = None, order_hint: Sequence | None = None):
        self.spec = spec
        self.tol = tol or Tolerances()
        self._order_hint = None if order_hint is None else np.asarray(order_hint, dtype=complex)
        fspec = spec.to_float()
        self.z = np.array(fspec.z, dtype=complex)
        self.r = np.array(fspec.r, dtype=complex)
        self.P = fspec.numerator
        self.Dpoly = Poly.from_roots(list(self.z), exact=False)
        self.n = spec.n
        self.genus = self.n - 3
        self._find_roots()
        self._check_biresidues()
        self._layout_cuts()
        self.sign = 1.0
        eps = self._residue_signs()
        if eps[0] < 0:
            self.sign = -1.0
            eps = -eps
        self.eps = eps  # z_j^(1) lies on sheet eps[j]
        self.base_point = complex(np.mean(self.z)) + 1e-3j
        self.base_value = complex(self.y1(self.base_point))

    # roots
    def _find_roots(self):
        P = self.P
        roots = P.roots()
        dP = P.derivative()
        for _ in range(8):  # Newton polish
            step = P(roots) / dP(roots)
            roots = roots - step
            if np.max(np.abs(step)) < self.tol.root_tol * (1 + np.max(np.abs(roots))):
                break
        if self._order_hint is not None and len(self._order_hint) == len(roots):
            # keep the labelling of a nearby cover so cuts move continuously
            cost = np.abs(self._order_hint[:, None] - roots[None, :])
            _, cols = linear_sum_assignment(cost)
            roots = roots[cols]
        else:
            order = np.lexsort((roots.imag, roots.real))
            roots = roots[order]
        scale = 1 + float(np.max(np.abs(roots)))
        sep = min((abs(a - b) for i, a in enumerate(roots) for b in roots[i + 1:]), default=np.inf)
        deriv = np.abs(dP(roots)) / (np.max(np.abs(P.coeffs)) * scale ** (P.degree - 1))
        if sep < 1e-6 * scale or np.min(deriv, initial=np.inf) < self.tol.simple_floor:
            raise CoverError("multiple or near-multiple turning point: not a generic differential")
        for x in roots:
            if np.min(np.abs(x - self.z)) < 1e-8 * scale:
                raise CoverError("turning point collides with a puncture")
        self.turning_points = roots

    def _check_biresidues(self):
        d = self.spec.biresidue_defect()
        if d > self.tol.biresidue_tol:
            raise CoverError(f"biresidue mismatch {d:.3e}")

    def _layout_cuts(self):
        x = self.turning_points
        self.cuts = [(complex(x[2 * k]), complex(x[2 * k + 1])) for k in range(len(x) // 2)]
        for i, (a, b) in enumerate(self.cuts):
            for k, (c, d) in enumerate(self.cuts[i + 1:], start=i + 1):
                if seg_seg_dist(a, b, c, d) < self.tol.clearance:
                    raise CoverError(f"cuts {i} and {k} cross or touch")
            for j, zj in enumerate(self.z):
                if seg_dist(zj, a, b) < self.tol.clearance:
                    raise CoverError(f"puncture {j} lies on cut {i}")

    def _residue_signs(self) -> np.ndarray:
        eps = []
        for zj, rj in zip(self.z, self.r):
            h = 1e-7 * (1 + abs(zj))
            vals = [self.y1(zj + h * np.exp(1j * th)) * h * np.exp(1j * th) for th in (0.3, 2.4, 4.4)]
            res = np.mean(vals)
            eps.append(1.0 if (res / rj).real > 0 else -1.0)
        return np.array(eps)

    # sheet function
    def y1(self, x):
        x = np.asarray(x, dtype=complex)
        w = np.sqrt(complex(self.P.lc)) * np.ones_like(x)
        for a, b in self.cuts:
            w = w * (x - a) * np.sqrt((x - b) / (x - a))
        return self.sign * w / self.Dpoly(x)

    def y(self, x, sheet: int):
        return sheet * self.y1(x)

    def Qval(self, x):
        return self.P(x) / self.Dpoly(x) ** 2

    def feature_points(self) -> np.ndarray:
        return np.concatenate([self.turning_points, self.z])

    # paths on the cover
    def split_path(self, verts: Sequence, sheet: int) -> tuple[list, int]:
        """Split a polyline at cut crossings: list of (a, b, sheet) pieces and the end sheet."""
        out = []
        for p, q in zip(verts[:-1], verts[1:]):
            p, q = complex(p), complex(q)
            hits = []
            for a, b in self.cuts:
                h = seg_param_intersect(p, q, a, b)
                if h is not None and 0 < h[0] < 1 and 0 <= h[1] <= 1:
                    hits.append(h[0])
                elif h is not None and 0 < h[0] < 1 and (abs(h[1]) < 1e-12 or abs(h[1] - 1) < 1e-12):
                    raise CoverError("path passes through a turning point")
            hits.sort()
            pts = [p] + [p + (q - p) * s for s in hits] + [q]
            for k in range(len(pts) - 1):
                out.append((pts[k], pts[k + 1], sheet))
                if k < len(hits):
                    sheet = -sheet
        return out, sheet

    def end_sheet(self, verts: Sequence, sheet: int) -> int:
        return self.split_path(verts, sheet)[1]

    def clearance_of(self, verts: Sequence, skip: Sequence = ()) -> float:
        pts = [p for p in self.feature_points() if all(abs(p - s) > 1e-12 for s in skip)]
        best = np.inf
        for p, q in zip(verts[:-1], verts[1:]):
            for f in pts:
                best = min(best, seg_dist(f, complex(p), complex(q)))
        return best

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "genus": self.genus,
            "turning_points": [[x.real, x.imag] for x in self.turning_points],
            "cuts": [[[a.real, a.imag], [b.real, b.imag]] for a, b in self.cuts],
            "sheet_of_z1": [int(e) for e in self.eps],
            "base_point": [self.base_point.real, self.base_point.imag],
            "base_value": [self.base_value.real, self.base_value.imag],
            "spec": self.spec.to_json(),
        }


def build_cover(spec: QuadDiffSpec, tolerances: Tolerances | None = None,
                order_hint: Sequence | None = None) -> SpectralCover:
    return SpectralCover(spec, tolerances, order_hint)


# ---------------------------------------------------------------- continuation

def sheet_continuation(cover: SpectralCover, path: Sequence, start_value: complex, samples: int = 32,
                       max_refine: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Continuous branch of sqrt(Q) along a polyline starting from start_value.

    Returns (points, values). Continuity is checked between consecutive samples and
    segments are refined until the relative jump is below 1/2.
    """
    path = [complex(p) for p in path]
    q0 = complex(cover.Qval(path[0]))
    if abs(start_value ** 2 - q0) > 1e-8 * max(abs(q0), 1e-300):
        raise CoverError("start value is not a square root of Q at the start point")
    if cover.clearance_of(path) < cover.tol.clearance:
        raise CoverError("path violates clearance")
    y0 = complex(cover.y1(path[0]))
    sheet = 1 if abs(start_value - y0) < abs(start_value + y0) else -1
    pieces, _ = cover.split_path(path, sheet)
    pts, vals = [], []
    for a, b, s in pieces:
        m = samples
        for _ in range(max_refine):
            t = np.linspace(0, 1, m + 1)
            xs = a + (b - a) * t
            # evaluate just inside the piece so cut-crossing endpoints take the piece's side
            inner = xs.copy()
            inner[0] = a + (b - a) * 1e-12
            inner[-1] = b - (b - a) * 1e-12
            ys = s * cover.y1(inner)
            jumps = np.abs(np.diff(ys)) / np.maximum(np.abs(ys[:-1]), 1e-300)
            if np.all(jumps < 0.5):
                break
            m *= 2
        else:
            raise CoverError("continuity not maintained at maximum refinement")
        if pts:
            xs, ys = xs[1:], ys[1:]
        pts.extend(xs)
        vals.extend(ys)
    return np.array(pts), np.array(vals)


# ---------------------------------------------------------------- homology basis

INV_SQRT2 = 1 / math.sqrt(2.0)


def _clear_radius(cover: SpectralCover, a: complex, b: complex, exclude: Sequence, frac: float = 0.4) -> float:
    """Radius for a stadium around [a, b] avoiding features and other cuts."""
    best = np.inf
    for f in cover.feature_points():
        if any(abs(f - e) < 1e-12 for e in exclude):
            continue
        best = min(best, seg_dist(f, a, b))
    for c, d in cover.cuts:
        if any(abs(c - e) < 1e-12 for e in exclude) or any(abs(d - e) < 1e-12 for e in exclude):
            continue
        best = min(best, seg_seg_dist(a, b, c, d))
    return frac * best


def _crossings(verts_a: Sequence, verts_b: Sequence) -> list:
    """Transversal crossings: (index_a, s, index_b, u, sign)."""
    out = []
    for i, (p, q) in enumerate(zip(verts_a[:-1], verts_a[1:])):
        for k, (c, d) in enumerate(zip(verts_b[:-1], verts_b[1:])):
            h = seg_param_intersect(complex(p), complex(q), complex(c), complex(d))
            if h is None:
                continue
            s, u = h
            if 0 <= s < 1 and 0 <= u < 1:
                if min(s, u) < 1e-10 and (s > 1e-10 or u > 1e-10) and False:
                    pass
                d1 = complex(q) - complex(p)
                d2 = complex(d) - complex(c)
                cross = d1.real * d2.imag - d1.imag * d2.real
                out.append((i, s, k, u, 1 if cross > 0 else -1))
    return out


def _sheets_along(cover: SpectralCover, verts: Sequence, sheet: int) -> list:
    """Sheet at parameter s of each polyline segment: list of (segment index, [(s0, s1, sheet)])."""
    out = []
    for i, (p, q) in enumerate(zip(verts[:-1], verts[1:])):
        pieces, sheet_after = cover.split_path([p, q], sheet)
        spans = []
        for a, b, s in pieces:
            s0 = abs(a - complex(p)) / abs(complex(q) - complex(p))
            s1 = abs(b - complex(p)) / abs(complex(q) - complex(p))
            spans.append((s0, s1, s))
        out.append(spans)
        sheet = sheet_after
    return out


def _sheet_at(spans: list, s: float) -> int:
    for s0, s1, sh in spans:
        if s0 - 1e-14 <= s <= s1 + 1e-14:
            return sh
    return spans[-1][2]


def component_intersection(cover: SpectralCover, va: Sequence, sa: int, vb: Sequence, sb: int) -> int:
    """Signed count of crossings of two lifted polylines that occur on the same sheet."""
    spans_a = _sheets_along(cover, va, sa)
    spans_b = _sheets_along(cover, vb, sb)
    total = 0
    for i, s, k, u, sign in _crossings(va, vb):
        if _sheet_at(spans_a[i], s) == _sheet_at(spans_b[k], u):
            total += sign
    return total


def intersection_number(c1: CycleSpec, c2: CycleSpec, cover: SpectralCover) -> float:
    """Bilinear intersection of two chains (coefficients included, so a-/b- pair gives 1/2)."""
    total = 0.0
    for k1, v1, s1 in c1.components:
        for k2, v2, s2 in c2.components:
            total += k1 * k2 * component_intersection(cover, v1, s1, v2, s2)
    return total


def _capsule_ok(cover: SpectralCover, verts: Sequence, expect_cuts: tuple) -> bool:
    crossed = []
    for p, q in zip(verts[:-1], verts[1:]):
        for idx, (a, b) in enumerate(cover.cuts):
            h = seg_param_intersect(complex(p), complex(q), a, b)
            if h is not None and 0 < h[0] < 1 and 0 <= h[1] <= 1:
                crossed.append(idx)
    return sorted(crossed) == sorted(expect_cuts)


def _encloses(verts: Sequence, pt: complex) -> bool:
    """Winding-number test for a closed polyline."""
    w = np.unwrap(np.angle(np.array(verts) - pt))
    return abs(w[-1] - w[0]) > np.pi


def homology_basis(cover: SpectralCover) -> list[CycleSpec]:
    """a-_k, b-_k (k < n-3), t-_j and kappa-_j.

    a_k: stadium around cut k on sheet +1.  c_m: stadium around the gap between
    cut m-1 and cut m, crossing both.  b_k = c_{k+1} + ... + c_g, each stadium
    oriented so that a_{m-1} o c_m = +1.  a-, b- carry weight 1/sqrt2 so that
    a- o b- = 1/2.
    """
    g = cover.genus
    cuts = cover.cuts
    feats = cover.feature_points()
    cycles: list[CycleSpec] = []
    a_loops = []
    for k in range(g):
        a, b = cuts[k]
        rad = _clear_radius(cover, a, b, exclude=(a, b))
        loop = stadium(a, b, rad)
        if not _capsule_ok(cover, loop, ()):
            raise CoverError(f"no clearance-valid a-cycle around cut {k}")
        a_loops.append(loop)
    gaps = []
    for m in range(1, g + 1):
        p = cuts[m - 1][1]
        q = cuts[m][0]
        rad = _clear_radius(cover, p, q, exclude=(p, q), frac=0.35)
        rad = min(rad, 0.45 * abs(cuts[m - 1][1] - cuts[m - 1][0]), 0.45 * abs(cuts[m][1] - cuts[m][0]))
        loop = None
        for _ in range(6):
            cand = stadium(p, q, rad)
            if _capsule_ok(cover, cand, (m - 1, m)) and not any(
                    _encloses(cand, f) for f in feats if abs(f - p) > 1e-12 and abs(f - q) > 1e-12):
                loop = cand
                break
            rad *= 0.5
        if loop is None:
            raise CoverError(f"no clearance-valid gap cycle between cuts {m - 1} and {m}")
        gaps.append(loop)
    # orient gap loops: a_{m-1} o c_m = +1
    for m in range(1, g + 1):
        sgn = component_intersection(cover, a_loops[m - 1], 1, gaps[m - 1], 1)
        if sgn == 0:
            raise CoverError("gap cycle does not meet its a-cycle")
        if sgn < 0:
            gaps[m - 1] = gaps[m - 1][::-1]
    for k in range(g):
        cycles.append(CycleSpec(f"a-_{k + 1}", [(INV_SQRT2, a_loops[k], 1)]))
    for k in range(g):
        comps = [(INV_SQRT2, gaps[m - 1], 1) for m in range(k + 1, g + 1)]
        cycles.append(CycleSpec(f"b-_{k + 1}", comps))
    # t loops: half the difference of ccw loops around z^(1) and z^(2)
    for j, zj in enumerate(cover.z):
        others = [f for f in feats if abs(f - zj) > 1e-12]
        rad = 0.3 * min(abs(f - zj) for f in others)
        rad = min(rad, 0.3 * min(seg_dist(zj, a, b) for a, b in cuts))
        loop = circle(complex(zj), rad)
        e = int(cover.eps[j])
        cycles.append(CycleSpec(f"t-_{j + 1}", [(0.5, loop, e), (-0.5, loop, -e)]))
    for j in range(cover.n):
        cycles.append(kappa_arc(cover, j, a_loops, gaps))
    return cycles


def kappa_arc(cover: SpectralCover, j: int, a_loops: Sequence = (), gaps: Sequence = ()) -> CycleSpec:
    """Half of a path from z_j^(1) to z_j^(2) (coefficient 1/2).

    The path runs to a small circle around the far end of the last cut (a branch
    point no basis loop encloses), goes once around it and comes back, so it meets
    no a- or b- representative.
    """
    zj = complex(cover.z[j])
    last = cover.cuts[-1][1]
    feats = cover.feature_points()
    others = [f for f in feats if abs(f - last) > 1e-12]
    rho = 0.3 * min(abs(f - last) for f in others)
    rho = min(rho, 0.3 * min(seg_dist(last, a, b) for a, b in cover.cuts[:-1]) if len(cover.cuts) > 1 else rho)
    basis = list(a_loops) + list(gaps)

    def valid(route: list) -> bool:
        for loop in basis:
            if _crossings(route, loop):
                return False
        if cover.clearance_of(route, skip=[zj, last]) < max(cover.tol.clearance, 0.05 * rho):
            return False
        return True

    direction = (zj - last) / abs(zj - last)
    candidates = []
    for dphi in (0.0, 0.4, -0.4, 0.8, -0.8, 1.3, -1.3, 2.0, -2.0, 2.7, -2.7):
        c = last + rho * direction * np.exp(1j * dphi)
        candidates.append([zj, c])
    # bent routes through waypoints on rings around the last branch point
    for ring in (2.0, 4.0, 8.0):
        for k in range(16):
            wpt = last + ring * rho * np.exp(2j * np.pi * k / 16)
            c = last + rho * (wpt - last) / abs(wpt - last)
            candidates.append([zj, wpt, c])
    for route in candidates:
        if not valid(route):
            continue
        c = route[-1]
        ang = float(np.angle(c - last))
        loop = circle(last, rho, ang)[1:]
        verts = route + loop + route[::-1][1:]
        e = int(cover.eps[j])
        end = cover.end_sheet(verts, e)
        if end != -e:
            continue
        return CycleSpec(f"kappa-_{j + 1}", [(0.5, verts, e)], closure="arc")
    raise CoverError(f"no clearance-valid kappa route for puncture {j}")


def gram_matrix(cycles: Sequence[CycleSpec], cover: SpectralCover) -> np.ndarray:
    closed = [c for c in cycles if c.closure == "closed"]
    m = len(closed)
    G = np.zeros((m, m))
    for i in range(m):
        for k in range(m):
            if i != k:
                G[i, k] = intersection_number(closed[i], closed[k], cover)
    return G


def cover_json(cover: SpectralCover, cycles: Sequence[CycleSpec] | None = None) -> str:
    doc = cover.to_json()
    if cycles is not None:
        doc["cycles"] = [c.to_json(cover) for c in cycles]
    return json.dumps(doc, indent=2, sort_keys=False)
