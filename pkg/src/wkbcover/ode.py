"""Direct numerical monodromy of phi'' = (Q/hbar^2 + Q1/hbar) phi.

The first-order system is written in (phi, hbar phi'):

    phi' = psi / hbar,   psi' = (Q/hbar + Q1) phi,

and integrated segment by segment along complex polylines with DOP853.
The transport matrix maps initial data (phi, psi) at the path start to the
data at the end, so transport(A then B) = T(B) T(A).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .cover import QuadDiffSpec, SpectralCover, build_cover, circle, homology_basis, seg_dist
from .periods import integrate_chain, elem_integrand, split_basis
from .wkb import riccati_recursion, vk_differential

DEFAULT_RTOL = 1e-12
DEFAULT_ATOL = 1e-30


class OdeError(RuntimeError):
    """Stiffness failure, clearance violation or ill-conditioned eigenvalues."""


# ---------------------------------------------------------------- transport

@dataclass
class TransportResult:
    matrix: np.ndarray
    wronskian_drift: float
    nfev: int


def _segment(Vfun: Callable, hbar: complex, a: complex, b: complex, Y: np.ndarray, rtol: float, atol: float,
             max_step: float) -> tuple[np.ndarray, int]:
    dx = b - a

    def rhs(s, u):
        x = a + s * dx
        phi, psi = u[0:2], u[2:4]
        return np.concatenate([psi / hbar, Vfun(x) * phi]) * dx

    # rows (phi, psi), columns the two solutions
    u0 = np.concatenate([Y[0], Y[1]]).astype(complex)
    sol = solve_ivp(rhs, (0.0, 1.0), u0, method="DOP853", rtol=rtol, atol=atol, max_step=max_step)
    if sol.status != 0:
        raise OdeError(f"integrator failed on segment {a} -> {b}: {sol.message}")
    u = sol.y[:, -1]
    return np.array([u[0:2], u[2:4]]), sol.nfev


def transport_potential(Vfun: Callable, hbar: complex, path: Sequence[complex], rtol: float = DEFAULT_RTOL,
                        atol: float = DEFAULT_ATOL, steps_per_unit: float | None = None) -> TransportResult:
    """Transport along a polyline for psi' = hbar V phi with V = Q/hbar^2 + Q1/hbar given as Vfun(x) = hbar V(x).

    The step ceiling is tied to hbar: at most hbar / (|hbar V|^(1/2) |dx|) per step
    in the segment parameter (a fraction of a local wavelength).
    """
    Y = np.eye(2, dtype=complex)
    nfev = 0
    verts = [complex(p) for p in path]
    for a, b in zip(verts[:-1], verts[1:]):
        if a == b:
            continue
        L = abs(b - a)
        mid = Vfun(0.5 * (a + b))
        scale = np.sqrt(abs(mid) / abs(hbar)) + 1.0
        max_step = min(1.0, 1.0 / (L * scale)) if steps_per_unit is None else 1.0 / max(steps_per_unit * L, 1.0)
        Y, k = _segment(Vfun, hbar, a, b, Y, rtol, atol, max_step)
        nfev += k
    drift = float(abs(np.linalg.det(Y) - 1.0))
    return TransportResult(Y, drift, nfev)


def potential_of(spec: QuadDiffSpec) -> Callable:
    """x -> (Q/hbar + Q1) as a function of (x, hbar): returns a closure factory."""
    sp = spec.to_float()
    Q = sp.Q
    Q1 = sp.Q1_or_zero()
    has_q1 = not Q1.is_zero()

    def make(hbar: complex) -> Callable:
        def V(x):
            val = complex(Q(x)) / hbar
            if has_q1:
                val += complex(Q1(x))
            return val
        return V
    return make


def check_clearance(spec: QuadDiffSpec, path: Sequence[complex], clearance: float) -> float:
    z = [complex(c) for c in spec.to_float().z]
    verts = [complex(p) for p in path]
    d = min(seg_dist(zj, a, b) for zj in z for a, b in zip(verts[:-1], verts[1:]))
    if d < clearance:
        raise OdeError(f"path passes within {d:.3e} of a puncture (clearance {clearance:.1e})")
    return d


def transport(spec: QuadDiffSpec, hbar: complex, path: Sequence[complex], clearance: float = 1e-3,
              rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> np.ndarray:
    """2x2 transport matrix of (phi, hbar phi') along the polyline."""
    check_clearance(spec, path, clearance)
    res = transport_potential(potential_of(spec)(hbar), hbar, path, rtol, atol)
    return res.matrix


# ---------------------------------------------------------------- puncture loops

def lambda_exponent(r: complex, hbar: complex) -> complex:
    """Root of lambda (lambda - 1) = (r/hbar)^2 continuing r/hbar + 1/2 as hbar -> 0."""
    s = np.sqrt(0.25 + (r / hbar) ** 2)
    if (s / (r / hbar)).real < 0:
        s = -s
    return complex(0.5 + s)


def _turning_points(spec: QuadDiffSpec) -> list:
    return [complex(x) for x in spec.to_float().numerator.roots()]


def puncture_loop(spec: QuadDiffSpec, j: int, frac: float = 0.3, m: int = 64) -> list:
    """Counterclockwise circle around z_j, radius frac * (distance to the nearest other puncture or turning point).

    Keeping turning points well outside makes |phi| nearly monotone along the
    loop, so the dominant eigenvalue is not swamped by intermediate growth.
    """
    z = [complex(c) for c in spec.to_float().z]
    zj = z[j]
    others = [w for i, w in enumerate(z) if i != j] + _turning_points(spec)
    rad = frac * min(abs(zj - w) for w in others)
    return circle(zj, rad, m=m)


@dataclass
class PunctureSpectrum:
    eigenvalues: tuple
    predicted: tuple
    lam: complex
    relative_error: float
    wronskian_drift: float
    sign: int

    def to_json(self) -> dict:
        enc = lambda c: [complex(c).real, complex(c).imag]
        return {"eigenvalues": [enc(e) for e in self.eigenvalues], "predicted": [enc(e) for e in self.predicted],
                "lambda": enc(self.lam), "relative_error": self.relative_error,
                "wronskian_drift": self.wronskian_drift, "sign": self.sign}


def loop_eigenvalues(M: np.ndarray, cond_tol: float = 1e-8) -> tuple[complex, complex]:
    """(m, 1/m) with m the dominant eigenvalue.

    The dominant eigenvalue is well conditioned. The recessive one is taken from
    unimodularity rather than from det/m, because det M loses digits to
    cancellation once the entries grow like exp(|Im lambda|).
    """
    tr = complex(np.trace(M))
    det = complex(np.linalg.det(M))
    disc = np.sqrt(tr * tr - 4 * det)
    big = (tr + disc) / 2 if abs(tr + disc) >= abs(tr - disc) else (tr - disc) / 2
    if abs(disc) < cond_tol * max(abs(tr), 1.0):
        raise OdeError("near-parabolic loop matrix: eigenvalues ill-conditioned")
    return big, 1 / big


def puncture_spectrum(spec: QuadDiffSpec, hbar: complex, j: int, rtol: float = DEFAULT_RTOL) -> PunctureSpectrum:
    """Loop-matrix eigenvalues around z_j against exp(+-2 pi i lambda_j).

    ``sign`` records whether the larger eigenvalue matches exp(+2 pi i lambda) (+1)
    or exp(-2 pi i lambda) (-1).
    """
    sp = spec.to_float()
    r = complex(sp.r[j])
    loop = puncture_loop(sp, j)
    res = transport_potential(potential_of(sp)(hbar), hbar, loop, rtol)
    big, small = loop_eigenvalues(res.matrix)
    lam = lambda_exponent(r, hbar)
    e_plus = np.exp(2j * np.pi * lam)
    e_minus = 1 / e_plus
    best = None
    for sgn, (p_big, p_small) in ((1, (e_plus, e_minus)), (-1, (e_minus, e_plus))):
        err = max(abs(big - p_big) / abs(p_big), abs(small - p_small) / abs(p_small))
        if best is None or err < best[0]:
            best = (err, sgn, (p_big, p_small))
    err, sgn, pred = best
    return PunctureSpectrum((big, small), pred, lam, float(err), res.wronskian_drift, sgn)


# ---------------------------------------------------------------- Voros comparison

def voros_t_series(spec: QuadDiffSpec, j: int, N: int, tol: float = 1e-12) -> list[complex]:
    """oint_{t-_j} v_k for k = -1..N (float mode), oriented as the +-sheet loop used by the ODE."""
    sp = spec.to_float()
    cover = build_cover(sp)
    cycles = homology_basis(cover)
    t = split_basis(cycles)["t"][j]
    series = riccati_recursion(sp, max(N, 1), exact=False)
    out = []
    for k in range(-1, N + 1):
        val, _ = integrate_chain(cover, elem_integrand(vk_differential(series, k).to_float()), t, tol)
        out.append(complex(val))
    return out


def _reduce_mod(d: complex, period: complex) -> tuple[complex, int]:
    k = int(np.round((d / period).real))
    return d - k * period, k


@dataclass
class RhoScalingFit:
    hbars: list
    log_m: list
    voros_sum: list
    residuals: list
    shifts: list
    slope: float
    voros: list
    fitted: list
    continuous: bool
    N: int

    def to_json(self) -> dict:
        enc = lambda c: [complex(c).real, complex(c).imag]
        return {"N": self.N, "hbar": self.hbars, "log_m": [enc(x) for x in self.log_m],
                "voros_sum": [enc(x) for x in self.voros_sum], "residuals": self.residuals,
                "pi_i_shifts": self.shifts, "slope": self.slope,
                "voros_coefficients": [enc(x) for x in self.voros],
                "fitted_coefficients": [enc(x) for x in self.fitted], "branch_continuous": self.continuous}


def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def rho_scaling_fit(spec: QuadDiffSpec, j: int, hbar_grid: Sequence[float], N: int,
                    voros: Sequence[complex] | None = None) -> RhoScalingFit:
    """log m_j(hbar) against sum_{k=-1}^{N} hbar^k oint_{t-_j} v_k, compared modulo pi i.

    The eigenvalue is chosen from (m, 1/m) by closeness to the Voros sum; the
    integer multiple of pi i removed at each hbar is recorded and must not jump
    in parity along the grid.
    """
    hs = [float(h) for h in hbar_grid]
    if len(hs) < 4:
        raise ValueError("hbar grid needs at least 4 points")
    if any(b >= a for a, b in zip(hs[:-1], hs[1:])):
        raise ValueError("hbar grid must be strictly decreasing")
    ratios = [b / a for a, b in zip(hs[:-1], hs[1:])]
    if max(ratios) - min(ratios) > 1e-9:
        raise ValueError("hbar grid must be geometric")
    vor = list(voros) if voros is not None else voros_t_series(spec, j, N)
    if len(vor) < N + 2:
        raise ValueError("Voros list shorter than the requested order")
    sp = spec.to_float()
    loop = puncture_loop(sp, j)
    make = potential_of(sp)
    logs, sums, resid, shifts = [], [], [], []
    for h in hs:
        M = transport_potential(make(h), h, loop).matrix
        big, small = loop_eigenvalues(M)
        V = sum(h ** k * vor[k + 1] for k in range(-1, N + 1))
        best = None
        for mu in (big, small):
            d, k = _reduce_mod(np.log(mu) - V, 1j * np.pi)
            if best is None or abs(d) < abs(best[0]):
                best = (d, k, np.log(mu))
        d, k, lm = best
        logs.append(complex(lm))
        sums.append(complex(V))
        resid.append(float(abs(d)))
        shifts.append(k)
    slope = fit_loglog_slope(hs, resid)
    # interpolation fit of hbar (log m - shift pi i) by hbar^(k+1), k = -1..len-2
    A = np.array([[h ** (k + 1) for k in range(-1, len(hs) - 1)] for h in hs], dtype=complex)
    rhs = np.array([h * (lm - s * 1j * np.pi) for h, lm, s in zip(hs, logs, shifts)])
    fitted = list(np.linalg.solve(A, rhs))
    parity = {s % 2 for s in shifts}
    return RhoScalingFit(hs, logs, sums, resid, shifts, slope, vor, [complex(c) for c in fitted], len(parity) == 1, N)


# ---------------------------------------------------------------- monodromy representation

def _base_point(z: Sequence[complex]) -> complex:
    """A point left of every puncture, off all puncture-to-puncture lines."""
    zs = np.asarray(z)
    span = max(np.ptp(zs.real), np.ptp(zs.imag), 1.0)
    return complex(zs.real.min() - 0.5 * span, zs.imag.mean() + 0.137 * span)


def generator_loops(spec: QuadDiffSpec, base: complex | None = None, frac: float = 0.3, m: int = 64) -> tuple:
    """Loops from the base point around each z_j, ordered so that their product is trivial.

    Each loop runs straight to a circle around z_j, goes once counterclockwise and
    returns. The base point lies left of all punctures and the loops are sorted by
    increasing argument of z_j - base; with transport(A then B) = T(B) T(A) the
    product T_last ... T_first is then +-I.
    """
    z = [complex(c) for c in spec.to_float().z]
    base = _base_point(z) if base is None else complex(base)
    order = sorted(range(len(z)), key=lambda j: np.angle(z[j] - base))
    tps = _turning_points(spec)
    loops = {}
    for j in order:
        others = [w for i, w in enumerate(z) if i != j] + tps + [base]
        rad = frac * min(abs(z[j] - w) for w in others)
        u = (base - z[j]) / abs(base - z[j])
        start = z[j] + rad * u
        circ = circle(z[j], rad, start_angle=float(np.angle(u)), m=m)
        loops[j] = [base, start] + circ[1:] + [base]
    return base, order, loops


@dataclass
class MonodromyRep:
    hbar: complex
    base: complex
    order: list
    matrices: dict
    relation_defect: float
    det_defects: dict
    wronskian_drift: float

    def traces(self) -> dict:
        return {j: complex(np.trace(M)) for j, M in self.matrices.items()}

    def to_json(self) -> dict:
        enc = lambda c: [complex(c).real, complex(c).imag]
        return {"hbar": enc(self.hbar), "base_point": enc(self.base), "order": [j + 1 for j in self.order],
                "matrices": {f"kappa_{j + 1}": [[enc(c) for c in row] for row in M] for j, M in self.matrices.items()},
                "traces": {f"kappa_{j + 1}": enc(t) for j, t in self.traces().items()},
                "det_defects": {f"kappa_{j + 1}": d for j, d in self.det_defects.items()},
                "relation_defect": self.relation_defect, "wronskian_drift": self.wronskian_drift}


def relation_defect(mats: Sequence[np.ndarray]) -> float:
    """min over signs of ||prod -+ I||, relative to the largest partial product; traversal order."""
    P = np.eye(2, dtype=complex)
    scale = 1.0
    for M in mats:
        P = M @ P
        scale = max(scale, float(np.linalg.norm(P, 2)))
    return min(float(np.linalg.norm(P - s * np.eye(2), 2)) for s in (1, -1)) / scale


def monodromy_rep(spec: QuadDiffSpec, hbar: complex, base: complex | None = None,
                  rtol: float = DEFAULT_RTOL) -> MonodromyRep:
    sp = spec.to_float()
    base, order, loops = generator_loops(sp, base)
    make = potential_of(sp)(hbar)
    mats, dets, drift = {}, {}, 0.0
    for j in order:
        res = transport_potential(make, hbar, loops[j], rtol)
        det = complex(np.linalg.det(res.matrix))
        mats[j] = res.matrix / np.sqrt(det)
        dets[j] = float(abs(det - 1))
        drift = max(drift, res.wronskian_drift)
    defect = relation_defect([mats[j] for j in order])
    return MonodromyRep(hbar, base, order, mats, defect, dets, drift)
