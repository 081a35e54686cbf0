"""The twelve acceptance checks as plain functions.

Each check returns a Criterion with the measured value, the threshold and a
verdict. The pytest suite and ``wkbcover verify`` both call these, so there is
one definition of what passing means.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cover import build_cover, homology_basis, random_exact_spec, stratum_spec
from .periods import binomial_period_expansion, direct_deformed_period, split_basis
from .wkb import (closed_form_vk, normalized_difference, riccati_recursion, riccati_residual,
                  symmetric_part_identity, turning_point_residues, residue_is_zero, vk_differential)

# reference data for the n = 4 checks
REF_Z = [-1, 1, 0.2 + 1.3j, -0.3 - 1.2j]
REF_R = [0.9 + 0.1j, 1.1 - 0.05j, 0.8 + 0.07j, 1.0 + 0.03j]
REF_T = [-0.75 - 3j]
REF_Q1 = [1.0]
EXACT_CASES = [(3, 1), (4, 2), (4, 3), (5, 4), (5, 5)]
PROBE_POINTS = [0.37 + 0.21j, -0.53 + 0.77j, 1.13 - 0.41j, -0.2 - 0.45j]
DIRECTIONS = [np.array([1.0, 0.3j]), np.array([0.2, 1.0])]


@dataclass
class Criterion:
    number: int
    name: str
    measured: str
    threshold: str
    passed: bool
    seconds: float = 0.0
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] {self.number:2d} {self.name}: measured {self.measured}; "
                f"threshold {self.threshold} ({self.seconds:.1f} s)")

    def to_json(self) -> dict:
        return {"criterion": self.number, "name": self.name, "measured": self.measured,
                "threshold": self.threshold, "passed": self.passed, "seconds": self.seconds}


def reference_spec(with_Q1: bool = True):
    return stratum_spec(REF_Z, REF_R, REF_T, REF_Q1 if with_Q1 else None)


def reference_point():
    from .moduli import ModuliPoint
    return ModuliPoint.from_data(REF_Z, REF_R, REF_T, REF_Q1)


def slope(xs, ys) -> float:
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.maximum(np.asarray(ys, float), 1e-300)), 1)[0])


def _timed(fn: Callable[[], Criterion]) -> Criterion:
    t0 = time.time()
    c = fn()
    c.seconds = time.time() - t0
    return c


# ---------------------------------------------------------------- 1-3: exact recursion

def _exact_series(cache: dict, n: int, seed: int):
    key = (n, seed)
    if key not in cache:
        cache[key] = riccati_recursion(random_exact_spec(n, seed), 5)
    return cache[key]


def check_closed_forms(cache: dict | None = None) -> Criterion:
    """v_{-1}..v_2 from the recursion against the closed forms (literal v_2 and the derived one)."""
    cache = {} if cache is None else cache
    lit, derived = {}, {}
    for n, seed in EXACT_CASES:
        S = _exact_series(cache, n, seed)
        lit[(n, seed)] = [normalized_difference(vk_differential(S, k), closed_form_vk(S, k)) for k in (-1, 0, 1, 2)]
        derived[(n, seed)] = normalized_difference(vk_differential(S, 2), closed_form_vk(S, 2, literal=False))
    worst_lit = max(max(v) for v in lit.values())
    worst_low = max(max(v[:3]) for v in lit.values())
    worst_der = max(derived.values())
    failing = [f"n={n},seed={s}" for (n, s), v in lit.items() if v[3] != 0.0]
    return Criterion(1, "recursion vs closed forms v_-1..v_2",
                     f"max diff k<=1: {worst_low:.1e}, literal v_2: {worst_lit:.2e}"
                     f" (nonzero on {', '.join(failing) or 'none'}), recursion form of v_2: {worst_der:.1e}",
                     "all differences identically 0", worst_lit == 0.0,
                     detail={"literal": {str(k): v for k, v in lit.items()},
                             "recursion_form_v2": {str(k): v for k, v in derived.items()}})


def check_lemma_identity(cache: dict | None = None) -> Criterion:
    cache = {} if cache is None else cache
    bad = []
    for n, seed in EXACT_CASES:
        S = _exact_series(cache, n, seed)
        for k in range(-1, 5):
            if not symmetric_part_identity(S, k).is_zero():
                bad.append((n, seed, k))
    return Criterion(2, "order-by-order symmetric-part identity, k <= 4",
                     f"{len(bad)} nonzero of {len(EXACT_CASES) * 6}", "0 nonzero", not bad,
                     detail={"nonzero": bad})


def check_turning_residues(cache: dict | None = None) -> Criterion:
    cache = {} if cache is None else cache
    bad = []
    for n, seed in EXACT_CASES[:3]:
        S = _exact_series(cache, n, seed)
        for k in range(-1, 5):
            if not residue_is_zero(turning_point_residues(S, k)[0]):
                bad.append((n, seed, k))
    spec = reference_spec()
    cover = build_cover(spec)
    Sf = riccati_recursion(spec, 5, exact=False)
    worst = 0.0
    for k in range(-1, 5):
        for _, res, scale in turning_point_residues(Sf, k, cover):
            worst = max(worst, abs(res) / scale)
    ok = not bad and worst < 1e-10
    return Criterion(3, "turning-point residues of v_k vanish, k <= 4",
                     f"exact nonzero: {len(bad)}; float max relative {worst:.1e}",
                     "exact 0; float < 1e-10", ok, detail={"exact_nonzero": bad, "float_max_relative": worst})


# ---------------------------------------------------------------- 4-5: asymptotic slopes

def check_riccati_slope() -> Criterion:
    spec = reference_spec()
    hs = [0.2, 0.1, 0.05]
    slopes = {}
    for N in (2, 3):
        S = riccati_recursion(spec, N, exact=False)
        res = [riccati_residual(S, PROBE_POINTS, h) for h in hs]
        slopes[N] = slope(hs, res)
    ok = all(abs(s - N) <= 0.15 * N for N, s in slopes.items())
    return Criterion(4, "Riccati residual slope", ", ".join(f"N={N}: {s:.3f}" for N, s in slopes.items()),
                     "within 15% of N", ok, detail={"slopes": slopes})


def check_binomial_periods() -> Criterion:
    spec = reference_spec()
    cover = build_cover(spec)
    cyc = split_basis(homology_basis(cover))
    a = cyc["a"][0]
    Qt = spec.Q1_or_zero().to_float()
    hs = [0.1, 0.05, 0.025]
    direct = [direct_deformed_period(cover, Qt, h, a) for h in hs]
    coeffs = binomial_period_expansion(cover, Qt, a, 3)
    slopes = {}
    for K in (2, 3):
        err = [abs(d - sum(h ** k * coeffs[k] for k in range(K + 1))) for d, h in zip(direct, hs)]
        slopes[K] = slope(hs, err)
    ok = all(abs(s - (K + 1)) <= 0.10 * (K + 1) for K, s in slopes.items())
    return Criterion(5, "binomial period expansion slope", ", ".join(f"K={K}: {s:.3f}" for K, s in slopes.items()),
                     "within 10% of K+1", ok, detail={"slopes": slopes})


# ---------------------------------------------------------------- 6-7: ODE monodromy

def check_puncture_monodromy() -> Criterion:
    from .ode import puncture_spectrum
    spec = reference_spec()
    errs = [puncture_spectrum(spec, 0.1, j).relative_error for j in range(spec.n)]
    worst = max(errs)
    return Criterion(6, "puncture eigenvalues vs exp(+-2 pi i lambda)", f"max relative {worst:.1e}",
                     "< 1e-6", worst < 1e-6, detail={"errors": errs})


def check_voros_scaling() -> Criterion:
    from .ode import rho_scaling_fit, voros_t_series
    spec = reference_spec()
    grid = [0.2, 0.1, 0.05, 0.025]
    slopes = {}
    for N in (1, 2):
        slopes[N] = rho_scaling_fit(spec, 0, grid, N).slope
    bare = reference_spec(with_Q1=False)
    coef_err = max(abs(voros_t_series(bare, j, 1)[2] - 2j * np.pi / (8 * REF_R[j])) for j in range(4))
    slope_ok = {N: abs(s - (N + 1)) <= 0.15 * (N + 1) for N, s in slopes.items()}
    ok = all(slope_ok.values()) and coef_err < 1e-8
    return Criterion(7, "Voros vs ODE scaling",
                     ", ".join(f"N={N}: slope {s:.3f}" for N, s in slopes.items())
                     + f"; k=1 coefficient error {coef_err:.1e}",
                     "slope within 15% of N+1; coefficient < 1e-8", ok,
                     detail={"slopes": slopes, "slope_ok": slope_ok, "k1_error": coef_err})


# ---------------------------------------------------------------- 8-12: moduli space

def check_closedness(point=None) -> Criterion:
    from .moduli import closedness_study, nonclosed_control, tau_one_form, theta_form
    P = reference_point() if point is None else point
    u, w = DIRECTIONS
    s_theta = closedness_study(theta_form, P, u, w, eps0=0.05).slope
    s_tau = closedness_study(tau_one_form, P, u, w, eps0=0.05).slope
    s_ctrl = closedness_study(nonclosed_control, P, u, w, eps0=0.05).slope
    ok = s_theta >= 3 and s_tau >= 3 and abs(s_ctrl - 2) <= 0.15 * 2
    return Criterion(8, "closedness defects",
                     f"Theta_(Q1) {s_theta:.2f}, tau form {s_tau:.2f}, non-closed control {s_ctrl:.2f}",
                     ">= 3, >= 3, control ~ 2 (expected to fail closedness)", ok,
                     detail={"theta": s_theta, "tau": s_tau, "control": s_ctrl})


def check_tau_homogeneity(kappa: float = 1.5) -> Criterion:
    from .moduli import tau_scaling_integral, winding_decomposition
    spec = reference_spec(with_Q1=False)
    out = tau_scaling_integral(spec, kappa)
    delta, expected = out["delta"], out["expected"]
    per_log = delta / np.log(kappa)
    exponent = 5 * (spec.n - 2) / 72
    dec = winding_decomposition(REF_R, per_log - exponent)
    rel = out["relative_error"]
    return Criterion(9, "tau homogeneity along Q -> kappa^2 Q",
                     f"Delta log tau = {delta:.6f} vs {expected:.6f} (relative {rel:.2e}); "
                     f"Delta/log kappa - 5(n-2)/72 is an integer winding combination to {dec['residual']:.1e}",
                     "relative < 1e-4", rel < 1e-4,
                     detail={"delta": delta, "expected": expected, "winding": dec})


def check_gradients(point=None) -> Criterion:
    from .gfun import dG_minus1_form, dG_one_form, dG_zero_form, g_minus1_local, g_one, g_zero_local
    from .moduli import chart_derivative, tau_one_form, theta_form
    P = reference_point() if point is None else point
    rows = []
    for d in DIRECTIONS:
        fd_m = theta_form(P)(d) + chart_derivative(lambda p: g_minus1_local(p)[0], P, d)
        fd_0 = -12j * np.pi * tau_one_form(P)(d) + chart_derivative(lambda p: g_zero_local(p)[0], P, d)
        fd_1 = chart_derivative(lambda p: g_one(p)[0], P, d)
        for name, a, b in (("G_-1", fd_m, dG_minus1_form(P, d)), ("G_0", fd_0, dG_zero_form(P, d)),
                           ("G_1", fd_1, dG_one_form(P, d))):
            rows.append((name, abs(a - b) / max(1.0, abs(b))))
    worst = max(e for _, e in rows)
    return Criterion(10, "generating-function gradients vs defining 1-forms", f"max relative {worst:.1e}",
                     "< 1e-4", worst < 1e-4, detail={"rows": rows})


def check_lemma1(point=None) -> Criterion:
    from .moduli import lemma1_check
    P = reference_point() if point is None else point
    res = [lemma1_check(P, d) for d in DIRECTIONS]
    worst = max(abs(r["defect"]) for r in res)
    worst79 = max(abs(r["defect_79"]) for r in res)
    return Criterion(11, "bilinear boundary identity for (v, Q1/v)",
                     f"defect {worst:.1e} (second boundary form {worst79:.1e})", "< 1e-5",
                     worst < 1e-5 and worst79 < 1e-5, detail={"defects": [r["defect"] for r in res]})


def check_hmap(point=None) -> Criterion:
    from .moduli import hmap_generating_check
    P = reference_point() if point is None else point
    out = hmap_generating_check(P, [0.1, 0.05, 0.025, 0.0125])
    at05 = next(r["residual"] for r in out["rows"] if r["hbar"] == 0.05)
    worst = max(r["residual"] for r in out["rows"])
    s1 = out["first_order_slope"]
    ok = at05 < 1e-4 and worst < 1e-4 and abs(s1 - 2) <= 0.15 * 2
    return Criterion(12, "hbar-map generating-function relation",
                     f"residual at 0.05: {at05:.1e} (max over grid {worst:.1e}); "
                     f"first-order truncation slope {s1:.3f}",
                     "< 1e-4; truncation slope within 15% of 2", ok,
                     detail={"rows": out["rows"], "first_order_slope": s1})


CHECKS: dict[int, Callable] = {
    1: check_closed_forms, 2: check_lemma_identity, 3: check_turning_residues, 4: check_riccati_slope,
    5: check_binomial_periods, 6: check_puncture_monodromy, 7: check_voros_scaling, 8: check_closedness,
    9: check_tau_homogeneity, 10: check_gradients, 11: check_lemma1, 12: check_hmap,
}

SUITES: dict[str, list[int]] = {
    "recursion-exact": [1, 2, 3],
    "asymptotics": [4, 5],
    "monodromy": [6, 7],
    "closedness": [8],
    "tau": [9],
    "gradients": [10],
    "identities": [11, 12],
    "all": list(range(1, 13)),
}


def run_check(k: int, cache: dict | None = None) -> Criterion:
    """One criterion, timed; checks 1-3 share exact recursion data through ``cache``."""
    fn = CHECKS[k]
    return _timed(lambda: fn({} if cache is None else cache) if k <= 3 else fn())


def run_suite(name: str = "all", on_result: Callable[[Criterion], None] | None = None) -> list[Criterion]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    cache: dict = {}
    out = []
    for k in SUITES[name]:
        c = run_check(k, cache)
        out.append(c)
        if on_result is not None:
            on_result(c)
    return out
