"""Rational functions on the sphere, the quadratic extension y^2 = Q, and local series.

Two coefficient backends share one code path:

* exact: Gaussian rationals (sympy ``QQ_I`` elements), used for identity checks;
* float: complex numbers, used for quadrature inputs.

Conversion goes one way only (exact -> float).

Denominators are stored factored as ``((f1, e1), (f2, e2), ...)`` with monic ``f``.
Keeping the factors P and D separate stops the degree blowup that a single
expanded denominator would cause in the WKB recursion.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from sympy.polys import densearith as _da
from sympy.polys import densetools as _dt
from sympy.polys import euclidtools as _et
from sympy.polys.domains import QQ_I
from sympy.polys.domains.gaussiandomains import GaussianElement

ZERO_DEGREE = -1          # degree sentinel of the zero polynomial
FLOAT_DROP = 1e-15        # trailing coefficients below this (relative) are dropped in float mode
FLOAT_DIV_TOL = 1e-10     # relative remainder accepted as "divisible" in float mode
INF_ORDER = 10 ** 9       # truncation order of exact (untruncated) constants


class FieldError(ArithmeticError):
    """Raised on invalid arithmetic (division by zero, mismatched extensions)."""


class SeriesBudgetError(ValueError):
    """Raised when a coefficient beyond the trusted truncation order is requested."""


# ---------------------------------------------------------------- coefficients

def exact_coeff(c) -> GaussianElement:
    """Convert ints, Fractions, floats (exactly), complex or sympy numbers to QQ_I."""
    if isinstance(c, GaussianElement):
        return c
    if isinstance(c, (int, Fraction)):
        return QQ_I(Fraction(c), 0)
    if isinstance(c, float):
        return QQ_I(Fraction(c), 0)
    if isinstance(c, complex):
        return QQ_I(Fraction(c.real), Fraction(c.imag))
    if isinstance(c, tuple) and len(c) == 2:
        return QQ_I(Fraction(c[0]), Fraction(c[1]))
    try:
        return QQ_I.from_sympy(c)
    except Exception as exc:  # pragma: no cover - defensive
        raise TypeError(f"cannot convert {c!r} to an exact Gaussian rational") from exc


def to_complex(c) -> complex:
    if isinstance(c, GaussianElement):
        return complex(float(c.x), float(c.y))
    if hasattr(c, "to_complex"):
        return c.to_complex()
    return complex(c)


def _is_exact_value(c) -> bool:
    return isinstance(c, (int, Fraction, GaussianElement)) or (
        hasattr(c, "is_Rational") and bool(getattr(c, "is_Rational")))


def is_zero(c) -> bool:
    if isinstance(c, GaussianElement):
        return not c
    if isinstance(c, (int, Fraction)):
        return c == 0
    if hasattr(c, "is_zero") and not isinstance(c, (complex, float, np.generic)):
        return bool(c.is_zero)
    return c == 0


# ---------------------------------------------------------------- polynomials

class Poly:
    """Univariate polynomial, coefficients in ascending degree order."""

    __slots__ = ("coeffs", "exact")

    def __init__(self, coeffs: Iterable, exact: bool | None = None):
        cs = list(coeffs)
        if exact is None:
            exact = all(_is_exact_value(c) for c in cs)
        if exact:
            cs = [exact_coeff(c) for c in cs]
            while cs and not cs[-1]:
                cs.pop()
            self.coeffs = tuple(cs)
        else:
            arr = np.array([to_complex(c) for c in cs], dtype=complex)
            if arr.size:
                scale = np.max(np.abs(arr))
                keep = np.nonzero(np.abs(arr) > FLOAT_DROP * scale)[0]
                arr = arr[: keep[-1] + 1] if keep.size else arr[:0]
            arr.setflags(write=False)
            self.coeffs = arr
        self.exact = bool(exact)

    # construction helpers
    @classmethod
    def from_roots(cls, roots: Sequence, exact: bool | None = None) -> "Poly":
        p = cls([1], exact=exact if exact is not None else all(_is_exact_value(r) or isinstance(r, GaussianElement) for r in roots))
        for r in roots:
            p = p * cls([-r if not isinstance(r, GaussianElement) else -r, 1], exact=p.exact)
        return p

    @classmethod
    def x(cls, exact: bool = True) -> "Poly":
        return cls([0, 1], exact=exact)

    @classmethod
    def const(cls, c, exact: bool | None = None) -> "Poly":
        return cls([c], exact=exact)

    # basic properties
    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1 if len(self.coeffs) else ZERO_DEGREE

    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    @property
    def lc(self):
        if self.is_zero():
            raise FieldError("zero polynomial has no leading coefficient")
        return self.coeffs[-1]

    def _dup(self):
        return list(reversed(self.coeffs))

    @classmethod
    def _from_dup(cls, dup) -> "Poly":
        return cls(list(reversed(dup)), exact=True)

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.exact == self.exact:
                return other
            return other.to_float() if other.exact else self.to_float()
        return Poly([other], exact=self.exact)

    def to_float(self) -> "Poly":
        if not self.exact:
            return self
        return Poly([to_complex(c) for c in self.coeffs], exact=False)

    def to_exact(self) -> "Poly":
        if self.exact:
            return self
        return Poly([complex(c) for c in self.coeffs], exact=True)

    # arithmetic
    def __add__(self, other) -> "Poly":
        other = self._coerce(other)
        a, b = (self, other) if self.exact == other.exact else (self.to_float(), other.to_float())
        if a.exact:
            return Poly._from_dup(_da.dup_add(a._dup(), b._dup(), QQ_I))
        return Poly(np.polynomial.polynomial.polyadd(a.coeffs, b.coeffs) if len(a.coeffs) and len(b.coeffs)
                    else (a.coeffs if len(a.coeffs) else b.coeffs), exact=False)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        if self.exact:
            return Poly([-c for c in self.coeffs], exact=True)
        return Poly(-self.coeffs, exact=False)

    def __sub__(self, other) -> "Poly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Poly":
        return (-self) + other

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            return self.scale(other)
        if self.exact != other.exact:
            return self.to_float() * other.to_float()
        if self.is_zero() or other.is_zero():
            return Poly([], exact=self.exact)
        if self.exact:
            return Poly._from_dup(_da.dup_mul(self._dup(), other._dup(), QQ_I))
        return Poly(np.convolve(self.coeffs, other.coeffs), exact=False)

    __rmul__ = __mul__

    def scale(self, c) -> "Poly":
        if self.exact and _is_exact_value(c):
            c = exact_coeff(c)
            return Poly([c * a for a in self.coeffs], exact=True)
        return Poly(self.to_float().coeffs * to_complex(c), exact=False)

    def __pow__(self, k: int) -> "Poly":
        out = Poly([1], exact=self.exact)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def divmod(self, other: "Poly") -> tuple["Poly", "Poly"]:
        other = self._coerce(other)
        if other.is_zero():
            raise FieldError("polynomial division by zero")
        if self.exact and other.exact:
            q, r = _da.dup_div(self._dup(), other._dup(), QQ_I)
            return Poly._from_dup(q), Poly._from_dup(r)
        a, b = self.to_float(), other.to_float()
        if a.degree < b.degree:
            return Poly([], exact=False), a
        q, r = np.polynomial.polynomial.polydiv(a.coeffs, b.coeffs)
        return Poly(q, exact=False), Poly(r, exact=False)

    def __floordiv__(self, other) -> "Poly":
        return self.divmod(other)[0]

    def __mod__(self, other) -> "Poly":
        return self.divmod(other)[1]

    def divides(self, other: "Poly") -> bool:
        """True if self divides other (exactly, or to FLOAT_DIV_TOL in float mode)."""
        if other.is_zero():
            return True
        q, r = other.divmod(self)
        if self.exact and other.exact:
            return r.is_zero()
        scale = float(np.max(np.abs(other.to_float().coeffs)))
        return r.is_zero() or float(np.max(np.abs(r.coeffs))) <= FLOAT_DIV_TOL * scale

    def derivative(self) -> "Poly":
        if self.degree <= 0:
            return Poly([], exact=self.exact)
        if self.exact:
            return Poly([c * k for k, c in enumerate(self.coeffs)][1:], exact=True)
        return Poly(np.polynomial.polynomial.polyder(self.coeffs), exact=False)

    def monic(self) -> "Poly":
        lc = self.lc
        if self.exact:
            inv = 1 / lc
            return Poly([c * inv for c in self.coeffs], exact=True)
        return Poly(self.coeffs / lc, exact=False)

    def gcd(self, other: "Poly") -> "Poly":
        if not (self.exact and other.exact):
            raise FieldError("gcd is only available in exact mode")
        return Poly._from_dup(_et.dup_gcd(self._dup(), other._dup(), QQ_I)).monic()

    def taylor_shift(self, a) -> "Poly":
        """Coefficients of p(a + t) in t (exact when a is exact)."""
        if self.exact and _is_exact_value(a):
            return Poly._from_dup(_dt.dup_shift(self._dup(), exact_coeff(a), QQ_I))
        return Poly(shift_coefficients(list(self.to_float().coeffs), to_complex(a), len(self.coeffs)), exact=False)

    # evaluation
    def __call__(self, x):
        if self.exact and _is_exact_value(x):
            x = exact_coeff(x)
            acc = QQ_I.zero
            for c in reversed(self.coeffs):
                acc = acc * x + c
            return acc
        cs = self.to_float().coeffs
        x = np.asarray(x, dtype=complex)
        if not len(cs):
            return np.zeros_like(x)
        return np.polynomial.polynomial.polyval(x, cs)

    def roots(self) -> np.ndarray:
        cs = self.to_float().coeffs
        if len(cs) <= 1:
            return np.zeros(0, dtype=complex)
        return np.polynomial.polynomial.polyroots(cs)

    # comparisons
    def same_as(self, other: "Poly", rtol: float = 1e-13) -> bool:
        if self.degree != other.degree:
            return False
        if self.exact and other.exact:
            return self.coeffs == other.coeffs
        a, b = self.to_float().coeffs, other.to_float().coeffs
        return bool(np.allclose(a, b, rtol=rtol, atol=rtol * max(1.0, float(np.max(np.abs(a), initial=0.0)))))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Poly):
            other = Poly([other], exact=self.exact)
        return self.same_as(other)

    def __hash__(self):
        return hash(tuple(to_complex(c) for c in self.coeffs))

    def __repr__(self) -> str:
        return f"Poly({[str(c) if self.exact else c for c in self.coeffs]}, exact={self.exact})"


def shift_coefficients(coeffs: list, a, count: int) -> list:
    """First ``count`` Taylor coefficients of sum c_k x^k at x = a.

    Generic synthetic division; works for any coefficient type with + and *.
    """
    work = list(coeffs)
    out = []
    for _ in range(count):
        if not work:
            break
        acc = work[-1]
        quot = [None] * (len(work) - 1)
        for k in range(len(work) - 2, -1, -1):
            quot[k] = acc
            acc = work[k] + acc * a
        out.append(acc)
        work = quot
    return out


# ---------------------------------------------------------------- rational functions

def _merge(factors: Iterable[tuple[Poly, int]]) -> list[list]:
    out: list[list] = []
    for f, e in factors:
        if e == 0:
            continue
        for item in out:
            if item[0].same_as(f):
                item[1] += e
                break
        else:
            out.append([f, e])
    return out


class RatFunc:
    """numerator / prod(f_i^e_i) with monic f_i; normalized by cancelling common factors."""

    __slots__ = ("num", "factors")

    def __init__(self, num, den=None):
        if not isinstance(num, Poly):
            num = Poly([num])
        factors: list = []
        if den is not None:
            if not isinstance(den, Poly):
                den = Poly([den], exact=num.exact)
            if den.is_zero():
                raise FieldError("zero denominator")
            num = num.scale(1 / den.lc) if num.exact and den.exact else num.to_float().scale(1 / to_complex(den.lc))
            if den.degree > 0:
                factors = [(den.monic(), 1)]
        num, factors = _normalize(num, factors, split=True)
        self.num = num
        self.factors = tuple(factors)

    @classmethod
    def from_factors(cls, num: Poly, factors: Iterable[tuple[Poly, int]], split: bool = False) -> "RatFunc":
        obj = cls.__new__(cls)
        num, fs = _normalize(num, list(factors), split=split)
        obj.num = num
        obj.factors = tuple(fs)
        return obj

    @classmethod
    def const(cls, c, exact: bool | None = None) -> "RatFunc":
        return cls(Poly([c], exact=exact))

    @property
    def exact(self) -> bool:
        return self.num.exact and all(f.exact for f, _ in self.factors)

    @property
    def numerator(self) -> Poly:
        return self.num

    @property
    def denominator(self) -> Poly:
        out = Poly([1], exact=self.num.exact)
        for f, e in self.factors:
            out = out * f ** e
        return out

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def to_float(self) -> "RatFunc":
        return RatFunc.from_factors(self.num.to_float(), [(f.to_float(), e) for f, e in self.factors])

    def _lift(self, other) -> "RatFunc":
        if isinstance(other, RatFunc):
            return other
        if isinstance(other, Poly):
            return RatFunc.from_factors(other, [])
        return RatFunc.from_factors(Poly([other], exact=self.num.exact and _is_exact_value(other)), [])

    # arithmetic
    def __add__(self, other) -> "RatFunc":
        other = self._lift(other)
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        common = _merge([])
        for f, e in list(self.factors) + list(other.factors):
            for item in common:
                if item[0].same_as(f):
                    item[1] = max(item[1], e)
                    break
            else:
                common.append([f, e])

        def lift(r: RatFunc) -> Poly:
            out = r.num
            for f, e in common:
                have = next((ee for ff, ee in r.factors if ff.same_as(f)), 0)
                if e - have:
                    out = out * f ** (e - have)
            return out

        return RatFunc.from_factors(lift(self) + lift(other), [(f, e) for f, e in common])

    __radd__ = __add__

    def __neg__(self) -> "RatFunc":
        return RatFunc.from_factors(-self.num, self.factors)

    def __sub__(self, other) -> "RatFunc":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "RatFunc":
        return (-self) + other

    def __mul__(self, other) -> "RatFunc":
        other = self._lift(other)
        if self.is_zero() or other.is_zero():
            return RatFunc.from_factors(Poly([], exact=self.num.exact and other.num.exact), [])
        return RatFunc.from_factors(self.num * other.num, _merge(list(self.factors) + list(other.factors)))

    __rmul__ = __mul__

    def inverse(self) -> "RatFunc":
        if self.is_zero():
            raise FieldError("division by the zero rational function")
        num = self.num
        # express the numerator through known factors first to keep factor lists short
        known = [f for f, _ in self.factors]
        new_factors: list = []
        for f in known:
            k = 0
            while num.degree >= f.degree and f.divides(num):
                num = num // f
                k += 1
            if k:
                new_factors.append((f, k))
        lc = num.lc
        if num.degree > 0:
            new_factors.append((num.monic(), 1))
        top = self.denominator
        top = top.scale(1 / lc) if (top.exact and isinstance(lc, GaussianElement)) else top.to_float().scale(1 / to_complex(lc))
        return RatFunc.from_factors(top, new_factors)

    def __truediv__(self, other) -> "RatFunc":
        other = self._lift(other)
        return self * other.inverse()

    def __rtruediv__(self, other) -> "RatFunc":
        return self._lift(other) * self.inverse()

    def __pow__(self, k: int) -> "RatFunc":
        if k < 0:
            return self.inverse() ** (-k)
        out = RatFunc.from_factors(Poly([1], exact=self.num.exact), [])
        for _ in range(k):
            out = out * self
        return out

    def derivative(self) -> "RatFunc":
        """d/dx in the affine chart."""
        if not self.factors:
            return RatFunc.from_factors(self.num.derivative(), [])
        fs = [f for f, _ in self.factors]
        big = Poly([1], exact=self.num.exact)
        for f in fs:
            big = big * f
        top = self.num.derivative() * big
        for f, e in self.factors:
            rest = big // f
            top = top - (self.num * f.derivative() * rest).scale(e)
        return RatFunc.from_factors(top, [(f, e + 1) for f, e in self.factors])

    # evaluation and comparison
    def __call__(self, x):
        if self.exact and _is_exact_value(x):
            den = QQ_I.one
            for f, e in self.factors:
                den = den * f(x) ** e
            if not den:
                raise FieldError("evaluation at a pole")
            return self.num(x) / den
        x = np.asarray(x, dtype=complex)
        val = self.num(x)
        for f, e in self.factors:
            val = val / f(x) ** e
        return val

    def equals(self, other, rtol: float = 1e-12) -> bool:
        diff = self - self._lift(other)
        if diff.exact:
            return diff.is_zero()
        if diff.is_zero():
            return True
        scale = max(float(np.max(np.abs(self.num.to_float().coeffs), initial=0.0)), 1e-300)
        return float(np.max(np.abs(diff.num.to_float().coeffs))) <= rtol * scale * 10

    def __eq__(self, other) -> bool:
        return self.equals(other)

    __hash__ = None

    def __repr__(self) -> str:
        fs = " * ".join(f"({f})^{e}" for f, e in self.factors) or "1"
        return f"RatFunc({self.num} / {fs})"


def _normalize(num: Poly, factors: list, split: bool = False) -> tuple[Poly, list]:
    if num.is_zero():
        return num, []
    work = [list(item) for item in _merge(factors)]
    out = []
    while work:
        f, e = work.pop()
        while e > 0:
            if split and num.exact and f.exact:
                g = num.gcd(f)
                if g.degree <= 0:
                    break
                if g.degree < f.degree:
                    work.append([g, e])
                    work.append([(f // g).monic(), e])
                    e = 0
                    break
                num = num // f
                e -= 1
            else:
                if num.degree >= f.degree and f.divides(num):
                    num = num // f
                    e -= 1
                else:
                    break
        if e > 0:
            out.append((f, e))
    return num, [tuple(x) for x in _merge(out)]


def poly(coeffs, exact: bool | None = None) -> Poly:
    return Poly(coeffs, exact=exact)


def ratfunc_arith(op: str, lhs: RatFunc, rhs: RatFunc | None = None) -> RatFunc:
    """Dispatch for {add, mul, div, derivative}."""
    if op == "add":
        return lhs + rhs
    if op == "mul":
        return lhs * rhs
    if op == "div":
        return lhs / rhs
    if op == "derivative":
        return lhs.derivative()
    raise ValueError(f"unknown op {op!r}")


# ---------------------------------------------------------------- quadratic extension

class QuadExt:
    """The field C(x)[y]/(y^2 - Q) for a fixed rational Q."""

    def __init__(self, Q: RatFunc, inv_Q: RatFunc | None = None):
        self.Q = Q
        self.inv_Q = inv_Q if inv_Q is not None else Q.inverse()
        self.half_log_dQ = Q.derivative() * self.inv_Q * RatFunc.const(Fraction(1, 2) if Q.exact else 0.5, exact=Q.exact)

    @property
    def exact(self) -> bool:
        return self.Q.exact

    def elem(self, even=0, odd=0) -> "QextElem":
        return QextElem(even, odd, self)

    @property
    def y(self) -> "QextElem":
        return QextElem(0, 1, self)

    def same(self, other: "QuadExt") -> bool:
        return self is other or self.Q.equals(other.Q)


class QextElem:
    """a(x) + b(x) y with y^2 = Q.

    Read as a differential, the element is the coefficient of dx, so v = y dx is
    ``QextElem(0, 1, ext)``.
    """

    __slots__ = ("even", "odd", "ext")

    def __init__(self, even, odd, ext: QuadExt):
        ex = ext.exact
        self.even = even if isinstance(even, RatFunc) else RatFunc.const(even, exact=ex and _is_exact_value(even))
        self.odd = odd if isinstance(odd, RatFunc) else RatFunc.const(odd, exact=ex and _is_exact_value(odd))
        self.ext = ext

    @property
    def even_part(self) -> RatFunc:
        return self.even

    @property
    def odd_part(self) -> RatFunc:
        return self.odd

    def _check(self, other: "QextElem") -> "QextElem":
        if not isinstance(other, QextElem):
            return QextElem(other, 0, self.ext)
        if not self.ext.same(other.ext):
            raise FieldError("operands live over different Q")
        return other

    def __add__(self, other) -> "QextElem":
        other = self._check(other)
        return QextElem(self.even + other.even, self.odd + other.odd, self.ext)

    __radd__ = __add__

    def __neg__(self) -> "QextElem":
        return QextElem(-self.even, -self.odd, self.ext)

    def __sub__(self, other) -> "QextElem":
        return self + (-self._check(other))

    def __rsub__(self, other) -> "QextElem":
        return (-self) + other

    def __mul__(self, other) -> "QextElem":
        if isinstance(other, RatFunc):
            return QextElem(self.even * other, self.odd * other, self.ext)
        other = self._check(other)
        a1, b1, a2, b2 = self.even, self.odd, other.even, other.odd
        even = a1 * a2
        if not (b1.is_zero() or b2.is_zero()):
            even = even + b1 * b2 * self.ext.Q
        odd = a1 * b2 + a2 * b1
        return QextElem(even, odd, self.ext)

    __rmul__ = __mul__

    def scale(self, c) -> "QextElem":
        c = RatFunc.const(c, exact=self.ext.exact and _is_exact_value(c))
        return QextElem(self.even * c, self.odd * c, self.ext)

    def involution(self) -> "QextElem":
        """The sheet swap mu: a + b y -> a - b y."""
        return QextElem(self.even, -self.odd, self.ext)

    def derivative(self) -> "QextElem":
        """d/dx using y' = Q'/(2Q) y."""
        odd = self.odd.derivative() + self.odd * self.ext.half_log_dQ if not self.odd.is_zero() else self.odd
        return QextElem(self.even.derivative(), odd, self.ext)

    def div_by_v(self) -> "QextElem":
        """(a + b y)/y = b + a (y/Q)."""
        return QextElem(self.odd, self.even * self.ext.inv_Q, self.ext)

    def norm(self) -> RatFunc:
        return self.even * self.even - self.odd * self.odd * self.ext.Q

    def inverse(self) -> "QextElem":
        n = self.norm()
        if n.is_zero():
            raise FieldError("division by zero in the extension")
        ninv = n.inverse()
        return QextElem(self.even * ninv, -self.odd * ninv, self.ext)

    def __truediv__(self, other) -> "QextElem":
        if isinstance(other, RatFunc):
            return self * other.inverse()
        return self * self._check(other).inverse()

    def odd_projection(self) -> "QextElem":
        return QextElem(0, self.odd, self.ext)

    def even_projection(self) -> "QextElem":
        return QextElem(self.even, 0, self.ext)

    def is_zero(self) -> bool:
        return self.even.is_zero() and self.odd.is_zero()

    def equals(self, other, rtol: float = 1e-12) -> bool:
        other = self._check(other)
        return self.even.equals(other.even, rtol) and self.odd.equals(other.odd, rtol)

    def __eq__(self, other) -> bool:
        return self.equals(other)

    __hash__ = None

    def to_float(self) -> "QextElem":
        if not self.ext.exact:
            return self
        ext = float_ext(self.ext)
        return QextElem(self.even.to_float(), self.odd.to_float(), ext)

    def evaluate(self, x, y):
        """Pointwise value a(x) + b(x) y for given sheet values y."""
        out = 0
        if not self.even.is_zero():
            out = out + self.even(x)
        if not self.odd.is_zero():
            out = out + self.odd(x) * y
        return out

    def __repr__(self) -> str:
        return f"QextElem(even={self.even}, odd={self.odd})"


_FLOAT_EXT_CACHE: dict = {}


def float_ext(ext: QuadExt) -> QuadExt:
    key = id(ext)
    hit = _FLOAT_EXT_CACHE.get(key)
    if hit is not None and hit[0] is ext:
        return hit[1]
    fe = QuadExt(ext.Q.to_float(), ext.inv_Q.to_float())
    _FLOAT_EXT_CACHE[key] = (ext, fe)
    return fe


def qext_arith(op: str, *args: QextElem) -> QextElem:
    """Dispatch for {add, mul, derivative, involution, div_by_v}."""
    if op == "add":
        return args[0] + args[1]
    if op == "mul":
        return args[0] * args[1]
    if op == "derivative":
        return args[0].derivative()
    if op == "involution":
        return args[0].involution()
    if op == "div_by_v":
        return args[0].div_by_v()
    raise ValueError(f"unknown op {op!r}")


# ---------------------------------------------------------------- generic root ring

class RootRing:
    """The ring K[X]/(P) for squarefree monic P: arithmetic at a generic root of P.

    An identity that holds in this ring holds at every root simultaneously, and
    the sum of an element over all roots is its trace.
    """

    def __init__(self, P: Poly):
        if not P.exact:
            raise FieldError("RootRing needs exact coefficients")
        self.P = P.monic()
        self.deg = self.P.degree

    def elem(self, p) -> "RootElem":
        if not isinstance(p, Poly):
            p = Poly([p], exact=True)
        return RootElem(p % self.P if p.degree >= self.deg else p, self)

    @property
    def X(self) -> "RootElem":
        return self.elem(Poly([0, 1], exact=True))

    def power_sums(self, upto: int) -> list:
        """p_k = sum of roots^k for k = 0..upto (Newton identities)."""
        c = self.P.coeffs  # monic, ascending
        d = self.deg
        e = [QQ_I.one] + [c[d - k] * (-1) ** k for k in range(1, d + 1)]
        p = [QQ_I(d, 0)]
        for k in range(1, upto + 1):
            acc = QQ_I.zero
            for i in range(1, min(k - 1, d) + 1):
                term = e[i] * p[k - i]
                acc = acc + term if i % 2 else acc - term
            if k <= d:
                term = e[k] * k
                acc = acc + term if k % 2 else acc - term
            p.append(acc)
        return p

    def roots(self) -> np.ndarray:
        return self.P.roots()


class RootElem:
    __slots__ = ("poly", "ring")

    def __init__(self, poly: Poly, ring: RootRing):
        self.poly = poly
        self.ring = ring

    def _c(self, other) -> "RootElem":
        if isinstance(other, RootElem):
            return other
        return self.ring.elem(Poly([other], exact=True))

    def __add__(self, other):
        return RootElem(self.poly + self._c(other).poly, self.ring)

    __radd__ = __add__

    def __neg__(self):
        return RootElem(-self.poly, self.ring)

    def __sub__(self, other):
        return RootElem(self.poly - self._c(other).poly, self.ring)

    def __rsub__(self, other):
        return self._c(other) - self

    def __mul__(self, other):
        if isinstance(other, RootElem):
            return self.ring.elem(self.poly * other.poly)
        return RootElem(self.poly.scale(other), self.ring)

    __rmul__ = __mul__

    def inverse(self) -> "RootElem":
        if self.poly.is_zero():
            raise FieldError("division by zero in the root ring")
        s, _, h = _et.dup_gcdex(self.poly._dup(), self.ring.P._dup(), QQ_I)
        h = Poly._from_dup(h)
        if h.degree != 0:
            raise FieldError("element shares a factor with the modulus; not invertible")
        return RootElem(Poly._from_dup(s).scale(1 / h.coeffs[0]), self.ring)

    def __truediv__(self, other):
        if isinstance(other, RootElem):
            return self * other.inverse()
        return RootElem(self.poly.scale(1 / exact_coeff(other)), self.ring)

    def __rtruediv__(self, other):
        return self._c(other) * self.inverse()

    def __pow__(self, k: int):
        out = self.ring.elem(Poly([1], exact=True))
        for _ in range(k):
            out = out * self
        return out

    def __bool__(self) -> bool:
        return not self.poly.is_zero()

    @property
    def is_zero(self) -> bool:
        return self.poly.is_zero()

    def __eq__(self, other) -> bool:
        return (self - self._c(other)).poly.is_zero()

    __hash__ = None

    def trace(self):
        ps = self.ring.power_sums(self.ring.deg)
        acc = QQ_I.zero
        for k, c in enumerate(self.poly.coeffs):
            acc = acc + c * ps[k]
        return acc

    def at_roots(self) -> np.ndarray:
        return self.poly(self.ring.roots())

    def to_complex(self):
        raise TypeError("a generic root element has no single complex value; use at_roots()")

    def __repr__(self) -> str:
        return f"RootElem({self.poly})"


# ---------------------------------------------------------------- local series

CHARTS = ("linear", "t", "hat", "zeta")


class LaurentSeries:
    """sum_{k=min_exp}^{order-1} c_k w^k + O(w^order) in a chart variable w.

    ``prefactor`` is an integer m meaning the series is multiplied by c^m where
    c^2 = ``prefactor_sq`` (used to keep exact expansions at turning points in the
    root ring even though sqrt(P'(x_i)) is not in it).
    """

    __slots__ = ("center", "kind", "coeffs", "min_exp", "order", "prefactor", "prefactor_sq")

    def __init__(self, coeffs: Sequence, min_exp: int, order: int, center=None, kind: str = "linear",
                 prefactor: int = 0, prefactor_sq=None):
        if kind not in CHARTS:
            raise ValueError(f"unknown chart kind {kind!r}")
        cs = list(coeffs)[: max(order - min_exp, 0)]
        self.coeffs = tuple(cs)
        self.min_exp = int(min_exp)
        self.order = int(order)
        self.center = center
        self.kind = kind
        self.prefactor = prefactor
        self.prefactor_sq = prefactor_sq
        if prefactor not in (0, 1):
            self._reduce_prefactor()

    def _reduce_prefactor(self):
        m = self.prefactor
        k = (m - (m % 2)) // 2
        if k:
            fac = self.prefactor_sq ** k if k > 0 else (1 / self.prefactor_sq) ** (-k)
            self.coeffs = tuple(c * fac for c in self.coeffs)
        self.prefactor = m % 2

    def _like(self, coeffs, min_exp, order, prefactor=None) -> "LaurentSeries":
        return LaurentSeries(coeffs, min_exp, order, self.center, self.kind,
                             self.prefactor if prefactor is None else prefactor, self.prefactor_sq)

    def coefficient(self, k: int):
        if k >= self.order:
            raise SeriesBudgetError(f"coefficient {k} requested beyond truncation order {self.order}")
        idx = k - self.min_exp
        if idx < 0 or idx >= len(self.coeffs):
            return 0
        return self.coeffs[idx]

    def __getitem__(self, k: int):
        return self.coefficient(k)

    def valuation(self) -> int:
        for i, c in enumerate(self.coeffs):
            if not is_zero(c):
                return self.min_exp + i
        return self.order

    def stripped(self) -> "LaurentSeries":
        v = self.valuation()
        if v >= self.order:
            return self._like([], self.order, self.order)
        return self._like(self.coeffs[v - self.min_exp:], v, self.order)

    def _scalar(self, c) -> "LaurentSeries":
        return self._like([c], 0, INF_ORDER, prefactor=0)

    def _coerce(self, other) -> "LaurentSeries":
        if isinstance(other, LaurentSeries):
            return other
        return self._scalar(other)

    def __add__(self, other) -> "LaurentSeries":
        other = self._coerce(other)
        if self.prefactor != other.prefactor:
            if all(is_zero(c) for c in other.coeffs):
                other = other._like(other.coeffs, other.min_exp, other.order, prefactor=self.prefactor)
            elif all(is_zero(c) for c in self.coeffs):
                return other + self._like(self.coeffs, self.min_exp, self.order, prefactor=other.prefactor)
            else:
                raise FieldError("cannot add series with different sqrt prefactor parity")
        lo = min(self.min_exp, other.min_exp)
        hi = min(self.order, other.order)
        top = min(hi, max(self.min_exp + len(self.coeffs), other.min_exp + len(other.coeffs)))
        cs = [self.coefficient(k) + other.coefficient(k) for k in range(lo, top)]
        return self._like(cs, lo, hi)

    __radd__ = __add__

    def __neg__(self) -> "LaurentSeries":
        return self._like([-c for c in self.coeffs], self.min_exp, self.order)

    def __sub__(self, other) -> "LaurentSeries":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "LaurentSeries":
        return (-self) + other

    def __mul__(self, other) -> "LaurentSeries":
        if not isinstance(other, LaurentSeries):
            return self._like([c * other for c in self.coeffs], self.min_exp, self.order)
        a, b = self.stripped(), other.stripped()
        lo = a.min_exp + b.min_exp
        hi = min(a.order + b.min_exp, b.order + a.min_exp)
        n = max(min(hi - lo, len(a.coeffs) + len(b.coeffs) - 1), 0)
        cs = []
        for k in range(n):
            acc = 0
            for i in range(k + 1):
                if i < len(a.coeffs) and k - i < len(b.coeffs):
                    acc = acc + a.coeffs[i] * b.coeffs[k - i]
            cs.append(acc)
        return LaurentSeries(cs, lo, hi, self.center, self.kind, self.prefactor + other.prefactor,
                             self.prefactor_sq if self.prefactor_sq is not None else other.prefactor_sq)

    __rmul__ = __mul__

    def inverse(self) -> "LaurentSeries":
        a = self.stripped()
        v = a.min_exp
        if v >= a.order:
            raise SeriesBudgetError("cannot invert a series with no known nonzero coefficient")
        n = a.order - v
        if n >= INF_ORDER // 2:
            if len(a.coeffs) != 1:
                raise SeriesBudgetError("inverse of an untruncated polynomial needs an explicit order")
            n = 1
        c0 = a.coeffs[0]
        inv0 = 1 / c0
        out = [inv0]
        for k in range(1, n):
            acc = 0
            for i in range(1, min(k, len(a.coeffs) - 1) + 1):
                acc = acc + a.coeffs[i] * out[k - i]
            out.append(-acc * inv0)
        return LaurentSeries(out, -v, -v + n, self.center, self.kind, -self.prefactor, self.prefactor_sq)

    def __truediv__(self, other) -> "LaurentSeries":
        if isinstance(other, LaurentSeries):
            return self * other.inverse()
        return self * (1 / other)

    def __rtruediv__(self, other) -> "LaurentSeries":
        return self.inverse() * other

    def __pow__(self, k: int) -> "LaurentSeries":
        if k < 0:
            return self.inverse() ** (-k)
        out = self._like([1], 0, INF_ORDER, prefactor=0)
        for _ in range(k):
            out = out * self
        return out

    def shift(self, k: int) -> "LaurentSeries":
        """Multiply by w^k."""
        return self._like(self.coeffs, self.min_exp + k, self.order + k)

    def derivative(self) -> "LaurentSeries":
        cs = [c * (self.min_exp + i) for i, c in enumerate(self.coeffs)]
        return self._like(cs, self.min_exp - 1, self.order - 1)

    def integral(self) -> "LaurentSeries":
        """Antiderivative with zero constant; fails if a w^-1 term is present."""
        cs = []
        for i, c in enumerate(self.coeffs):
            k = self.min_exp + i
            if k == -1:
                if not is_zero(c):
                    raise FieldError("series has a residue; its antiderivative has a logarithm")
                cs.append(0)
                continue
            cs.append(c / (k + 1) if not isinstance(c, GaussianElement) else c / QQ_I(k + 1, 0))
        lo = self.min_exp + 1
        if self.min_exp <= -1 <= self.order - 1:
            pass
        return self._like(cs, lo, self.order + 1)

    def residue(self):
        return self.coefficient(-1)

    def compose(self, inner: "LaurentSeries") -> "LaurentSeries":
        """self(inner(w)) for inner = O(w) with nonzero linear term."""
        g = inner.stripped()
        if g.min_exp != 1:
            raise FieldError("inner series must have valuation exactly 1")
        s = self.stripped()
        total = None
        cap = s.order  # valuation one: unknown terms of self start at w^order
        for i, c in enumerate(s.coeffs):
            k = s.min_exp + i
            if is_zero(c):
                continue
            term = (g ** k) * c if k >= 0 else (g.inverse() ** (-k)) * c
            total = term if total is None else total + term
        if total is None:
            return LaurentSeries([], cap, cap, inner.center, inner.kind, self.prefactor, self.prefactor_sq)
        out = LaurentSeries(total.coeffs, total.min_exp, min(total.order, cap), inner.center, inner.kind,
                            self.prefactor, self.prefactor_sq)
        return out

    def reverse(self) -> "LaurentSeries":
        """Compositional inverse of w -> self(w) = c1 w + c2 w^2 + ...."""
        g = self.stripped()
        if g.min_exp != 1:
            raise FieldError("reversion needs valuation exactly 1")
        n = g.order  # known through w^(order-1)
        c1 = g.coeffs[0]
        h = LaurentSeries([1 / c1], 1, n, self.center, self.kind)
        higher = LaurentSeries([0] + list(g.coeffs[1:]), 1, n, self.center, self.kind)
        ident = LaurentSeries([1], 1, n, self.center, self.kind)
        for _ in range(n):
            h = (ident - higher.compose(h)) * (1 / c1)
        return h

    def exp(self) -> "LaurentSeries":
        """exp of a series with zero constant term and no negative powers."""
        s = self.stripped()
        if s.min_exp < 1:
            raise FieldError("exp needs a series vanishing at the center")
        n = self.order
        out = self._like([1], 0, n, prefactor=0)
        term = self._like([1], 0, n, prefactor=0)
        for k in range(1, n + 1):
            term = term * s * (QQ_I(Fraction(1, k), 0) if _all_exact(s.coeffs) else 1.0 / k)
            out = out + term
        return out

    def sqrt1p(self, power: Fraction = Fraction(1, 2)) -> "LaurentSeries":
        """(1 + self)^power for self vanishing at the center, via the binomial series."""
        s = self.stripped()
        if s.min_exp < 1:
            raise FieldError("binomial series needs a series vanishing at the center")
        n = self.order
        out = self._like([1], 0, n, prefactor=0)
        term = self._like([1], 0, n, prefactor=0)
        exact = _all_exact(s.coeffs)
        for k in range(1, n + 1):
            b = (Fraction(power) - (k - 1)) / k
            term = term * s * (QQ_I(b, 0) if exact else float(b))
            out = out + term
        return out

    def to_complex(self) -> "LaurentSeries":
        return self._like([to_complex(c) if not isinstance(c, RootElem) else c for c in self.coeffs],
                          self.min_exp, self.order)

    def __repr__(self) -> str:
        return f"LaurentSeries(kind={self.kind}, min_exp={self.min_exp}, order={self.order}, coeffs={list(self.coeffs)})"


def _all_exact(cs) -> bool:
    return all(isinstance(c, (int, Fraction, GaussianElement, RootElem)) for c in cs)


# ---------------------------------------------------------------- charts

class TurningPoint:
    """A simple zero of the numerator P of Q.

    ``value`` is a complex root (float mode) or ``None`` for the generic root of P
    handled in the exact root ring.
    """

    def __init__(self, P: Poly, value=None):
        self.P = P
        self.value = value


class Puncture:
    """A double pole z of Q with chosen residue r of v on sheet +1."""

    def __init__(self, z, r):
        self.z = z
        self.r = r


def _poly_taylor(p: Poly, a, count: int, ring: RootRing | None = None) -> list:
    if ring is not None:
        cs = [ring.elem(Poly([c], exact=True)) for c in p.coeffs]
        return shift_coefficients(cs, a, count)
    if p.exact and _is_exact_value(a):
        sh = p.taylor_shift(a).coeffs
        return list(sh[:count]) + [QQ_I.zero] * max(0, count - len(sh))
    cs = shift_coefficients(list(p.to_float().coeffs), to_complex(a), count)
    return cs + [0j] * max(0, count - len(cs))


def _rat_series(f: RatFunc, center, order: int, ring: RootRing | None = None,
                kind: str = "linear") -> LaurentSeries:
    """Series of a rational function in u = x - center (regular point or pole)."""
    budget = order + 4
    num = LaurentSeries(_snap(_poly_taylor(f.num, center, budget, ring), f.num), 0, budget, center, kind)
    val = num
    for fac, e in f.factors:
        cs = _snap(_poly_taylor(fac, center, budget + fac.degree, ring), fac)
        inv = LaurentSeries(cs, 0, budget + fac.degree, center, kind).inverse()
        for _ in range(e):
            val = val * inv
    return val


def _snap(cs: list, p: Poly) -> list:
    """In float mode a center within roundoff of a root of p is treated as the root."""
    if not cs or isinstance(cs[0], (GaussianElement, RootElem)):
        return cs
    scale = float(np.sum(np.abs(p.to_float().coeffs))) or 1.0
    if abs(cs[0]) < 1e-11 * scale:
        cs = [0j] + list(cs[1:])
    return cs


def _sqrt_series(Qs: LaurentSeries, lead_root) -> LaurentSeries:
    """Square root of a series with even valuation, given sqrt of its leading coefficient."""
    s = Qs.stripped()
    v = s.min_exp
    if v % 2:
        raise FieldError("odd valuation: not a square")
    c0 = s.coeffs[0]
    rc = [c * (1 / c0) for c in s.coeffs]
    rc[0] = 0
    rest = LaurentSeries(rc, 0, s.order - v, s.center, s.kind)
    root = rest.sqrt1p() if rest.stripped().min_exp < rest.order else LaurentSeries([1], 0, rest.order, s.center, s.kind)
    return (root * lead_root).shift(v // 2)


def local_series(elem: QextElem, center, sheet: int = 1, kind: str = "linear", order: int = 8,
                 branch_value=None, max_order: int = 64) -> LaurentSeries:
    """Local expansion of the differential elem*dx.

    center:
      * a complex/exact number for the linear chart at a regular point (then
        ``branch_value`` gives y(center); default sheet*principal sqrt);
      * a ``Puncture`` for linear or zeta charts at z^(1) (sheet=+1) or z^(2);
      * a ``TurningPoint`` for the t chart (x = x_i + t^2) or the hat chart
        (the distinguished coordinate with int_{x_i} v = hat^3, float only).

    The returned series is the coefficient of d(chart variable), Jacobian included.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if order > max_order:
        raise SeriesBudgetError(f"order {order} exceeds series budget {max_order}")
    ext = elem.ext
    Q = ext.Q
    if isinstance(center, TurningPoint):
        return _turning_series(elem, center, sheet, kind, order)
    if isinstance(center, Puncture):
        return _puncture_series(elem, center, sheet, kind, order)
    if kind != "linear":
        raise ValueError("a plain point only supports the linear chart")
    budget = order + 2
    even = _rat_series(elem.even, center, budget)
    if elem.odd.is_zero():
        return _trim(even, order)
    Qs = _rat_series(Q, center, budget)
    if branch_value is None:
        c0 = Qs.coefficient(0)
        if is_zero(c0):
            raise FieldError("center is a zero of Q; use a TurningPoint")
        branch_value = sheet * np.sqrt(to_complex(c0))
    y = _sqrt_series(Qs, branch_value)
    out = even + _rat_series(elem.odd, center, budget) * y
    return _trim(out, order)


def _trim(s: LaurentSeries, order: int) -> LaurentSeries:
    hi = min(s.order, order)
    return LaurentSeries(s.coeffs[: max(hi - s.min_exp, 0)], s.min_exp, hi, s.center, s.kind, s.prefactor,
                         s.prefactor_sq)


def _puncture_series(elem: QextElem, pt: Puncture, sheet: int, kind: str, order: int) -> LaurentSeries:
    ext = elem.ext
    z, r = pt.z, pt.r
    budget = order + 8
    exact = ext.exact and _is_exact_value(z) and _is_exact_value(r)
    if exact:
        z, r = exact_coeff(z), exact_coeff(r)
    # (x - z)^2 Q is regular with value r^2 at z; y = sheet * r/(x-z) * sqrt(h), h(z) = 1
    u2Q = _rat_series(ext.Q if exact else ext.Q.to_float(), z, budget + 2).shift(2)
    c0 = u2Q.coefficient(0)
    hc = [c * (1 / c0) for c in u2Q.coeffs]
    hc[0] = 0  # exactly; float division leaves rounding noise
    h = LaurentSeries(hc, 0, u2Q.order, z, "linear")
    sq = h.sqrt1p() if h.stripped().min_exp < h.order else LaurentSeries([1], 0, h.order, z, "linear")
    rr = r if exact else to_complex(r)
    y = sq.shift(-1) * (rr * (sheet if not exact else QQ_I(sheet, 0)))
    even = _rat_series(elem.even if exact else elem.even.to_float(), z, budget)
    ser = even
    if not elem.odd.is_zero():
        ser = even + _rat_series(elem.odd if exact else elem.odd.to_float(), z, budget) * y
    if kind == "linear":
        return _trim(ser, order)
    if kind != "zeta":
        raise ValueError("punctures support the linear and zeta charts")
    # zeta = u exp(H(u)) with v = sheet * r dzeta/zeta;  H' = sqrt(h)/u - 1/u
    Hp = (sq - 1)
    Hp = Hp.shift(-1) if Hp.stripped().min_exp >= 1 else Hp
    H = Hp.integral()
    zeta_of_u = H.exp().shift(1)
    u_of_zeta = _trim(zeta_of_u, budget).reverse()
    du = u_of_zeta.derivative()
    comp = ser.compose(u_of_zeta) * du
    out = LaurentSeries(comp.coeffs, comp.min_exp, comp.order, pt, "zeta")
    return _trim(out, order)


def _turning_series(elem: QextElem, tp: TurningPoint, sheet: int, kind: str, order: int) -> LaurentSeries:
    ext = elem.ext
    P = None
    # P is the numerator of Q up to its leading constant
    Q = ext.Q
    ring = None
    exact = tp.value is None
    if exact:
        if not ext.exact:
            raise FieldError("generic-root expansion needs exact coefficients")
        ring = RootRing(tp.P)
        center = ring.X
    else:
        center = tp.value
        Q = Q.to_float()
    budget = order + 8
    # Q(x_i + u) = u * Qt(u), Qt(0) = Q'(x_i)
    Qs = _rat_series(Q, center, budget + 2, ring)
    val = Qs.valuation()
    if val < 0:
        raise FieldError("center is a pole of Q")
    if val == 0:
        raise FieldError("center is not a root of Q's numerator")
    Qt = LaurentSeries([Qs.coefficient(k) for k in range(1, Qs.order)], 0, Qs.order - 1, center, "t")
    c0 = Qt.coefficient(0)
    if is_zero(c0) or (not exact and abs(c0) < 1e-300):
        raise FieldError("center is a multiple zero of Q")
    rc = [c * (1 / c0) for c in Qt.coeffs]
    rc[0] = 0
    rest = LaurentSeries(rc, 0, Qt.order, center, "t")
    root = rest.sqrt1p() if rest.stripped().min_exp < rest.order else LaurentSeries([1], 0, rest.order, center, "t")

    def in_t(s: LaurentSeries) -> LaurentSeries:
        cs = []
        for c in s.coeffs:
            cs.extend([c, 0])
        return LaurentSeries(cs[:-1], 2 * s.min_exp, 2 * s.order - 1, center, "t")

    # y = sheet * c * t * sqrt(rest(t^2)), c = sqrt(Q'(x_i)); dx = 2 t dt
    if exact:
        y = in_t(root).shift(1) * QQ_I(sheet, 0)
        y = LaurentSeries(y.coeffs, y.min_exp, y.order, center, "t", 1, c0)
    else:
        y = in_t(root).shift(1) * (sheet * np.sqrt(complex(c0)))
    two_t = LaurentSeries([2 if not exact else QQ_I(2, 0)], 1, INF_ORDER, center, "t")
    even = elem.even if exact else elem.even.to_float()
    odd = elem.odd if exact else elem.odd.to_float()
    parts = []
    if not even.is_zero():
        parts.append(in_t(_rat_series(even, center, budget, ring)) * two_t)
    if not odd.is_zero():
        parts.append(in_t(_rat_series(odd, center, budget, ring)) * y * two_t)
    if not parts:
        ser = LaurentSeries([], 2 * order, 2 * order, center, "t")
    else:
        ser = parts[0]
        for p in parts[1:]:
            ser = ser + p
    if kind == "t":
        out = LaurentSeries(ser.coeffs, ser.min_exp, ser.order, tp, "t", ser.prefactor, ser.prefactor_sq)
        return _trim(out, order)
    if kind != "hat":
        raise ValueError("turning points support the t and hat charts")
    if exact:
        raise FieldError("the hat chart needs a cube root of sqrt(P'(x_i)); use float mode")
    # int_{x_i} v = hat^3;  in t: int v = F(t) = a3 t^3 (1 + ...)
    v_t = y * two_t
    F = v_t.integral().stripped()
    a3 = F.coefficient(3)
    gc = [c / a3 for c in F.coeffs]
    gc[0] = 0
    g = LaurentSeries(gc, 0, F.order - 3, center, "t")
    cube = (g.sqrt1p(Fraction(1, 3)) if g.stripped().min_exp < g.order else LaurentSeries([1], 0, g.order, center, "t"))
    hat_of_t = cube.shift(1) * (a3 ** (1.0 / 3.0))
    t_of_hat = _trim(hat_of_t, budget).reverse()
    comp = ser.compose(t_of_hat) * t_of_hat.derivative()
    out = LaurentSeries(comp.coeffs, comp.min_exp, comp.order, tp, "hat")
    return _trim(out, order)


def residue_at(elem: QextElem, point, sheet: int = 1, order: int = 12):
    """Residue of the differential elem*dx at a point of the cover.

    Turning points are handled in the t chart (exact at the generic root when
    ``point.value`` is None, returning a RootElem times the sqrt prefactor parity).
    """
    if isinstance(point, TurningPoint):
        s = local_series(elem, point, sheet, "t", order=order)
        return s.residue()
    s = local_series(elem, point, sheet, "linear", order=order)
    return s.residue()
