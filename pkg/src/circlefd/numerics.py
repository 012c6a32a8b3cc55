"""Adaptive-precision real and circle arithmetic.

Every real quantity is an enclosure [lo, hi] with exact rational endpoints.
Values derived from a refinable source (e.g. an irrational rotation number
known through its continued fraction) carry a refiner closure; refinement
recomputes the enclosure at higher precision and intersects, so it never
widens.  Comparisons are resolved through `decide`, which walks a precision
ladder and reports `undecided` rather than guessing.
"""
from __future__ import annotations

import enum
from fractions import Fraction
from typing import Callable, Optional, Union

import gmpy2

Rational = Union[int, Fraction]

#: Default precision ladder, in bits of enclosure width (2^-bits).
PRECISION_LADDER = (64, 128, 256, 512)

HALF = Fraction(1, 2)


def _floor(x: Fraction) -> int:
    return x.numerator // x.denominator


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def unit_dist(x: Fraction) -> Fraction:
    """Exact distance from a rational to the nearest integer."""
    fr = x - _floor(x)
    return min(fr, 1 - fr)


class Ordering(enum.Enum):
    LESS = "less"
    GREATER = "greater"
    UNDECIDED = "undecided"


class PrecisionReal:
    """Enclosure [lo, hi] of a real number, with optional refinement.

    `refiner(bits)` must return a fresh enclosure of the same number whose
    width is (eventually) at most 2^-bits; `refine` intersects it with the
    current bounds.  Instances are immutable.
    """

    __slots__ = ("lo", "hi", "refine_hint", "_refiner")

    def __init__(self, lo: Rational, hi: Rational, refine_hint: str = "",
                 refiner: Optional[Callable[[int], "PrecisionReal"]] = None):
        lo = Fraction(lo)
        hi = Fraction(hi)
        if lo > hi:
            raise ValueError(f"invalid enclosure: lo={lo} > hi={hi}")
        self.lo = lo
        self.hi = hi
        self.refine_hint = refine_hint
        self._refiner = refiner

    # -- basic queries -------------------------------------------------

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def is_exact(self) -> bool:
        return self.lo == self.hi

    def contains(self, x: Rational) -> bool:
        return self.lo <= Fraction(x) <= self.hi

    def encloses(self, other: "PrecisionReal") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def __float__(self) -> float:
        return float(self.mid)

    def __repr__(self) -> str:
        return f"PrecisionReal({float(self.lo)!r}, {float(self.hi)!r}, width={float(self.width):.3g})"

    # -- refinement ----------------------------------------------------

    def refine(self, bits: int) -> "PrecisionReal":
        """Narrow to ~2^-bits if a refiner is available; never widens."""
        if self._refiner is None or self.width <= Fraction(1, 1 << bits):
            return self
        fresh = self._refiner(bits)
        lo = max(self.lo, fresh.lo)
        hi = min(self.hi, fresh.hi)
        if lo > hi:
            raise AssertionError(
                f"refiner produced a disjoint enclosure for {self.refine_hint!r}")
        return PrecisionReal(lo, hi, self.refine_hint, self._refiner)

    # -- arithmetic (interval, outward-exact) ---------------------------

    @staticmethod
    def exact(x: Rational, hint: str = "") -> "PrecisionReal":
        x = Fraction(x)
        return PrecisionReal(x, x, hint)

    def _binary(self, other, lo, hi, op_name):
        refiner = None
        a, b = self, other
        if a._refiner is not None or b._refiner is not None:
            def refiner(bits, _a=a, _b=b, _op=op_name):
                return _apply_op(_a.refine(bits), _b.refine(bits), _op)
        return PrecisionReal(lo, hi, self.refine_hint or other.refine_hint, refiner)

    def __add__(self, other) -> "PrecisionReal":
        other = _coerce(other)
        return self._binary(other, self.lo + other.lo, self.hi + other.hi, "add")

    __radd__ = __add__

    def __sub__(self, other) -> "PrecisionReal":
        other = _coerce(other)
        return self._binary(other, self.lo - other.hi, self.hi - other.lo, "sub")

    def __rsub__(self, other) -> "PrecisionReal":
        return _coerce(other) - self

    def __neg__(self) -> "PrecisionReal":
        refiner = None
        if self._refiner is not None:
            def refiner(bits, _a=self):
                return -_a.refine(bits)
        return PrecisionReal(-self.hi, -self.lo, self.refine_hint, refiner)

    def __mul__(self, other) -> "PrecisionReal":
        other = _coerce(other)
        products = (self.lo * other.lo, self.lo * other.hi,
                    self.hi * other.lo, self.hi * other.hi)
        return self._binary(other, min(products), max(products), "mul")

    __rmul__ = __mul__

    def __truediv__(self, other) -> "PrecisionReal":
        # division restricted to enclosures separated from zero
        other = _coerce(other)
        if other.lo > 0 or other.hi < 0:
            inv = PrecisionReal(1, 1)._binary(other, 1 / other.hi, 1 / other.lo, "inv")
            return self * inv
        raise ZeroDivisionError("divisor enclosure straddles zero")

    def __abs__(self) -> "PrecisionReal":
        if self.lo >= 0:
            lo, hi = self.lo, self.hi
        elif self.hi <= 0:
            lo, hi = -self.hi, -self.lo
        else:
            lo, hi = Fraction(0), max(-self.lo, self.hi)
        refiner = None
        if self._refiner is not None:
            def refiner(bits, _a=self):
                return abs(_a.refine(bits))
        return PrecisionReal(lo, hi, self.refine_hint, refiner)


def _coerce(x) -> PrecisionReal:
    if isinstance(x, PrecisionReal):
        return x
    return PrecisionReal.exact(x)


def _apply_op(a: PrecisionReal, b: PrecisionReal, op: str) -> PrecisionReal:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "inv":
        return PrecisionReal(1, 1) / b
    raise AssertionError(op)


def interval_min(a: PrecisionReal, b: PrecisionReal) -> PrecisionReal:
    return PrecisionReal(min(a.lo, b.lo), min(a.hi, b.hi))


def interval_max(a: PrecisionReal, b: PrecisionReal) -> PrecisionReal:
    return PrecisionReal(max(a.lo, b.lo), max(a.hi, b.hi))


# -- circle types -------------------------------------------------------


class CirclePoint:
    """A point of R/Z, held as an enclosure normalized so lo lands in [0, 1).

    If the enclosure straddles an integer, hi may reach past 1; circle
    distances are computed modulo 1 so the representative choice is harmless.
    """

    __slots__ = ("rep",)

    def __init__(self, rep: Union[PrecisionReal, Rational]):
        rep = _coerce(rep)
        if rep.width >= 1:
            raise ValueError("enclosure too wide to represent a circle point")
        shift = _floor(rep.lo)
        if shift:
            rep = rep - Fraction(shift)
        self.rep = rep

    def refine(self, bits: int) -> "CirclePoint":
        return CirclePoint(self.rep.refine(bits))

    def translate(self, t: Union[PrecisionReal, Rational]) -> "CirclePoint":
        return CirclePoint(self.rep + _coerce(t))

    def __repr__(self) -> str:
        return f"CirclePoint({float(self.rep)!r})"


class CircleArc:
    """Closed arc of R/Z: [left, left + length], with 0 <= length < 1."""

    __slots__ = ("left", "length")

    def __init__(self, left: CirclePoint, length: Union[PrecisionReal, Rational]):
        length = _coerce(length)
        if length.lo < 0:
            raise ValueError("arc length must be nonnegative")
        if length.hi >= 1:
            raise ValueError("arc length must stay below one")
        self.left = left
        self.length = length

    def __repr__(self) -> str:
        return f"CircleArc(left={self.left!r}, length={float(self.length)!r})"


# -- distances ----------------------------------------------------------


def dist_to_integers(x: PrecisionReal) -> PrecisionReal:
    """Enclosure of dist(x, Z); exact range analysis of the sawtooth."""
    lo, hi = x.lo, x.hi
    if hi - lo >= 1:
        rng = (Fraction(0), HALF)
    else:
        d_lo, d_hi = unit_dist(lo), unit_dist(hi)
        dmin = Fraction(0) if _ceil(lo) <= _floor(hi) else min(d_lo, d_hi)
        dmax = HALF if _ceil(lo - HALF) <= _floor(hi - HALF) else max(d_lo, d_hi)
        rng = (dmin, dmax)
    refiner = None
    if x._refiner is not None:
        def refiner(bits, _x=x):
            return dist_to_integers(_x.refine(bits))
    return PrecisionReal(rng[0], rng[1], x.refine_hint, refiner)


def circle_dist(a: CirclePoint, b: CirclePoint) -> PrecisionReal:
    """Enclosure of the circle metric min(|a-b|, 1-|a-b|); always <= 1/2."""
    return dist_to_integers(a.rep - b.rep)


def dist_to_grid(x: PrecisionReal, q: int) -> PrecisionReal:
    """Enclosure of dist(x, (1/q)Z) = dist(qx, Z)/q; always <= 1/(2q)."""
    if q < 1:
        raise ValueError("grid order q must be >= 1")
    return dist_to_integers(x * q) * Fraction(1, q)


# -- decisions ----------------------------------------------------------


def decide(a: PrecisionReal, b: PrecisionReal,
           ladder=PRECISION_LADDER) -> Ordering:
    """Strict comparison of two enclosures under a refinement budget.

    Returns LESS/GREATER only when the refined enclosures are disjoint, so a
    strict answer is always correct; UNDECIDED after the ladder is exhausted
    must be treated as a verification failure by callers, not a truth value.
    """
    for bits in ladder:
        if a.hi < b.lo:
            return Ordering.LESS
        if a.lo > b.hi:
            return Ordering.GREATER
        a = a.refine(bits)
        b = b.refine(bits)
    if a.hi < b.lo:
        return Ordering.LESS
    if a.lo > b.hi:
        return Ordering.GREATER
    return Ordering.UNDECIDED


def sign(x: PrecisionReal, ladder=PRECISION_LADDER) -> Ordering:
    """Sign of x: LESS means x < 0, GREATER means x > 0."""
    return decide(x, PrecisionReal.exact(0), ladder)


# -- certified transcendental enclosures --------------------------------


def _mpfr_to_fraction(x) -> Fraction:
    q = gmpy2.mpq(x)
    return Fraction(int(q.numerator), int(q.denominator))


def exp_enclosure(x: PrecisionReal, bits: int = 128) -> PrecisionReal:
    """Certified enclosure of exp(x) via directed-rounded mpfr arithmetic."""
    with gmpy2.context(precision=bits, round=gmpy2.RoundDown):
        lo = gmpy2.exp(gmpy2.mpfr(gmpy2.mpq(x.lo.numerator, x.lo.denominator)))
    with gmpy2.context(precision=bits, round=gmpy2.RoundUp):
        hi = gmpy2.exp(gmpy2.mpfr(gmpy2.mpq(x.hi.numerator, x.hi.denominator)))
    refiner = None
    if x._refiner is not None:
        def refiner(b, _x=x):
            return exp_enclosure(_x.refine(b), max(b, bits))
    out = PrecisionReal(_mpfr_to_fraction(lo), _mpfr_to_fraction(hi),
                        x.refine_hint, refiner)
    return out


def round_dyadic(x: Fraction, bits: int) -> Fraction:
    """Round to the nearest multiple of 2^-bits (ties toward +inf)."""
    scaled = x * (1 << bits)
    n = _floor(scaled + HALF)
    return Fraction(n, 1 << bits)
