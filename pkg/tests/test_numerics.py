import random
from fractions import Fraction

import pytest

from circlefd.numerics import (CircleArc, CirclePoint, Ordering,
                               PrecisionReal, circle_dist, decide,
                               dist_to_grid, dist_to_integers, exp_enclosure,
                               interval_max, interval_min, round_dyadic, sign,
                               unit_dist)

import oracles

SEED = 20260815


def rational_samples(count, denom_bits=20, span=4):
    rng = random.Random(SEED)
    out = []
    for _ in range(count):
        den = rng.randrange(1, 1 << denom_bits)
        num = rng.randrange(-span * den, span * den + 1)
        out.append(Fraction(num, den))
    return out


# -- PrecisionReal -------------------------------------------------------


def test_enclosure_validation():
    with pytest.raises(ValueError):
        PrecisionReal(1, 0)
    x = PrecisionReal.exact(Fraction(2, 7))
    assert x.is_exact() and x.width == 0 and x.mid == Fraction(2, 7)
    assert x.contains(Fraction(2, 7)) and not x.contains(Fraction(3, 7))
    assert PrecisionReal(0, 1).encloses(PrecisionReal(Fraction(1, 4), Fraction(1, 2)))


@pytest.mark.parametrize("op", ["add", "sub", "mul", "div"])
def test_interval_arithmetic_soundness(op):
    rng = random.Random(SEED + hash(op) % 1000)
    for _ in range(200):
        a_lo = Fraction(rng.randrange(-100, 100), rng.randrange(1, 50))
        b_lo = Fraction(rng.randrange(-100, 100), rng.randrange(1, 50))
        a = PrecisionReal(a_lo, a_lo + Fraction(rng.randrange(0, 20), 17))
        b = PrecisionReal(b_lo, b_lo + Fraction(rng.randrange(0, 20), 23))
        if op == "div" and (b.lo <= 0 <= b.hi):
            with pytest.raises(ZeroDivisionError):
                a / b
            continue
        res = {"add": lambda: a + b, "sub": lambda: a - b,
               "mul": lambda: a * b, "div": lambda: a / b}[op]()
        # every representative pair must land inside the result
        for u in (a.lo, a.mid, a.hi):
            for v in (b.lo, b.mid, b.hi):
                w = {"add": u + v, "sub": u - v, "mul": u * v,
                     "div": u / v if v else None}[op]
                assert res.lo <= w <= res.hi


def test_neg_abs_minmax():
    x = PrecisionReal(Fraction(-1, 3), Fraction(1, 5))
    assert (-x).lo == Fraction(-1, 5) and (-x).hi == Fraction(1, 3)
    assert abs(x).lo == 0 and abs(x).hi == Fraction(1, 3)
    y = PrecisionReal(Fraction(1, 7), Fraction(1, 2))
    assert abs(y).lo == y.lo
    assert interval_min(x, y).lo == x.lo and interval_max(x, y).hi == y.hi


def test_refine_narrows_and_never_widens():
    target = Fraction(1, 3)

    def refiner(bits):
        eps = Fraction(1, 1 << bits)
        return PrecisionReal(target - eps, target + eps)

    x = PrecisionReal(0, 1, "test", refiner)
    y = x.refine(100)
    assert y.contains(target) and y.width <= Fraction(1, 1 << 99)
    # a worse refiner must not widen the enclosure
    z = PrecisionReal(Fraction(1, 4), Fraction(1, 2), "test",
                      lambda bits: PrecisionReal(0, 1))
    w = z.refine(64)
    assert w.lo >= z.lo and w.hi <= z.hi

    bad = PrecisionReal(0, Fraction(1, 8), "test",
                        lambda bits: PrecisionReal(Fraction(1, 2), 1))
    with pytest.raises(AssertionError):
        bad.refine(64)


def test_refiner_propagates_through_arithmetic():
    target = Fraction(1, 3)

    def refiner(bits):
        eps = Fraction(1, 1 << bits)
        return PrecisionReal(target - eps, target + eps)

    x = PrecisionReal(0, 1, "test", refiner)
    y = (x * 3 + 1).refine(80)
    assert y.contains(2) and y.width <= Fraction(6, 1 << 79)


# -- distances ------------------------------------------------------------


@pytest.mark.parametrize("x,expect", [
    (Fraction(1, 4), Fraction(1, 4)),
    (Fraction(3, 4), Fraction(1, 4)),
    (Fraction(5), Fraction(0)),
    (Fraction(-7, 10), Fraction(3, 10)),
    (Fraction(13, 2), Fraction(1, 2)),
])
def test_unit_dist(x, expect):
    assert unit_dist(x) == expect


def test_dist_to_integers_ranges():
    d = dist_to_integers(PrecisionReal(Fraction(2, 10), Fraction(3, 10)))
    assert (d.lo, d.hi) == (Fraction(1, 5), Fraction(3, 10))
    d = dist_to_integers(PrecisionReal(Fraction(-1, 10), Fraction(2, 10)))
    assert (d.lo, d.hi) == (0, Fraction(1, 5))
    d = dist_to_integers(PrecisionReal(Fraction(4, 10), Fraction(6, 10)))
    assert (d.lo, d.hi) == (Fraction(2, 5), Fraction(1, 2))
    d = dist_to_integers(PrecisionReal(0, 2))
    assert (d.lo, d.hi) == (0, Fraction(1, 2))


def test_dist_to_integers_soundness():
    for x in rational_samples(300):
        w = Fraction(1, 97)
        enc = dist_to_integers(PrecisionReal(x, x + w))
        for u in (x, x + w / 2, x + w):
            assert enc.lo <= unit_dist(u) <= enc.hi


def test_circle_and_grid_dist():
    a = CirclePoint(PrecisionReal.exact(Fraction(1, 10)))
    b = CirclePoint(PrecisionReal.exact(Fraction(9, 10)))
    d = circle_dist(a, b)
    assert d.lo == d.hi == Fraction(1, 5)
    g = dist_to_grid(PrecisionReal.exact(Fraction(11, 100)), 5)
    assert g.lo == g.hi == Fraction(9, 100)
    with pytest.raises(ValueError):
        dist_to_grid(PrecisionReal.exact(0), 0)


# -- circle types ----------------------------------------------------------


def test_circle_point_normalization():
    assert CirclePoint(Fraction(5, 4)).rep.lo == Fraction(1, 4)
    assert CirclePoint(Fraction(-1, 4)).rep.lo == Fraction(3, 4)
    assert CirclePoint(Fraction(7)).rep.lo == 0
    with pytest.raises(ValueError):
        CirclePoint(PrecisionReal(0, 1))
    p = CirclePoint(Fraction(9, 10)).translate(Fraction(2, 10))
    assert p.rep.lo == Fraction(1, 10)


def test_circle_arc_validation():
    left = CirclePoint(Fraction(0))
    CircleArc(left, Fraction(1, 2))
    with pytest.raises(ValueError):
        CircleArc(left, Fraction(-1, 10))
    with pytest.raises(ValueError):
        CircleArc(left, Fraction(1))


# -- decisions -------------------------------------------------------------


def test_decide_and_sign():
    a = PrecisionReal.exact(Fraction(1, 3))
    b = PrecisionReal.exact(Fraction(1, 2))
    assert decide(a, b) is Ordering.LESS
    assert decide(b, a) is Ordering.GREATER
    assert decide(a, a) is Ordering.UNDECIDED
    assert sign(PrecisionReal.exact(Fraction(-1, 9))) is Ordering.LESS
    assert sign(PrecisionReal.exact(Fraction(1, 9))) is Ordering.GREATER

    target = Fraction(1, 3)

    def refiner(bits):
        eps = Fraction(1, 1 << bits)
        return PrecisionReal(target - eps, target + eps)

    fuzzy = PrecisionReal(0, 1, "t", refiner)
    assert decide(fuzzy, PrecisionReal.exact(Fraction(1, 3) + Fraction(1, 10 ** 30))) is Ordering.LESS
    assert decide(fuzzy, PrecisionReal.exact(target)) is Ordering.UNDECIDED


# -- transcendental enclosures ---------------------------------------------


@pytest.mark.parametrize("x", [Fraction(0), Fraction(1), Fraction(-1),
                               Fraction(-3, 4), Fraction(-70),
                               Fraction(7, 3), Fraction(-2531, 1000)])
@pytest.mark.parametrize("bits", [64, 128, 192])
def test_exp_enclosure_contains_truth(x, bits):
    enc = exp_enclosure(PrecisionReal.exact(x), bits)
    truth = oracles.to_fraction(oracles.exp_value(x, 80), 60)
    slop = truth * Fraction(1, 10 ** 50)  # oracle decimal-truncation error
    assert enc.lo - slop <= truth <= enc.hi + slop
    assert enc.width <= enc.hi * Fraction(1, 1 << (bits - 3))


def test_exp_enclosure_interval_argument():
    enc = exp_enclosure(PrecisionReal(Fraction(-1), Fraction(1)), 96)
    e_lo = oracles.to_fraction(oracles.exp_value(Fraction(-1), 60), 40)
    e_hi = oracles.to_fraction(oracles.exp_value(Fraction(1), 60), 40)
    assert enc.lo <= e_lo and enc.hi >= e_hi
    assert exp_enclosure(PrecisionReal.exact(0), 64).contains(1)


def test_round_dyadic():
    for x in rational_samples(200):
        for bits in (8, 40, 96):
            r = round_dyadic(x, bits)
            assert abs(r - x) <= Fraction(1, 1 << (bits + 1))
            assert (1 << bits) % r.denominator == 0
    assert round_dyadic(Fraction(3, 8), 2) == Fraction(1, 2)  # tie toward +inf
