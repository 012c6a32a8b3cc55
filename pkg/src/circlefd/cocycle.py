"""The cocycle phi = sum of level bumps, its Birkhoff sums, and the
summability constant M.

Level n places a tent bump of height (3/4)^n on an epsilon_n-neighbourhood
of the depth-d(n) cover of C and copies it to the translates R^i of that
neighbourhood for i = -2^n ... 2^n - 1, with sign -1 on i >= 0 and +1 on
i < 0.  The depth d(n) and epsilon_n are chosen so those 2^{n+1} translated
neighbourhoods are certifiably pairwise disjoint.

Birkhoff sums follow phi^{(0)} = 0, phi^{(m)} = sum_{i=0}^{m-1} phi(R^i x)
for m > 0 and phi^{(m)} = -sum_{i=1}^{|m|} phi(R^{-i} x) for m < 0.  On C the
omitted levels n > n_max contribute nonpositively to phi^{(m)} whenever
|m| <= 2^{n_max+1}, which allows one-sided (upper-exact) enclosures there.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .cantor import DigitSequence, _min_difference_dist
from .errors import BudgetExceeded, DisjointnessUndecided, NotCertifiable
from .numerics import (CirclePoint, PrecisionReal, circle_dist,
                       dist_to_integers, exp_enclosure)

#: bits at which alpha is frozen for orbit translations inside the stack
_ALPHA_BITS = 256
#: bits for the dyadic rounding of epsilon_n and arc lengths
_GEOM_BITS = 128


def _round_down_dyadic(x: Fraction, bits: int) -> Fraction:
    return Fraction(x.numerator * (1 << bits) // x.denominator, 1 << bits)


def _round_up_dyadic(x: Fraction, bits: int) -> Fraction:
    return Fraction(-((-x.numerator * (1 << bits)) // x.denominator), 1 << bits)


def choose_epsilon(n: int, seq: DigitSequence,
                   d_max: int = 24) -> Tuple[int, Fraction]:
    """Minimal cover depth and ramp width for level n.

    Searches for the smallest depth d at which every pair among the
    translates R^i cover(d), |i| <= 2^n, keeps a certified positive gap, and
    returns (d, gap/3) with the gap rounded down to a dyadic.  The factor 3
    leaves the epsilon-fattened neighbourhoods disjoint with gap/3 to spare.
    """
    if n < 1:
        raise ValueError("level index must be >= 1")
    deepest = min(d_max, seq.depth)
    for d in range(1, deepest + 1):
        arc_len = _round_up_dyadic(seq.tail(d).hi, _GEOM_BITS)
        gap_lo: Optional[Fraction] = None
        separated = True
        for k in range(1, (1 << (n + 1)) + 1):
            m_dist, _ = _min_difference_dist(seq, k, d, 192)
            g = m_dist.lo - arc_len
            if g <= 0:
                separated = False
                break
            gap_lo = g if gap_lo is None else min(gap_lo, g)
        if separated and gap_lo is not None:
            eps = _round_down_dyadic(gap_lo / 3, _GEOM_BITS)
            if eps <= 0:
                raise NotCertifiable(
                    f"certified gap at level {n} too small to carry a ramp",
                    level=n, depth=d)
            return d, eps
    raise DisjointnessUndecided(0, 1 << n, deepest)


@dataclass(frozen=True)
class BumpLevel:
    """Level-n bump: tent of height (3/4)^n over the depth-d(n) cover."""

    n: int
    amplitude: Fraction
    cover_depth: int
    epsilon: Fraction
    translate_range: int           # 2^n
    arc_length: Fraction           # dyadic upper round of tail(d(n))
    centers: Tuple[Fraction, ...]  # arc midpoints, exact
    gap: Fraction                  # certified min gap between fattened arcs

    @property
    def radius(self) -> Fraction:
        return self.arc_length / 2


#: absolute slack granted to the float prefilter in `bump_value`.  The filter
#: sees at most a few hundred IEEE operations on values in [0, 70], each
#: contributing < 2^-45 absolute error, so 2^-30 dominates the true error by
#: a factor of a thousand; it is still tiny against every epsilon in use.
_PREFILTER_MARGIN = 1.0 / (1 << 30)
_PREFILTER_MAX_WIDTH = Fraction(1, 1 << 40)


def build_level(n: int, seq: DigitSequence, d_max: int = 24) -> BumpLevel:
    from .cantor import cover  # local import to avoid a cycle at module load

    d, eps = choose_epsilon(n, seq, d_max)
    arc_len = _round_up_dyadic(seq.tail(d).hi, _GEOM_BITS)
    cov = cover(seq, d)
    centers = tuple(L + arc_len / 2 for L in cov.left_endpoints())
    return BumpLevel(n, Fraction(3, 4) ** n, d, eps, 1 << n, arc_len,
                     centers, 3 * eps)


def _dist_to_cover(level: BumpLevel, y: CirclePoint) -> PrecisionReal:
    """Circle distance from y to the union of level arcs.

    Each arc is the metric ball of radius arc_length/2 around its center, so
    dist(y, arc) = max(0, circle_dist(y, center) - radius).
    """
    r = level.radius
    best_lo: Optional[Fraction] = None
    best_hi: Optional[Fraction] = None
    for c in level.centers:
        d = circle_dist(y, CirclePoint(PrecisionReal.exact(c)))
        best_lo = d.lo if best_lo is None else min(best_lo, d.lo)
        best_hi = d.hi if best_hi is None else min(best_hi, d.hi)
    assert best_lo is not None and best_hi is not None
    return PrecisionReal(max(best_lo - r, 0), max(best_hi - r, 0))


def _tent(level: BumpLevel, dist: PrecisionReal) -> PrecisionReal:
    """amplitude * max(0, 1 - dist/epsilon), evaluated on enclosures."""
    one = Fraction(1)
    lo = max(Fraction(0), min(one, 1 - dist.hi / level.epsilon))
    hi = max(Fraction(0), min(one, 1 - dist.lo / level.epsilon))
    return PrecisionReal(lo * level.amplitude, hi * level.amplitude)


class CocycleStack:
    """phi truncated at n_max levels, plus the exact truncation tail bound."""

    __slots__ = ("seq", "levels", "tail_bound", "alpha")

    def __init__(self, seq: DigitSequence, levels: Sequence[BumpLevel]):
        self.seq = seq
        self.levels = tuple(levels)
        n_max = self.levels[-1].n if self.levels else 0
        # sum_{n > n_max} (3/4)^n = 3 (3/4)^{n_max}, exact geometric tail
        self.tail_bound: Fraction = 3 * Fraction(3, 4) ** n_max
        self.alpha = seq.profile.alpha_real(_ALPHA_BITS)

    @property
    def n_max(self) -> int:
        return self.levels[-1].n if self.levels else 0


def build_stack(seq: DigitSequence, n_max: int, d_max: int = 24) -> CocycleStack:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    return CocycleStack(seq, [build_level(n, seq, d_max)
                              for n in range(1, n_max + 1)])


def bump_value(level: BumpLevel, x: CirclePoint,
               alpha: PrecisionReal) -> PrecisionReal:
    """phi_n(x): -f(R^{-i}x) on R^i N for 0 <= i < 2^n, +f on -2^n <= i < 0.

    The translated neighbourhoods are disjoint, so at most one index
    contributes; enclosures straddling a ramp boundary simply widen.  For
    sharp x a float prefilter discards translates whose distance to the
    cover exceeds epsilon by a wide certified margin; survivors are
    re-evaluated exactly.
    """
    use_filter = (x.rep.width <= _PREFILTER_MAX_WIDTH
                  and float(level.epsilon) > 4 * _PREFILTER_MARGIN)
    if use_filter:
        x_f = float(x.rep.lo)
        a_f = float(alpha.lo)
        centers_f = [float(c) for c in level.centers]
        cut = float(level.epsilon) + float(level.radius) + _PREFILTER_MARGIN
    lo = Fraction(0)
    hi = Fraction(0)
    for i in range(-level.translate_range, level.translate_range):
        if use_filter:
            y_f = (x_f - i * a_f) % 1.0
            near = min(min(u, 1.0 - u) for u in
                       ((y_f - c) % 1.0 for c in centers_f))
            if near > cut:
                continue
        y = CirclePoint(x.rep - alpha * i)
        dist = _dist_to_cover(level, y)
        if dist.lo >= level.epsilon:
            continue
        f = _tent(level, dist)
        if i >= 0:
            lo, hi = lo - f.hi, hi - f.lo
        else:
            lo, hi = lo + f.lo, hi + f.hi
    return PrecisionReal(lo, hi)


def phi(stack: CocycleStack, x: CirclePoint,
        include_tail: bool = True) -> PrecisionReal:
    """phi(x) = sum of level bumps, with +-tail_bound for omitted levels."""
    total = PrecisionReal.exact(0)
    for level in stack.levels:
        total = total + bump_value(level, x, stack.alpha)
    if include_tail:
        total = total + PrecisionReal(-stack.tail_bound, stack.tail_bound)
    return total


def _orbit_values(stack: CocycleStack, x: CirclePoint, count: int,
                  step: int) -> List[PrecisionReal]:
    """phi (without tail) at x, R^step x, R^{2 step} x, ..."""
    out = []
    for i in range(count):
        pt = CirclePoint(x.rep + stack.alpha * (i * step))
        out.append(phi(stack, pt, include_tail=False))
    return out


def _tail_adjust(stack: CocycleStack, s: PrecisionReal, m: int,
                 code_point: bool) -> PrecisionReal:
    t = abs(m) * stack.tail_bound
    if code_point:
        # on C the omitted levels push phi^{(m)} down only (their window
        # 2^n >= 2^{n_max+1} >= |m| covers the whole orbit with the
        # favourable sign), so the upper endpoint needs no tail allowance
        if abs(m) > 2 * (1 << stack.n_max):
            raise BudgetExceeded(
                f"one-sided enclosures on C hold only for |m| <= "
                f"{2 * (1 << stack.n_max)}, got {m}", m=m)
        return PrecisionReal(s.lo - t, s.hi)
    return PrecisionReal(s.lo - t, s.hi + t)


def birkhoff(stack: CocycleStack, x: CirclePoint, m: int,
             code_point: bool = False) -> PrecisionReal:
    """phi^{(m)}(x): 0 for m=0, the forward sum for m>0, minus the backward
    sum for m<0.  `code_point=True` asserts x in C and returns the one-sided
    enclosure whose upper endpoint carries no truncation tail."""
    if m == 0:
        return PrecisionReal.exact(0)
    if m > 0:
        vals = _orbit_values(stack, x, m, 1)
        s = sum(vals[1:], vals[0])
    else:
        vals = _orbit_values(stack, CirclePoint(x.rep - stack.alpha), -m, -1)
        s = -sum(vals[1:], vals[0])
    return _tail_adjust(stack, s, m, code_point)


def birkhoff_range(stack: CocycleStack, x: CirclePoint, m_max: int,
                   code_point: bool = False) -> Dict[int, PrecisionReal]:
    """phi^{(m)} for every |m| <= m_max, via shared orbit prefix sums."""
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    out: Dict[int, PrecisionReal] = {0: PrecisionReal.exact(0)}
    fwd = _orbit_values(stack, x, m_max, 1)
    s = PrecisionReal.exact(0)
    for m in range(1, m_max + 1):
        s = s + fwd[m - 1]
        out[m] = _tail_adjust(stack, s, m, code_point)
    bwd = _orbit_values(stack, CirclePoint(x.rep - stack.alpha), m_max, -1)
    s = PrecisionReal.exact(0)
    for m in range(1, m_max + 1):
        s = s - bwd[m - 1]
        out[-m] = _tail_adjust(stack, s, -m, code_point)
    return out


def level_birkhoff(level: BumpLevel, x: CirclePoint, m: int,
                   alpha: PrecisionReal) -> PrecisionReal:
    """Birkhoff sum of the single level bump phi_n (no truncation tail)."""
    if m == 0:
        return PrecisionReal.exact(0)
    total = PrecisionReal.exact(0)
    if m > 0:
        for i in range(m):
            total = total + bump_value(level, CirclePoint(x.rep + alpha * i),
                                       alpha)
    else:
        for i in range(1, -m + 1):
            total = total - bump_value(level, CirclePoint(x.rep - alpha * i),
                                       alpha)
    return total


def sum_exp_birkhoff(stack: CocycleStack, x: CirclePoint, m_max: int,
                     code_point: bool = True, bits: int = 128) -> PrecisionReal:
    """Enclosure of sum_{|m| <= m_max} exp(phi^{(m)}(x))."""
    values = birkhoff_range(stack, x, m_max, code_point)
    total = PrecisionReal.exact(0)
    for m in sorted(values):
        total = total + exp_enclosure(values[m], bits)
    return total


def block_tail_bound(i_max: int) -> Fraction:
    """Upper bound on sum_{|i| > i_max} exp(phi^{(i)}(x)) for x in C, from
    the dyadic-block estimate exp(phi^{(i)}) <= exp(-(3/4)(3/2)^n) for
    2^n <= |i| < 2^{n+1}: the bound is the sum of the M-series terms
    2^{n+1} exp(-(3/4)(3/2)^n) over the blocks past i_max."""
    if i_max < 1:
        raise ValueError("i_max must be >= 1")
    n = i_max.bit_length() - 1  # block containing i_max
    total = Fraction(0)
    # the block of i_max itself contributes its indices above i_max; counting
    # the whole block keeps the bound valid and simple
    while True:
        term = exp_enclosure(
            PrecisionReal.exact(-Fraction(3, 4) * Fraction(3, 2) ** n),
            128).hi * (1 << (n + 1))
        total += term
        if term < Fraction(1, 10 ** 40) and n >= 4:
            return total + term  # remainder <= last term (ratio < 1/2)
        n += 1


def ideal_weight_tail(i_max: int) -> Fraction:
    """Sharper bound on sum_{|i| > i_max} exp(phi^{(i)}(x)) for x in C.

    Every level n with 2^n >= |i| contributes the equality -|i|(3/4)^n and
    the rest are <= 0, so phi^{(i)} <= -4 |i| (3/4)^m with m = ceil(log2 |i|).
    Summing the geometric pieces per block m gives a certified upper bound
    far below `block_tail_bound`.
    """
    if i_max < 1:
        raise ValueError("i_max must be >= 1")

    def block(m: int) -> Fraction:
        # indices i in (2^{m-1}, 2^m] past i_max, both signs, bounded by the
        # geometric series with ratio exp(-rate) starting at the first index
        a = max(i_max + 1, (1 << (m - 1)) + 1)
        rate = 4 * Fraction(3, 4) ** m
        head = exp_enclosure(PrecisionReal.exact(-rate * a), 160).hi
        denom = 1 - exp_enclosure(PrecisionReal.exact(-rate), 160).hi
        assert denom > 0
        return 2 * head / denom

    total = Fraction(0)
    m = i_max.bit_length()  # block containing i_max + 1
    while True:
        cur = block(m)
        total += cur
        nxt = block(m + 1)
        if cur < Fraction(1, 10 ** 60) and 2 * nxt <= cur:
            # ratios keep shrinking past this point (the exponent gap
            # 3(3/2)^m/2 grows), so the remainder is <= cur
            return total + cur
        m += 1
        if m > 64:
            raise AssertionError("tail blocks failed to decay")


def bound_M(max_terms: int = 64) -> PrecisionReal:
    """Enclosure of M = 1 + sum_{n>=0} 2^{n+1} exp(-(3/4)(3/2)^n).

    Terms are summed until one drops below 1e-15; past n >= 4 the term ratio
    is below 1/2, so the remainder is bounded by the last computed term.
    """
    if max_terms < 8:
        raise ValueError("need at least 8 terms for a valid remainder bound")
    total = PrecisionReal.exact(1)
    cutoff = Fraction(1, 10 ** 15)
    term_hi = Fraction(0)
    n = 0
    while n < max_terms:
        arg = -Fraction(3, 4) * Fraction(3, 2) ** n
        term = exp_enclosure(PrecisionReal.exact(arg), 128) * (1 << (n + 1))
        total = total + term
        term_hi = term.hi
        if term_hi < cutoff and n >= 4:
            break
        n += 1
    # remainder: ratio t_{n+1}/t_n = 2 exp(-(3/8)(3/2)^n) < 1/2 for n >= 4
    return total + PrecisionReal(0, term_hi)
