"""The Cantor set of digit sums, its covers, base measure, and translate
disjointness.

C = { sum_n e_n / q_n : e_n in {0,1} } for a digit sequence q_0=1 < q_1 < ...
with q_n | q_{n+1}, q_{n+1} >= 3 q_n and p(q_n) <= 2^{-n} q_{n+1}.  At depth d
the set is covered by 2^d disjoint arcs of length tail(d) = sum_{n>d} 1/q_n.
The base measure mu_0 is the fair-coin law on digits: each depth-d cylinder
carries mass exactly 2^{-d}.

Translate disjointness (R = rotation by alpha): R^n C and R^m C are disjoint
iff (m-n) alpha avoids C - C mod 1; at finite depth this reduces to a certified
positive gap between k*alpha and all 3^d difference sums sum delta_n / q_n,
delta_n in {-1,0,1}, found by branch-and-bound.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from .diophantine import ApproximationProfile, build_p
from .errors import DepthTooLarge, DisjointnessUndecided
from .numerics import (CircleArc, CirclePoint, PrecisionReal, dist_to_integers,
                       unit_dist)

#: digit denominators may not exceed this many bits (resource guard)
_MAX_Q_BITS = 1 << 15
#: materialized covers are capped at 2^18 arcs
_MAX_COVER_DEPTH = 18

GOLDEN_FAST_PATH = "golden-fast-path"
GENERAL_CONSTRUCTION = "general-construction"


class DigitSequence:
    """Digit denominators (q_0, ..., q_N) with certified growth conditions.

    `p_values[n]` is p(q_n) for n < N (used to check p(q_n) <= 2^{-n} q_{n+1});
    all four conditions are re-verified by exact integer arithmetic on
    construction.
    """

    __slots__ = ("q", "provenance", "p_values", "profile", "_suffix")

    def __init__(self, q: Sequence[int], provenance: str,
                 p_values: Sequence[int], profile: ApproximationProfile):
        q = tuple(int(v) for v in q)
        p_values = tuple(int(v) for v in p_values)
        if len(q) < 2 or q[0] != 1:
            raise ValueError("need q_0 = 1 and at least one further term")
        if len(p_values) != len(q) - 1:
            raise ValueError("need p(q_n) for every n < N")
        for n in range(len(q) - 1):
            if q[n + 1] % q[n] != 0:
                raise ValueError(f"q_{n} does not divide q_{n + 1}")
            if 3 * q[n] > q[n + 1]:
                raise ValueError(f"growth q_{n + 1} >= 3 q_{n} violated")
            if p_values[n] << n > q[n + 1]:
                raise ValueError(f"condition p(q_{n}) <= 2^-{n} q_{n + 1} violated")
        self.q = q
        self.provenance = provenance
        self.p_values = p_values
        self.profile = profile
        # suffix[d] = sum_{d < n <= N} 1/q_n, exact
        suffix = [Fraction(0)] * len(q)
        for n in range(len(q) - 1, 0, -1):
            suffix[n - 1] = suffix[n] + Fraction(1, q[n])
        self._suffix = tuple(suffix)

    @property
    def depth(self) -> int:
        return len(self.q) - 1

    def tail(self, d: int) -> PrecisionReal:
        """Enclosure of tail(d) = sum_{n>d} 1/q_n.

        The computed part is exact; the part beyond q_N is bounded by
        1/(2 q_N) since the growth ratio is at least 3.
        """
        if not 0 <= d <= self.depth:
            raise ValueError(f"depth {d} outside [0, {self.depth}]")
        lo = self._suffix[d]
        return PrecisionReal(lo, lo + Fraction(1, 2 * self.q[-1]),
                             "longer digit sequence")

    def __repr__(self) -> str:
        qs = ", ".join(str(v) if v < 10 ** 9 else f"2^{v.bit_length() - 1}"
                       if v & (v - 1) == 0 else f"~10^{len(str(v)) - 1}"
                       for v in self.q)
        return f"DigitSequence([{qs}], {self.provenance})"


def build_digit_sequence(profile: ApproximationProfile, N: int,
                         path: str = "auto") -> DigitSequence:
    """Digit denominators q_0..q_N.

    The golden rotation number admits the closed-form fast path
    q_k = 2^(3^k) (k >= 1); every alpha supports the general construction
    q_{n+1} = smallest multiple of q_n with q_{n+1} >= 3 q_n and
    q_{n+1} >= 2^n p(q_n).  `path` is "auto", "fast" or "general".
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if path == "auto":
        path = "fast" if profile.alpha.spec.kind == "golden" else "general"
    if path == "fast":
        if profile.alpha.spec.kind != "golden":
            raise ValueError("the closed-form fast path is specific to the "
                             "golden rotation number")
        if 3 ** N > _MAX_Q_BITS:
            raise DepthTooLarge(
                f"fast-path q_{N} = 2^(3^{N}) exceeds the {_MAX_Q_BITS}-bit "
                f"resource guard", N=N)
        q = [1] + [1 << (3 ** k) for k in range(1, N + 1)]
        p_values = [build_p(profile, q[n]) for n in range(N)]
        return DigitSequence(q, GOLDEN_FAST_PATH, p_values, profile)
    if path != "general":
        raise ValueError(f"unknown path {path!r}")
    q = [1]
    p_values = []
    for n in range(N):
        p_n = build_p(profile, q[n])
        p_values.append(p_n)
        need = max(3 * q[n], (1 << n) * p_n)
        q_next = -(-need // q[n]) * q[n]
        if q_next.bit_length() > _MAX_Q_BITS:
            raise DepthTooLarge(
                f"general-path q_{n + 1} exceeds the {_MAX_Q_BITS}-bit "
                f"resource guard", N=N, reached=n)
        q.append(q_next)
    return DigitSequence(q, GENERAL_CONSTRUCTION, p_values, profile)


# -- covers and points ---------------------------------------------------


@dataclass(frozen=True)
class CantorCover:
    """Depth-d cover of C: one arc per cylinder code, all of length tail(d)."""

    seq: DigitSequence = field(repr=False)
    depth: int
    codes: Tuple[Tuple[int, ...], ...]
    intervals: Tuple[CircleArc, ...] = field(repr=False)
    mu0_mass_per_cylinder: Fraction = Fraction(1)

    def left_endpoints(self) -> List[Fraction]:
        return [arc.left.rep.lo for arc in self.intervals]


def _code_bit(code, n: int) -> int:
    """Digit e_n (1-based) from a sequence or a generator function."""
    bit = code(n) if callable(code) else code[n - 1]
    if bit not in (0, 1):
        raise ValueError(f"digit {bit!r} at position {n} is not a bit")
    return bit


def _partial_sum(seq: DigitSequence, code, d: int) -> Fraction:
    s = Fraction(0)
    for n in range(1, d + 1):
        if _code_bit(code, n):
            s += Fraction(1, seq.q[n])
    return s


def cover(seq: DigitSequence, d: int) -> CantorCover:
    """The 2^d depth-d cylinder arcs, in increasing (= lexicographic) order."""
    if not 0 <= d <= seq.depth:
        raise ValueError(f"depth {d} outside [0, {seq.depth}]")
    if d > _MAX_COVER_DEPTH:
        raise DepthTooLarge(f"cover at depth {d} would hold 2^{d} arcs", depth=d)
    tail = seq.tail(d)
    codes = []
    arcs = []
    prev_right: Optional[Fraction] = None
    for idx in range(1 << d):
        code = tuple((idx >> (d - n)) & 1 for n in range(1, d + 1))
        left = _partial_sum(seq, code, d)
        if prev_right is not None and left <= prev_right:
            raise AssertionError("cylinder arcs must be pairwise disjoint")
        prev_right = left + tail.hi
        codes.append(code)
        arcs.append(CircleArc(CirclePoint(PrecisionReal.exact(left)), tail))
    return CantorCover(seq, d, tuple(codes), tuple(arcs), Fraction(1, 1 << d))


def point_from_code(seq: DigitSequence, code, d: int) -> CirclePoint:
    """Enclosure [partial sum, partial sum + tail(d)] of the coded C point."""
    if not 0 <= d <= seq.depth:
        raise ValueError(f"depth {d} outside [0, {seq.depth}]")
    s = _partial_sum(seq, code, d)
    tail = seq.tail(d)
    return CirclePoint(PrecisionReal(s, s + tail.hi, tail.refine_hint))


@dataclass(frozen=True)
class BaseMeasure:
    """mu_0: the fair-coin digit law on C (atomless, full support)."""

    seq: DigitSequence

    def cylinder_mass(self, d: int) -> Fraction:
        return Fraction(1, 1 << d)

    def cdf(self, x, d: int) -> PrecisionReal:
        return mu0_cdf(self.seq, x, d)


def _count_codes_leq(seq: DigitSequence, y: Fraction, d: int) -> int:
    """Number of depth-d cylinder left endpoints <= y, in O(d) exact steps.

    Uses the separation 1/q_n > sum_{m>n} 1/q_m: the two level-n subtrees
    never interleave, so at most one branch needs descending.
    """
    if y < 0:
        return 0
    total = 0
    base = Fraction(0)
    for n in range(1, d + 1):
        one = base + Fraction(1, seq.q[n])
        if one <= y:
            total += 1 << (d - n)  # the whole 0-subtree lies left of `one`
            base = one
    return total + (1 if base <= y else 0)


def mu0_cdf(seq: DigitSequence, x, d: int) -> PrecisionReal:
    """Enclosure of mu_0[0, x] from the depth-d cover; error <= 2^{-d}.

    Cylinders entirely inside [0, x] count fully; the (at most one, for point
    x) cylinder straddling x accounts for the enclosure width.
    """
    if not 0 <= d <= seq.depth:
        raise ValueError(f"depth {d} outside [0, {seq.depth}]")
    if isinstance(x, CirclePoint):
        x = x.rep
    elif not isinstance(x, PrecisionReal):
        x = PrecisionReal.exact(x)
    t_hi = seq.tail(d).hi
    mass = Fraction(1, 1 << d)
    lower = _count_codes_leq(seq, x.lo - t_hi, d) * mass
    upper = min(_count_codes_leq(seq, x.hi, d), 1 << d) * mass
    return PrecisionReal(lower, upper, "deeper cover")


# -- translate disjointness ----------------------------------------------


def _min_difference_dist(seq: DigitSequence, k: int, d: int,
                         bits: int) -> Tuple[PrecisionReal, int]:
    """Certified enclosure of min over delta in {-1,0,1}^d of
    dist(k*alpha + sum delta_n/q_n, Z), plus the visited node count.

    Branch-and-bound: a partial sum whose distance cannot drop below the
    best leaf even after the maximal remaining shift is pruned.  The lower
    endpoint over visited leaves is a certified lower bound because every
    pruned subtree was certified >= some visited leaf's upper endpoint.
    """
    ka = seq.profile.alpha_real(bits) * k
    # max shift the digits at levels > n can still contribute (within depth d)
    move = [seq._suffix[n] - seq._suffix[d] for n in range(d + 1)]
    best_hi: Optional[Fraction] = None
    best_lo: Optional[Fraction] = None
    nodes = 0

    stack: List[Tuple[int, Fraction]] = [(0, Fraction(0))]
    while stack:
        n, partial = stack.pop()
        nodes += 1
        dist = dist_to_integers(ka + partial)
        if best_hi is not None and dist.lo - move[n] >= best_hi:
            continue
        if n == d:
            best_hi = dist.hi if best_hi is None else min(best_hi, dist.hi)
            best_lo = dist.lo if best_lo is None else min(best_lo, dist.lo)
            continue
        step = Fraction(1, seq.q[n + 1])
        for delta in (-1, 1, 0):  # LIFO: the delta=0 child is explored first
            stack.append((n + 1, partial + delta * step))
    assert best_lo is not None and best_hi is not None
    return PrecisionReal(best_lo, best_hi), nodes


@dataclass(frozen=True)
class PairDisjointness:
    n: int
    m: int
    depth: int        # minimal depth at which the translated covers separate
    gap: PrecisionReal
    nodes: int        # branch-and-bound nodes visited at that depth


@dataclass(frozen=True)
class DisjointnessReport:
    range_N: int
    d_max: int
    pairs: Tuple[PairDisjointness, ...]
    min_gap: PrecisionReal
    max_depth_used: int

    def pair(self, n: int, m: int) -> PairDisjointness:
        for rec in self.pairs:
            if (rec.n, rec.m) == (n, m):
                return rec
        raise KeyError((n, m))


def verify_translate_disjointness(seq: DigitSequence, range_N: int,
                                  d_max: int) -> DisjointnessReport:
    """Certify R^n cover and R^m cover disjoint for all -range_N <= n < m <= range_N.

    The pair (n, m) reduces to k = m - n: the covers separate iff k*alpha
    keeps a positive gap to every depth-d difference sum, beyond the arc
    length tail(d).  Depths increase until the gap certifies; exhausting
    min(d_max, sequence depth) raises DisjointnessUndecided.
    """
    if range_N < 1:
        raise ValueError("range_N must be >= 1")
    deepest = min(d_max, seq.depth)
    per_k: Dict[int, Tuple[int, PrecisionReal, int]] = {}
    for k in range(1, 2 * range_N + 1):
        found = None
        for d in range(1, deepest + 1):
            tail = seq.tail(d)
            bits = 192
            while True:
                m_dist, nodes = _min_difference_dist(seq, k, d, bits)
                gap_lo = m_dist.lo - tail.hi
                gap_hi = m_dist.hi - tail.lo
                if gap_lo > 0:
                    found = (d, PrecisionReal(gap_lo, max(gap_hi, gap_lo)),
                             nodes)
                    break
                if gap_hi <= 0 or bits >= 4096:
                    break  # certainly overlapping covers, or stuck: go deeper
                bits *= 2
            if found:
                break
        if found is None:
            n0, m0 = (0, k) if k <= range_N else (k - range_N, range_N)
            raise DisjointnessUndecided(n0, m0, deepest)
        per_k[k] = found
    pairs = []
    for n in range(-range_N, range_N + 1):
        for m in range(n + 1, range_N + 1):
            d, gap, nodes = per_k[m - n]
            pairs.append(PairDisjointness(n, m, d, gap, nodes))
    min_gap = min((rec.gap for rec in pairs), key=lambda g: g.lo)
    max_depth = max(rec.depth for rec in pairs)
    return DisjointnessReport(range_N, d_max, tuple(pairs), min_gap, max_depth)


# -- finite surrogate of the grid-approximation bound ---------------------


def difference_code_grid_products(seq: DigitSequence,
                                  deltas: Sequence[int],
                                  i_max: int) -> List[Fraction]:
    """p(q_i) * dist(beta, (1/q_i)Z) for beta = sum delta_n/q_n, i = 1..i_max.

    Exact rationals; each is provably <= 3/2^{i+1} because the partial sum
    to level i is a grid point and the remainder is at most (3/2)/q_{i+1}.
    """
    if not 1 <= i_max <= seq.depth:
        raise ValueError(f"i_max {i_max} outside [1, {seq.depth}]")
    if any(dd not in (-1, 0, 1) for dd in deltas):
        raise ValueError("difference digits must lie in {-1, 0, 1}")
    beta = sum((Fraction(dd, seq.q[n + 1]) for n, dd in enumerate(deltas)),
               Fraction(0))
    out = []
    for i in range(1, i_max + 1):
        p_i = seq.p_values[i] if i < len(seq.p_values) else build_p(
            seq.profile, seq.q[i])
        out.append(p_i * unit_dist(beta * seq.q[i]) / seq.q[i])
    return out
