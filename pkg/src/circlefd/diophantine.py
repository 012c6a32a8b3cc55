"""Continued fractions of the rotation number and grid-approximation bounds.

Provides certified partial quotients / convergents for a refinable irrational
alpha, the integer function p(q) = max_{1<=n<=q} ceil(1/dist(n*alpha, (1/q)Z))
(computed exactly through the best-approximation structure of frac(q*alpha)),
and finite-window witnesses for the approximation constant
c_p(x) = liminf_q p(q)*dist(x, (1/q)Z).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .errors import NotCertifiable, PrecisionExhausted, RationalInput
from .numerics import PrecisionReal, dist_to_grid, dist_to_integers

#: hard cap on refinement depth when pinning integer quantities
_MAX_BITS = 1 << 20


def _floor(x: Fraction) -> int:
    return x.numerator // x.denominator


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


# -- alpha specifications ------------------------------------------------


@dataclass(frozen=True)
class AlphaSpec:
    """Parsed description of an irrational rotation number in (0, 1)."""

    kind: str                      # golden | quotients | decimal
    quotient_block: Tuple[int, ...] = ()
    value: Optional[Fraction] = None
    error: Optional[Fraction] = None
    text: str = ""                 # canonical string form (round-trips)

    def canonical(self) -> str:
        return self.text


def parse_alpha_spec(spec: Union[str, Sequence[int], AlphaSpec]) -> AlphaSpec:
    """Parse an alpha description.

    Accepted forms: the keyword "golden"; a list of partial quotients (the
    repeating block of a purely periodic continued fraction, hence a quadratic
    irrational); "quotients:a1,a2,..."; "decimal:<value>:<error>".  A bare
    decimal string denotes an exact rational and is rejected.
    """
    if isinstance(spec, AlphaSpec):
        return spec
    if isinstance(spec, (list, tuple)):
        block = tuple(int(a) for a in spec)
        if not block or any(a < 1 for a in block):
            raise ValueError(f"partial quotients must be positive: {block}")
        return AlphaSpec("quotients", quotient_block=block,
                         text="quotients:" + ",".join(str(a) for a in block))
    if not isinstance(spec, str):
        raise TypeError(f"unsupported alpha spec: {spec!r}")
    text = spec.strip()
    if text == "golden":
        return AlphaSpec("golden", quotient_block=(1,), text="golden")
    if text.startswith("quotients:"):
        return parse_alpha_spec([a for a in text[len("quotients:"):].split(",") if a])
    if text.startswith("decimal:"):
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("decimal spec must be decimal:<value>:<error>")
        value = _fraction_from_decimal(parts[1])
        error = _fraction_from_decimal(parts[2])
        if error <= 0:
            raise RationalInput(
                f"decimal value {parts[1]} with zero error denotes a rational",
                spec=text)
        if not (0 < value - error and value + error < 1):
            raise ValueError("decimal alpha must lie in (0,1) with its error band")
        return AlphaSpec("decimal", value=value, error=error, text=text)
    # bare number: an exact rational
    try:
        _fraction_from_decimal(text)
    except ValueError:
        raise ValueError(f"unrecognized alpha spec: {text!r}") from None
    raise RationalInput(f"alpha spec {text!r} denotes an exact rational", spec=text)


def _fraction_from_decimal(s: str) -> Fraction:
    s = s.strip()
    try:
        return Fraction(s)  # handles "0.5", "1/3", "1e-14" via Fraction(str)
    except ValueError as exc:
        raise ValueError(f"not a decimal number: {s!r}") from exc


# -- continued fractions -------------------------------------------------


class ContinuedFraction:
    """Certified partial quotients and convergents of an irrational alpha.

    Quotients extend lazily.  For golden/quotient specs the stream is the
    periodic block (never exhausted); for decimal specs only the quotients
    certifiable from the error band exist, and requesting more raises
    NotCertifiable.  Convergents p_k/q_k follow the standard recurrence and
    alternate around alpha, so consecutive convergents give an enclosure of
    width 1/(q_k q_{k+1}).
    """

    def __init__(self, spec: AlphaSpec):
        self.spec = spec
        self._quotients: List[int] = []
        # convergent recurrence state: (p, q) with virtual p_{-1}/q_{-1} = 1/0
        self._p: List[int] = [1, 0]   # p_{-1}, p_0
        self._q: List[int] = [0, 1]   # q_{-1}, q_0
        self._decimal_quotients: Optional[List[int]] = None
        if spec.kind == "decimal":
            self._decimal_quotients = _certified_quotients(
                spec.value - spec.error, spec.value + spec.error)
            if not self._decimal_quotients:
                raise NotCertifiable(
                    "error band too wide to certify any partial quotient",
                    spec=spec.canonical())

    # quotient indices are 1-based to match the a_1, a_2, ... convention

    def ensure_quotients(self, k: int) -> None:
        while len(self._quotients) < k:
            i = len(self._quotients)  # next index - 1
            if self.spec.kind in ("golden", "quotients"):
                block = self.spec.quotient_block
                a = block[i % len(block)]
            else:
                assert self._decimal_quotients is not None
                if i >= len(self._decimal_quotients):
                    raise NotCertifiable(
                        f"only {len(self._decimal_quotients)} quotients certifiable "
                        f"from the stated error band, {k} requested",
                        spec=self.spec.canonical(),
                        certified=len(self._decimal_quotients))
                a = self._decimal_quotients[i]
            self._quotients.append(a)
            self._p.append(a * self._p[-1] + self._p[-2])
            self._q.append(a * self._q[-1] + self._q[-2])

    def partial_quotients(self, k: int) -> Tuple[int, ...]:
        self.ensure_quotients(k)
        return tuple(self._quotients[:k])

    def convergent(self, k: int) -> Fraction:
        """k-th convergent, k >= 0 (convergent 0 is 0/1)."""
        self.ensure_quotients(k)
        return Fraction(self._p[k + 1], self._q[k + 1])

    def convergents(self, k: int) -> List[Tuple[int, int]]:
        self.ensure_quotients(k)
        return [(self._p[i + 1], self._q[i + 1]) for i in range(k + 1)]

    def denominator(self, k: int) -> int:
        self.ensure_quotients(k)
        return self._q[k + 1]

    def max_certifiable_depth(self) -> Optional[int]:
        if self._decimal_quotients is None:
            return None
        return len(self._decimal_quotients)

    def _enclosure_at_depth(self, k: int) -> Tuple[Fraction, Fraction]:
        lo, hi = sorted((self.convergent(k), self.convergent(k + 1)))
        if self.spec.kind == "decimal":
            lo = max(lo, self.spec.value - self.spec.error)
            hi = min(hi, self.spec.value + self.spec.error)
        return lo, hi

    def _enclosure_for_bits(self, bits: int) -> Tuple[Fraction, Fraction]:
        target = Fraction(1, 1 << bits)
        k = 1
        while True:
            try:
                self.ensure_quotients(k + 2)
            except NotCertifiable:
                k = (self.max_certifiable_depth() or 2) - 2
                return self._enclosure_at_depth(max(k, 1))
            lo, hi = self._enclosure_at_depth(k)
            if hi - lo <= target:
                return lo, hi
            k = max(k + 1, int(k * 1.5))

    def real(self, bits: int = 64) -> PrecisionReal:
        """Alpha as a refinable enclosure."""
        lo, hi = self._enclosure_for_bits(bits)

        def refiner(b, _cf=self):
            l, h = _cf._enclosure_for_bits(b)
            return PrecisionReal(l, h, "alpha")

        return PrecisionReal(lo, hi, "more continued-fraction terms of alpha",
                             refiner)


def _certified_quotients(lo: Fraction, hi: Fraction) -> List[int]:
    """Partial quotients shared by every number in [lo, hi] subset of (0,1)."""
    out: List[int] = []
    while True:
        if lo <= 0 or hi >= 1:
            return out
        inv_lo, inv_hi = 1 / hi, 1 / lo
        a_lo, a_hi = _floor(inv_lo), _floor(inv_hi)
        if a_lo != a_hi or inv_lo == a_lo:
            return out
        out.append(a_lo)
        lo, hi = inv_lo - a_lo, inv_hi - a_lo
        if len(out) > 4096:  # absurd depth means the band is basically a point
            return out


def expand_alpha(alpha_spec, k: int) -> ContinuedFraction:
    """Continued fraction of alpha with at least k certified quotients."""
    if k < 1:
        raise ValueError("k must be >= 1")
    cf = ContinuedFraction(parse_alpha_spec(alpha_spec))
    cf.ensure_quotients(k)
    return cf


# -- the p function ------------------------------------------------------


@dataclass
class ApproximationProfile:
    """Alpha plus the lazily tabulated integer function p(q).

    Invariant: for every tabulated q and all 1 <= n <= q,
    p(q) * dist(n*alpha, (1/q)Z) >= 1, because p(q) is the exact maximum of
    the ceilings ceil(1/dist(n*alpha, (1/q)Z)).
    """

    alpha: ContinuedFraction
    p_table: Dict[int, int] = field(default_factory=dict)

    def alpha_real(self, bits: int = 64) -> PrecisionReal:
        return self.alpha.real(bits)


def make_profile(alpha_spec, quotients: int = 8) -> ApproximationProfile:
    return ApproximationProfile(expand_alpha(alpha_spec, quotients))


def _frac_of_interval(lo: Fraction, hi: Fraction) -> Optional[Tuple[Fraction, Fraction]]:
    fl = _floor(lo)
    if _floor(hi) != fl:
        return None
    return lo - fl, hi - fl


def _interval_cf_denominators(lo: Fraction, hi: Fraction, limit: int):
    """Convergent (numerator, denominator) pairs of every x in [lo, hi],
    collected while the denominator is <= limit; None when the band is too
    wide to continue certifiably."""
    p_prev, p_cur = 1, 0
    q_prev, q_cur = 0, 1
    pairs = [(0, 1)]
    while True:
        if lo <= 0 or hi >= 1:
            return None
        inv_lo, inv_hi = 1 / hi, 1 / lo
        a = _floor(inv_lo)
        if a != _floor(inv_hi) or inv_lo == a:
            return None
        p_prev, p_cur = p_cur, a * p_cur + p_prev
        q_prev, q_cur = q_cur, a * q_cur + q_prev
        if q_cur > limit:
            return pairs
        pairs.append((p_cur, q_cur))
        lo, hi = inv_lo - a, inv_hi - a


def min_multiple_dist(profile: ApproximationProfile, beta_times: int,
                      limit: int) -> Tuple[int, PrecisionReal]:
    """(argmin n, enclosure) of min_{1<=n<=limit} dist(n*beta, Z) for
    beta = frac(beta_times * alpha).

    Uses the best-approximation theorem: the minimum sits at the largest
    continued-fraction convergent denominator of beta that is <= limit.
    """
    bits = max(64, 2 * limit.bit_length() + 64)
    last_width: Optional[Fraction] = None
    while bits <= _MAX_BITS:
        a = profile.alpha_real(bits)
        lo, hi = a.lo * beta_times, a.hi * beta_times
        frac = _frac_of_interval(lo, hi)
        if frac is not None:
            pairs = _interval_cf_denominators(frac[0], frac[1], limit)
            if pairs is not None:
                _, q_den = pairs[-1]
                fl = _floor(lo)

                def beta_refiner(b, _p=profile, _t=beta_times, _fl=fl):
                    aa = _p.alpha_real(b + _t.bit_length() + 4)
                    return PrecisionReal(aa.lo * _t - _fl, aa.hi * _t - _fl,
                                         "alpha")

                beta = PrecisionReal(frac[0], frac[1],
                                     "more continued-fraction terms of alpha",
                                     beta_refiner)
                d = dist_to_integers(beta * q_den)
                if d.lo > 0:
                    return q_den, d
        if last_width is not None and a.width >= last_width:
            break  # the alpha source is exhausted; more bits change nothing
        last_width = a.width
        bits *= 2
    raise PrecisionExhausted(
        f"could not certify min multiple distance at limit {limit}",
        limit=limit, alpha=profile.alpha.spec.canonical())


def build_p(profile: ApproximationProfile, q: int) -> int:
    """p(q) = max_{1<=n<=q} ceil(1/dist(n*alpha, (1/q)Z)), exactly.

    Equals ceil(q / min_{1<=n<=q} dist(n*frac(q*alpha), Z)); the inner
    minimum is certified through convergents of frac(q*alpha).  Memoized.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    cached = profile.p_table.get(q)
    if cached is not None:
        return cached
    _, d = min_multiple_dist(profile, q, q)
    bits = max(128, 4 * q.bit_length())
    while True:
        lo_val = q / d.hi
        hi_val = q / d.lo
        if _ceil(lo_val) == _ceil(hi_val):
            value = _ceil(lo_val)
            break
        narrowed = d.refine(bits)
        if narrowed.width >= d.width or bits > _MAX_BITS:
            raise PrecisionExhausted(
                f"could not pin ceil for p({q})", q=q,
                alpha=profile.alpha.spec.canonical())
        d = narrowed
        bits *= 2
    profile.p_table[q] = value
    return value


def grid_distance(profile: ApproximationProfile, m: int, q: int) -> PrecisionReal:
    """Enclosure of dist(m*alpha, (1/q)Z), refinable through alpha."""
    return dist_to_grid(profile.alpha_real() * m, q)


def lonely_multiple_product(profile: ApproximationProfile, m: int, q: int) -> PrecisionReal:
    """p(q) * dist(m*alpha, (1/q)Z); certified >= 1 whenever q >= m >= 1."""
    return grid_distance(profile, m, q) * build_p(profile, q)


# -- c_p witnesses -------------------------------------------------------


@dataclass
class CpWitness:
    """Finite-window upper-bound witness for c_p(x).

    `value` is the running minimum of p(q)*dist(x, (1/q)Z) over the window
    [q_min, q_max]; a genuine liminf is not computable, so the window is part
    of the result.
    """

    value: PrecisionReal
    q_at_min: int
    window: Tuple[int, int]
    samples: List[Tuple[int, PrecisionReal]]


def estimate_c_p(x: PrecisionReal, profile: ApproximationProfile,
                 q_max: int, q_min: int = 2,
                 keep_samples: bool = False) -> CpWitness:
    """Running minimum of p(q)*dist(x, (1/q)Z) over q in [q_min, q_max]."""
    if q_max < 2 or q_max < q_min:
        raise ValueError("window must satisfy 2 <= q_min <= q_max")
    best: Optional[PrecisionReal] = None
    best_q = q_min
    samples: List[Tuple[int, PrecisionReal]] = []
    for q in range(q_min, q_max + 1):
        val = dist_to_grid(x, q) * build_p(profile, q)
        if keep_samples:
            samples.append((q, val))
        if best is None or val.hi < best.hi:
            best, best_q = val, q
    assert best is not None
    return CpWitness(best, best_q, (q_min, q_max), samples)
