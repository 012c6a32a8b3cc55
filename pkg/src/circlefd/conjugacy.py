"""Conjugacy layer: weighted atomic measure, exact piecewise-linear CDF,
the conjugated circle diffeomorphism F, and certified consistency reports.

Coordinates live in two copies of the circle.  The measure mu sits on the
"rotation side" (y), where the dynamics is the rigid rotation R: y -> y +
alpha.  Its CDF G transports mu to Lebesgue measure on the "diffeo side"
(x); the conjugated map is F = G o R o Q with Q = G^{-1}, so the conjugacy
sending x-coordinates to rotation coordinates is h = Q and F' = exp of the
truncated cocycle at h(x).

Everything here is exact: positions are affine forms a + b*alpha with
rational coefficients, masses are dyadic rationals, and comparisons are
resolved by refining an enclosure of alpha until the sign is certified.
"""

from __future__ import annotations

import bisect
import functools
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .cantor import (DigitSequence, DisjointnessReport, cover,
                     verify_translate_disjointness)
from .cocycle import (CocycleStack, birkhoff_range, block_tail_bound,
                      ideal_weight_tail, phi)
from .diophantine import ContinuedFraction
from .errors import (BudgetExceeded, DepthTooLarge, NotCertifiable,
                     PrecisionExhausted)
from .numerics import CirclePoint, PrecisionReal, exp_enclosure, round_dyadic

_SIGN_LADDER = (128, 256, 512, 1024, 2048, 4096, 8192, 16384)
_FLOAT_TRUST = 1.0 / (1 << 40)  # float keys resolve gaps above this
_ATOM_BUDGET = 1 << 20


# ---------------------------------------------------------------------------
# exact affine forms a + b*alpha


@dataclass(frozen=True)
class LinForm:
    """a + b*alpha with rational a, b; closed under the operations used by
    the CDF (shift, difference, scaling by rationals)."""

    a: Fraction
    b: Fraction

    @staticmethod
    def of(a, b=0) -> "LinForm":
        return LinForm(Fraction(a), Fraction(b))

    def __add__(self, other) -> "LinForm":
        if isinstance(other, LinForm):
            return LinForm(self.a + other.a, self.b + other.b)
        return LinForm(self.a + Fraction(other), self.b)

    __radd__ = __add__

    def __sub__(self, other) -> "LinForm":
        if isinstance(other, LinForm):
            return LinForm(self.a - other.a, self.b - other.b)
        return LinForm(self.a - Fraction(other), self.b)

    def __rsub__(self, other) -> "LinForm":
        return (-self) + other

    def __neg__(self) -> "LinForm":
        return LinForm(-self.a, -self.b)

    def scale(self, c) -> "LinForm":
        c = Fraction(c)
        return LinForm(self.a * c, self.b * c)

    def is_rational(self) -> bool:
        return self.b == 0


ZERO = LinForm.of(0)
ONE = LinForm.of(1)


class AlphaContext:
    """Certified sign/floor/ordering decisions for affine forms in alpha."""

    def __init__(self, alpha: ContinuedFraction):
        self.cf = alpha
        self._cache: Dict[int, PrecisionReal] = {}
        self._alpha_float = float(self.alpha(64).mid)

    def alpha(self, bits: int) -> PrecisionReal:
        enc = self._cache.get(bits)
        if enc is None:
            enc = self.cf.real(bits)
            self._cache[bits] = enc
        return enc

    def enclosure(self, f: LinForm, bits: int) -> PrecisionReal:
        """Enclosure of f with width <= |b| 2^-need <= 2^-bits: the alpha
        precision grows with the coefficient size (CDF forms carry huge
        canceling coefficients), rounded up to keep the cache small."""
        if f.b == 0:
            return PrecisionReal.exact(f.a)
        extra = max(0, f.b.numerator.bit_length()
                    - f.b.denominator.bit_length() + 1)
        need = ((bits + extra + 255) // 256) * 256
        al = self.alpha(need)
        if f.b >= 0:
            lo, hi = f.a + f.b * al.lo, f.a + f.b * al.hi
        else:
            lo, hi = f.a + f.b * al.hi, f.a + f.b * al.lo

        def refiner(b2, _f=f):
            return self.enclosure(_f, b2)

        return PrecisionReal(lo, hi, "affine form in alpha", refiner)

    def float_key(self, f: LinForm) -> float:
        return float(f.a) + float(f.b) * self._alpha_float

    def sign(self, f: LinForm) -> int:
        if f.b == 0:
            return -1 if f.a < 0 else (1 if f.a > 0 else 0)
        for bits in _SIGN_LADDER:
            enc = self.enclosure(f, bits)
            if enc.lo > 0:
                return 1
            if enc.hi < 0:
                return -1
        raise PrecisionExhausted(
            f"sign of {f} undecided at {_SIGN_LADDER[-1]} bits")

    def compare(self, f: LinForm, g: LinForm) -> int:
        d = f - g
        if d.a == 0 and d.b == 0:
            return 0
        return self.sign(d)

    def floor(self, f: LinForm) -> int:
        if f.b == 0:
            return f.a.numerator // f.a.denominator
        for bits in _SIGN_LADDER:
            enc = self.enclosure(f, bits)
            flo = enc.lo.numerator // enc.lo.denominator
            fhi = enc.hi.numerator // enc.hi.denominator
            if flo == fhi:
                return flo
        raise PrecisionExhausted(
            f"floor of {f} undecided at {_SIGN_LADDER[-1]} bits")

    def reduce_mod1(self, f: LinForm) -> LinForm:
        return f - self.floor(f)

    def sort_forms(self, items: Sequence, key) -> List:
        """Sort by the affine-form value of key(item): float keys decide
        gaps above the trust radius, exact comparisons break the rest."""

        def cmp(u, v):
            fu, fv = self.float_key(key(u)), self.float_key(key(v))
            if fu - fv > _FLOAT_TRUST:
                return 1
            if fv - fu > _FLOAT_TRUST:
                return -1
            return self.compare(key(u), key(v))

        return sorted(items, key=functools.cmp_to_key(cmp))


# ---------------------------------------------------------------------------
# the weighted atomic measure


def _ceil_dyadic(x: Fraction, bits: int) -> Fraction:
    scaled = x * (1 << bits)
    return Fraction(-((-scaled.numerator) // scaled.denominator), 1 << bits)


def dyadic_cover_length(seq: DigitSequence, depth: int) -> Fraction:
    """Common dyadic arc length covering every depth-d cylinder: the exact
    cylinder length rounded up to a short dyadic, so downstream arithmetic
    never drags the deep digit denominators along."""
    return _ceil_dyadic(seq.tail(depth).hi, seq.q[depth].bit_length() + 8)


@dataclass(frozen=True)
class Atom:
    """One translated cylinder arc with its pinned mass.

    `w` is the artifact's exact dyadic mass: exp of the upper endpoint of
    the truncated-cocycle Birkhoff enclosure at the cylinder, scaled by the
    base cylinder mass 2^-depth and rounded to `mass_bits` fractional bits.
    `mass_lo/mass_hi` enclose the mass the ideal (all-levels) cocycle would
    assign, accounting for the one-sided truncation tail.
    """

    i: int
    code: Tuple[int, ...]
    base: Fraction          # left endpoint of the depth-d cylinder
    start: LinForm          # arc start, reduced mod 1
    w: Fraction
    # Birkhoff and ideal-mass enclosures; absent on atoms reloaded from a
    # persisted descriptor (which stores only the artifact masses)
    s_lo: Optional[Fraction] = None
    s_hi: Optional[Fraction] = None
    mass_lo: Optional[Fraction] = None
    mass_hi: Optional[Fraction] = None


@dataclass(frozen=True)
class WeightedAtomMeasure:
    """mu = sum of atom masses spread uniformly over their arcs, plus a
    uniform floor eta + tail_mass over the whole circle; Z normalizes."""

    seq: DigitSequence
    stack: CocycleStack
    i_max: int
    depth: int
    mass_bits: int
    eta: Fraction
    tail_mass: Fraction     # certified bound on the ideal mass beyond i_max
    arc_length: Fraction    # common dyadic arc length
    atoms: Tuple[Atom, ...]
    w_total: Fraction
    Z: Fraction

    def block_mass(self, i: int) -> Fraction:
        return sum((a.w for a in self.atoms if a.i == i), Fraction(0))

    def normalized_atom_mass(self) -> Fraction:
        return self.w_total / self.Z

    def floor_density(self) -> Fraction:
        return self.eta + self.tail_mass


def assemble_mu(stack: CocycleStack, seq: DigitSequence, i_max: int = 32,
                depth: int = 6, mass_bits: int = 192,
                eta: Fraction = Fraction(1, 1 << 40)) -> WeightedAtomMeasure:
    """Build the atomic measure: for every |i| <= i_max and every depth-d
    cylinder, one arc of the common dyadic length carrying the pinned mass
    2^-depth * exp(S_i.hi) with S_i the one-sided Birkhoff enclosure."""
    if depth > seq.depth:
        raise DepthTooLarge(f"depth {depth} exceeds digit sequence depth "
                            f"{seq.depth}", depth=depth)
    if i_max > 2 * (1 << stack.n_max):
        raise BudgetExceeded(
            f"translate range {i_max} exceeds the one-sided Birkhoff range "
            f"{2 * (1 << stack.n_max)}", i_max=i_max)
    n_atoms = (2 * i_max + 1) << depth
    if n_atoms > _ATOM_BUDGET:
        raise BudgetExceeded(f"{n_atoms} atoms exceed budget {_ATOM_BUDGET}",
                             atoms=n_atoms)
    if eta <= 0:
        raise ValueError("eta must be positive")

    ctx = AlphaContext(seq.profile.alpha)
    cov = cover(seq, depth)
    lefts = cov.left_endpoints()
    arc_len = dyadic_cover_length(seq, depth)
    # padding to a dyadic length must not merge adjacent cylinders
    for c, c_next in zip(lefts, lefts[1:] + [lefts[0] + 1]):
        assert c_next - c > arc_len, "dyadic padding would overlap cylinders"

    tail_mass = ideal_weight_tail(i_max)
    cyl_mass = Fraction(1, 1 << depth)
    atoms: List[Atom] = []
    w_total = Fraction(0)
    for code, c in zip(cov.codes, lefts):
        rep = CirclePoint(PrecisionReal(c, c + arc_len))
        birk = birkhoff_range(stack, rep, i_max, code_point=True)
        for i in range(-i_max, i_max + 1):
            s = birk[i]
            upper = exp_enclosure(PrecisionReal.exact(s.hi), mass_bits + 16)
            w = round_dyadic(upper.hi, mass_bits) * cyl_mass
            assert w > 0, "pinned mass underflowed to zero"
            mass = exp_enclosure(s, mass_bits) * cyl_mass
            start = ctx.reduce_mod1(LinForm.of(c, i))
            atoms.append(Atom(i=i, code=tuple(code), base=c, start=start,
                              w=w, s_lo=s.lo, s_hi=s.hi,
                              mass_lo=mass.lo, mass_hi=mass.hi))
            w_total += w

    zero_block = sum((a.w for a in atoms if a.i == 0), Fraction(0))
    assert zero_block == 1, "i=0 masses must sum to 1 exactly"
    Z = w_total + eta + tail_mass
    return WeightedAtomMeasure(
        seq=seq, stack=stack, i_max=i_max, depth=depth, mass_bits=mass_bits,
        eta=eta, tail_mass=tail_mass, arc_length=arc_len,
        atoms=tuple(atoms), w_total=w_total, Z=Z)


# ---------------------------------------------------------------------------
# the CDF and the conjugated diffeomorphism


@dataclass
class ConjugacyDescriptor:
    """The measure together with its exact CDF data.

    Segments are the maximal intervals between consecutive breakpoints
    `pos[j]`; on segment j the unnormalized density is the rational
    `dens[j]` and the unnormalized CDF is `cum[j] + dens[j]*(y - pos[j])`.
    `cum[-1] == Z` exactly; G = cum/Z is a strictly increasing bijection of
    [0, 1] with G(0) = 0 and G(1) = 1.
    """

    measure: WeightedAtomMeasure
    ctx: AlphaContext
    pos: List[LinForm]
    dens: List[Fraction]
    cum: List[LinForm]
    pos_floats: List[float]
    cum_floats: List[float]
    atom_starts: List[Tuple[LinForm, int]]  # sorted (start, atom index)
    atom_start_floats: List[float]

    @property
    def Z(self) -> Fraction:
        return self.measure.Z

    # -- segment location ------------------------------------------------

    def _walk(self, forms: List[LinForm], j: int, f: LinForm) -> int:
        j = min(max(j, 0), len(forms) - 2)
        while j > 0 and self.ctx.compare(f, forms[j]) < 0:
            j -= 1
        while j < len(forms) - 2 and self.ctx.compare(f, forms[j + 1]) >= 0:
            j += 1
        return j

    def locate_y(self, f: LinForm) -> int:
        """Index j with pos[j] <= f < pos[j+1] (f in [0, 1))."""
        j = bisect.bisect_right(self.pos_floats, self.ctx.float_key(f)) - 1
        return self._walk(self.pos, j, f)

    def _locate_cum(self, t: LinForm) -> int:
        j = bisect.bisect_right(self.cum_floats, self.ctx.float_key(t)) - 1
        return self._walk(self.cum, j, t)

    def locate_atom(self, y: LinForm) -> Optional[int]:
        """Index of the atom whose arc contains y, or None (floor region)."""
        j = bisect.bisect_right(self.atom_start_floats,
                                self.ctx.float_key(y)) - 1
        j = min(max(j, 0), len(self.atom_starts) - 1)
        while j > 0 and self.ctx.compare(y, self.atom_starts[j][0]) < 0:
            j -= 1
        while (j < len(self.atom_starts) - 1
               and self.ctx.compare(y, self.atom_starts[j + 1][0]) >= 0):
            j += 1
        start, idx = self.atom_starts[j]
        if (self.ctx.compare(y, start) >= 0
                and self.ctx.sign((start + self.measure.arc_length) - y) > 0):
            return idx
        return None

    # -- exact maps --------------------------------------------------------

    def cdf(self, f: LinForm) -> LinForm:
        """G(f) for f in [0, 1]: the normalized measure of [0, f)."""
        if self.ctx.compare(f, ONE) == 0:
            return ONE
        j = self.locate_y(f)
        g = self.cum[j] + (f - self.pos[j]).scale(self.dens[j])
        return g.scale(Fraction(1, 1) / self.Z)

    def quantile(self, u: LinForm) -> LinForm:
        """G^{-1}(u) for u in [0, 1]."""
        if self.ctx.compare(u, ONE) == 0:
            return ONE
        t = u.scale(self.Z)
        j = self._locate_cum(t)
        return self.pos[j] + (t - self.cum[j]).scale(1 / self.dens[j])

    def h(self, f: LinForm) -> LinForm:
        """The conjugacy to rotation coordinates: h = G^{-1}."""
        return self.quantile(f)

    def h_inverse(self, f: LinForm) -> LinForm:
        return self.cdf(f)

    def diffeo(self, f: LinForm) -> LinForm:
        """F(f) = G(R_alpha(G^{-1}(f))): the conjugated diffeomorphism."""
        z = self.quantile(f) + LinForm.of(0, 1)
        if self.ctx.compare(z, ONE) >= 0:
            z = z - 1
        return self.cdf(z)

    # -- numeric wrappers on circle points ---------------------------------

    def _point_map(self, x: CirclePoint, exact_map, bits: int) -> CirclePoint:
        lo = exact_map(LinForm.of(x.rep.lo))
        hi = exact_map(LinForm.of(x.rep.hi))
        return CirclePoint(PrecisionReal(self.ctx.enclosure(lo, bits).lo,
                                         self.ctx.enclosure(hi, bits).hi))

    def diffeo_point(self, x: CirclePoint, bits: int = 192) -> CirclePoint:
        """Enclosure of F(x) for a numeric circle point (monotone in the
        endpoints; the endpoints must not straddle 0)."""
        return self._point_map(x, self.diffeo, bits)

    def h_point(self, x: CirclePoint, bits: int = 192) -> CirclePoint:
        return self._point_map(x, self.quantile, bits)

    # -- lifts --------------------------------------------------------------

    def lift(self, x: LinForm) -> LinForm:
        """The canonical lift of F (agrees with diffeo on [0, 1))."""
        n = self.ctx.floor(x)
        u = x - n
        z = self.quantile(u) + LinForm.of(0, 1)
        if self.ctx.compare(z, ONE) >= 0:
            return self.cdf(z - 1) + (n + 1)
        return self.cdf(z) + n

    def lift_iterated(self, x0: LinForm, k: int) -> LinForm:
        """lift^k(x0) in closed form: the quantile coordinate advances
        rigidly, so lift^k(x0) = floor(y0 + k alpha) + G(frac(y0 + k alpha))
        with y0 = G^{-1}(x0).  O(1) in k."""
        if k < 0:
            raise ValueError("k must be >= 0")
        n = self.ctx.floor(x0)
        y = self.quantile(x0 - n) + LinForm.of(0, k)
        m = self.ctx.floor(y)
        return self.cdf(y - m) + (m + n)


def build_descriptor(measure: WeightedAtomMeasure) -> ConjugacyDescriptor:
    """Sweep the arc endpoints into the exact segment table of the CDF."""
    ctx = AlphaContext(measure.seq.profile.alpha)
    L = measure.arc_length
    floor_dens = measure.floor_density()

    deltas: Dict[Tuple[Fraction, Fraction], Tuple[LinForm, Fraction]] = {}

    def add(pos: LinForm, delta: Fraction) -> None:
        key = (pos.a, pos.b)
        cur = deltas.get(key)
        deltas[key] = (pos, delta if cur is None else cur[1] + delta)

    add(ZERO, floor_dens)
    add(ONE, -floor_dens)
    for atom in measure.atoms:
        d = atom.w / L
        end = atom.start + L
        if ctx.compare(end, ONE) <= 0:
            add(atom.start, d)
            add(end, -d)
        else:  # arc wraps through 1
            add(atom.start, d)
            add(ONE, -d)
            add(ZERO, d)
            add(end - 1, -d)

    events = ctx.sort_forms(list(deltas.values()), key=lambda e: e[0])
    assert events[0][0] == ZERO and events[-1][0] == ONE

    pos: List[LinForm] = []
    dens: List[Fraction] = []
    running = Fraction(0)
    for p, delta in events[:-1]:
        pos.append(p)
        running += delta
        assert running > 0, "density must stay positive"
        dens.append(running)
    assert running + events[-1][1] == 0, "density deltas must cancel"
    pos.append(ONE)

    cum: List[LinForm] = [ZERO]
    for j in range(len(dens)):
        cum.append(cum[j] + (pos[j + 1] - pos[j]).scale(dens[j]))
    total = cum[-1]
    assert total.b == 0 and total.a == measure.Z, \
        "CDF total mass must equal Z exactly"

    starts = ctx.sort_forms(
        [(a.start, idx) for idx, a in enumerate(measure.atoms)],
        key=lambda e: e[0])
    return ConjugacyDescriptor(
        measure=measure, ctx=ctx, pos=pos, dens=dens, cum=cum,
        pos_floats=[ctx.float_key(p) for p in pos],
        cum_floats=[ctx.float_key(c) for c in cum],
        atom_starts=starts,
        atom_start_floats=[ctx.float_key(s) for s, _ in starts])


def build_conjugacy(stack: CocycleStack, seq: DigitSequence, i_max: int = 32,
                    depth: int = 6, mass_bits: int = 192,
                    eta: Fraction = Fraction(1, 1 << 40)
                    ) -> ConjugacyDescriptor:
    return build_descriptor(assemble_mu(stack, seq, i_max, depth,
                                        mass_bits, eta))


# ---------------------------------------------------------------------------
# derivative consistency


@dataclass(frozen=True)
class DerivativeSample:
    x: Fraction
    step: Fraction
    atom_i: Optional[int]            # translate index of the arc h(x) hits
    fd_lo: Fraction
    fd_hi: Fraction
    predicted_lo: Fraction
    predicted_hi: Fraction
    gap: Fraction                    # certified upper bound on |FD - exp(phi)|


def F_derivative_check(desc: ConjugacyDescriptor, x: Fraction,
                       step: Fraction, bits: int = 512) -> DerivativeSample:
    """Symmetric finite difference of F at x against the predicted
    derivative exp(phi(h(x))) of the truncated cocycle."""
    ctx = desc.ctx
    fd = (desc.diffeo(LinForm.of(x + step))
          - desc.diffeo(LinForm.of(x - step))).scale(Fraction(1, 2) / step)
    y = desc.quantile(LinForm.of(x))
    atom = desc.locate_atom(y)
    atom_i = None if atom is None else desc.measure.atoms[atom].i
    y_pt = CirclePoint(ctx.enclosure(y, bits))
    pred = exp_enclosure(phi(desc.measure.stack, y_pt, include_tail=False),
                         bits)
    fd_enc = ctx.enclosure(fd, bits)
    diff = fd_enc - pred
    gap = max(abs(diff.lo), abs(diff.hi))
    return DerivativeSample(x=x, step=step, atom_i=atom_i,
                            fd_lo=fd_enc.lo, fd_hi=fd_enc.hi,
                            predicted_lo=pred.lo, predicted_hi=pred.hi,
                            gap=gap)


def _clearance(desc: ConjugacyDescriptor, x: Fraction) -> Fraction:
    """Distance from x to the nearest breakpoint of F (certified lower
    bound): F is linear between consecutive images of segment endpoints on
    both the quantile side and the shifted side."""
    ctx = desc.ctx
    Z = desc.Z
    xf = LinForm.of(x)
    t = xf.scale(Z)
    j = desc._locate_cum(t)
    inv_z = Fraction(1, 1) / Z
    bounds = [xf - desc.cum[j].scale(inv_z),
              desc.cum[j + 1].scale(inv_z) - xf]
    y = desc.pos[j] + (t - desc.cum[j]).scale(1 / desc.dens[j])
    sigma = desc.dens[j] / Z  # dx = sigma * dy along this segment
    z = y + LinForm.of(0, 1)
    if ctx.compare(z, ONE) >= 0:
        z = z - 1
    m = desc.locate_y(z)
    bounds.append((z - desc.pos[m]).scale(sigma))
    bounds.append((desc.pos[m + 1] - z).scale(sigma))
    clearance = None
    for b in bounds:
        lo = ctx.enclosure(b, 512).lo
        if clearance is None or lo < clearance:
            clearance = lo
    if clearance <= 0:
        raise NotCertifiable(
            f"grid point {x} sits on a breakpoint of F; clearance "
            f"lower bound {clearance} is not positive")
    return clearance


def _pow2_at_most(c: Fraction, cap_bits: int = 12) -> Fraction:
    """Largest power of two 2^-t (t >= cap_bits) that is <= c."""
    t = cap_bits
    while Fraction(1, 1 << t) > c:
        t += 1
        if t > 4096:
            raise NotCertifiable(f"clearance {float(c)} too small")
    return Fraction(1, 1 << t)


@dataclass(frozen=True)
class StageMetrics:
    depth: int
    mass_bits: int
    max_gap: Fraction
    max_gap_at: Fraction
    edge_hits: int          # grid points landing on |i| == i_max arcs
    floor_hits: int         # grid points landing outside every arc


@dataclass(frozen=True)
class DerivativeStudy:
    grid: int
    i_max: int
    stages: Tuple[StageMetrics, ...]
    strictly_decreasing: bool
    final_max_gap: Fraction


def derivative_consistency_study(
        stack: CocycleStack, seq: DigitSequence,
        stages: Sequence[Tuple[int, int]] = ((4, 96), (5, 144), (6, 192)),
        grid: int = 1024, i_max: int = 32,
        eta: Fraction = Fraction(1, 1 << 40)) -> DerivativeStudy:
    """Finite-difference derivative of F against exp(phi(h(x))) on an
    offset uniform grid, across refinement stages (increasing cylinder
    depth and mass precision, with the per-point step halved each stage)."""
    descs = [build_conjugacy(stack, seq, i_max, d, mb, eta)
             for d, mb in stages]
    metrics = []
    per_stage_max = [Fraction(0)] * len(descs)
    per_stage_argmax = [Fraction(0)] * len(descs)
    edge_hits = [0] * len(descs)
    floor_hits = [0] * len(descs)
    for j in range(grid):
        x = Fraction(2 * j + 1, 2 * grid)
        base = None
        for desc in descs:
            c = _clearance(desc, x) / 4
            if base is None or c < base:
                base = c
        step0 = _pow2_at_most(base)
        for s, desc in enumerate(descs):
            sample = F_derivative_check(desc, x, step0 / (1 << s))
            if sample.atom_i is None:
                floor_hits[s] += 1
            elif abs(sample.atom_i) == i_max:
                edge_hits[s] += 1
            if sample.gap > per_stage_max[s]:
                per_stage_max[s] = sample.gap
                per_stage_argmax[s] = x
    for s, (d, mb) in enumerate(stages):
        metrics.append(StageMetrics(depth=d, mass_bits=mb,
                                    max_gap=per_stage_max[s],
                                    max_gap_at=per_stage_argmax[s],
                                    edge_hits=edge_hits[s],
                                    floor_hits=floor_hits[s]))
    decreasing = all(per_stage_max[s + 1] < per_stage_max[s]
                     for s in range(len(descs) - 1))
    return DerivativeStudy(grid=grid, i_max=i_max, stages=tuple(metrics),
                           strictly_decreasing=decreasing,
                           final_max_gap=per_stage_max[-1])


# ---------------------------------------------------------------------------
# fundamental-domain report


@dataclass(frozen=True)
class FundamentalDomainReport:
    i_max: int
    depth: int
    atom_mass: Fraction            # normalized mass carried by the atoms
    unassigned: Fraction           # (eta + tail) / Z
    sharp_tail: Fraction           # all-levels bound used for the tail mass
    block_tail: Fraction           # coarser dyadic-block series bound
    tail_certified: bool           # unassigned <= block_tail
    core_lebesgue: Fraction        # Lebesgue measure of the image of C'
    image_range: int
    min_image_gap: Fraction        # certified min gap between F^i C' arcs
    preimage: DisjointnessReport   # independent route: translated covers
    block_masses: Dict[int, Fraction]


def fundamental_domain_report(desc: ConjugacyDescriptor,
                              image_range: int = 8,
                              d_max: int = 24) -> FundamentalDomainReport:
    """Certify the fundamental-domain structure carried by the measure:
    normalized atom masses, tail bounds, and pairwise disjointness of the
    images F^i(C') for |i| <= image_range."""
    m = desc.measure
    ctx = desc.ctx
    L = m.arc_length
    atom_mass = m.w_total / m.Z
    unassigned = (m.eta + m.tail_mass) / m.Z
    block_tail = block_tail_bound(m.i_max)

    floor_dens = m.floor_density()
    core = sum(((a.w + floor_dens * L) / m.Z
                for a in m.atoms if a.i == 0), Fraction(0))

    arcs = [(a.start, a.i) for a in m.atoms if abs(a.i) <= image_range]
    arcs = ctx.sort_forms(arcs, key=lambda e: e[0])
    min_gap: Optional[Fraction] = None
    for (s1, _), (s2, _) in zip(arcs, arcs[1:] + [(arcs[0][0] + 1, None)]):
        gap = s2 - (s1 + L)
        if ctx.sign(gap) <= 0:
            raise NotCertifiable(
                "translated cylinder arcs overlap; fundamental-domain "
                "images are not disjoint")
        lo = ctx.enclosure(gap, 256).lo
        if min_gap is None or lo < min_gap:
            min_gap = lo

    preimage = verify_translate_disjointness(m.seq, image_range, d_max)
    block_masses = {i: m.block_mass(i) / m.Z
                    for i in range(-m.i_max, m.i_max + 1)}
    return FundamentalDomainReport(
        i_max=m.i_max, depth=m.depth, atom_mass=atom_mass,
        unassigned=unassigned, sharp_tail=m.tail_mass,
        block_tail=block_tail, tail_certified=unassigned <= block_tail,
        core_lebesgue=core, image_range=image_range, min_image_gap=min_gap,
        preimage=preimage, block_masses=block_masses)


# ---------------------------------------------------------------------------
# rotation number


@dataclass(frozen=True)
class RotationEstimate:
    x0: Fraction
    iterations: int
    estimate_lo: Fraction
    estimate_hi: Fraction
    alpha_lo: Fraction
    alpha_hi: Fraction
    deviation: Fraction      # certified upper bound on |estimate - alpha|


def rotation_number_estimate(desc: ConjugacyDescriptor,
                             x0: Fraction = Fraction(0),
                             iterations: int = 10 ** 4,
                             bits: int = 256) -> RotationEstimate:
    """(lift^k(x0) - x0) / k with the lift iterated in closed form.

    For x0 = 0 the estimate satisfies |estimate - alpha| <= 0.5/k; for
    generic x0 only the 2/k displacement bound applies.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    lifted = desc.lift_iterated(LinForm.of(x0), iterations)
    est = (lifted - x0).scale(Fraction(1, iterations))
    est_enc = desc.ctx.enclosure(est, bits)
    al = desc.ctx.alpha(bits)
    diff = est_enc - al
    return RotationEstimate(
        x0=x0, iterations=iterations,
        estimate_lo=est_enc.lo, estimate_hi=est_enc.hi,
        alpha_lo=al.lo, alpha_hi=al.hi,
        deviation=max(abs(diff.lo), abs(diff.hi)))
