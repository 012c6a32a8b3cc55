"""CLI orchestration: build construction descriptors from a config, verify
them with the certified suites, export evaluation grids (CSV plus a rendered
figure), and inspect persisted descriptors.

Checks are independent of each other; this runner executes them in sorted
name order so that reports are deterministic.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field, fields, replace
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .cantor import (DigitSequence, build_digit_sequence, cover,
                     verify_translate_disjointness)
from .cocycle import (CocycleStack, birkhoff_range, bound_M, build_stack,
                      level_birkhoff, phi, sum_exp_birkhoff)
from .conjugacy import (AlphaContext, Atom, ConjugacyDescriptor, LinForm,
                        WeightedAtomMeasure, ZERO, ONE, assemble_mu,
                        build_descriptor, derivative_consistency_study,
                        dyadic_cover_length, fundamental_domain_report,
                        rotation_number_estimate)
from .diophantine import ApproximationProfile, make_profile, parse_alpha_spec
from .errors import (ConstructionError, DisjointnessUndecided,
                     PrecisionExhausted, ToleranceNotMet)
from .numerics import CirclePoint, PrecisionReal, exp_enclosure

DESCRIPTOR_SCHEMA = "circlefd-descriptor/1"
REPORT_SCHEMA = "circlefd-report/1"
CACHE_ENV = "CIRCLEFD_CACHE_DIR"

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_UNDECIDED = 3


class UsageError(Exception):
    """Bad command-line or config input; maps to exit code 2."""


# ---------------------------------------------------------------------------
# configuration


def _parse_fraction(text: str) -> Fraction:
    text = text.strip()
    try:
        if "/" in text:
            return Fraction(text)
        return Fraction(Decimal(text))
    except (ValueError, ArithmeticError) as e:
        raise UsageError(f"cannot parse rational value {text!r}: {e}")


def _render_fraction(fr: Fraction) -> str:
    if fr.denominator == 1:
        return str(fr.numerator)
    return f"{fr.numerator}/{fr.denominator}"


_INT_KEYS = ("seq_terms", "n_max", "depth", "i_max", "d_max", "mass_bits",
             "eta_bits", "grid", "rotation_iterations", "disjoint_range",
             "image_range", "sample_count", "seed")
_FRACTION_KEYS = ("rotation_x0", "tol_lemma_width", "tol_decay_slack",
                  "tol_derivative", "tol_rotation", "min_atom_mass")
_INTLIST_KEYS = ("precision_ladder", "stage_depths", "stage_mass_bits")
_STR_KEYS = ("alpha", "path", "out_descriptor")


@dataclass(frozen=True)
class BuildConfig:
    """Flat key=value build configuration; all budgets are counts, all
    *_bits keys are binary digits, tolerances are dimensionless rationals."""

    alpha: str = "golden"
    path: str = "auto"
    out_descriptor: str = "descriptor.json"
    seq_terms: int = 6
    n_max: int = 4
    depth: int = 6
    i_max: int = 32
    d_max: int = 24
    mass_bits: int = 192
    eta_bits: int = 40
    grid: int = 1024
    rotation_iterations: int = 10 ** 4
    disjoint_range: int = 16
    image_range: int = 8
    sample_count: int = 50
    seed: int = 20260815
    rotation_x0: Fraction = Fraction(0)
    tol_lemma_width: Fraction = Fraction(1, 10 ** 9)
    tol_decay_slack: Fraction = Fraction(1, 10)
    tol_derivative: Fraction = Fraction(1, 20)
    tol_rotation: Fraction = Fraction(1, 10 ** 4)
    min_atom_mass: Fraction = Fraction(99, 100)
    precision_ladder: Tuple[int, ...] = (64, 128, 256, 512)
    stage_depths: Tuple[int, ...] = (4, 5, 6)
    stage_mass_bits: Tuple[int, ...] = (96, 144, 192)

    # -- parsing / rendering ------------------------------------------------

    @staticmethod
    def parse_value(key: str, text: str):
        text = text.strip()
        if key in _INT_KEYS:
            try:
                return int(text)
            except ValueError:
                raise UsageError(f"config key {key} expects an integer, "
                                 f"got {text!r}")
        if key in _FRACTION_KEYS:
            return _parse_fraction(text)
        if key in _INTLIST_KEYS:
            try:
                return tuple(int(v) for v in text.split(",") if v.strip())
            except ValueError:
                raise UsageError(f"config key {key} expects a comma list "
                                 f"of integers, got {text!r}")
        if key in _STR_KEYS:
            return text
        raise UsageError(f"unknown config key {key!r}")

    @staticmethod
    def render_value(key: str, value) -> str:
        if key in _FRACTION_KEYS:
            return _render_fraction(value)
        if key in _INTLIST_KEYS:
            return ",".join(str(v) for v in value)
        return str(value)

    def with_overrides(self, pairs: Sequence[str]) -> "BuildConfig":
        updates = {}
        for pair in pairs:
            if "=" not in pair:
                raise UsageError(f"override {pair!r} is not key=value")
            key, _, text = pair.partition("=")
            key = key.strip()
            updates[key] = BuildConfig.parse_value(key, text)
        return replace(self, **updates)

    @classmethod
    def from_mapping(cls, mapping: Dict[str, str]) -> "BuildConfig":
        updates = {k: cls.parse_value(k, v) for k, v in mapping.items()}
        return cls(**updates)

    @classmethod
    def from_file(cls, path) -> "BuildConfig":
        mapping: Dict[str, str] = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, _, text = line.partition("=")
            mapping[key.strip()] = text.strip()
        return cls.from_mapping(mapping)

    def to_dict(self) -> Dict[str, str]:
        return {f.name: BuildConfig.render_value(f.name, getattr(self, f.name))
                for f in fields(self)}

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in sorted(self.to_dict().items()))

    def eta(self) -> Fraction:
        return Fraction(1, 1 << self.eta_bits)

    def validate(self) -> None:
        counts = ("seq_terms", "n_max", "depth", "i_max", "d_max",
                  "mass_bits", "eta_bits", "grid", "rotation_iterations",
                  "disjoint_range", "image_range", "sample_count")
        for key in counts:
            if getattr(self, key) < 1:
                raise UsageError(f"config key {key} must be >= 1")
        if self.seed < 0:
            raise UsageError("seed must be >= 0")
        for key in ("tol_lemma_width", "tol_decay_slack", "tol_derivative",
                    "tol_rotation"):
            if getattr(self, key) <= 0:
                raise UsageError(f"tolerance {key} must be > 0")
        if not 0 < self.min_atom_mass < 1:
            raise UsageError("min_atom_mass must lie in (0, 1)")
        if self.path not in ("auto", "fast", "general"):
            raise UsageError("path must be auto, fast or general")
        if self.depth > self.seq_terms:
            raise UsageError("depth cannot exceed seq_terms")
        if len(self.stage_depths) != len(self.stage_mass_bits) \
                or not self.stage_depths:
            raise UsageError("stage_depths and stage_mass_bits must be "
                             "non-empty lists of equal length")
        if any(d > self.seq_terms for d in self.stage_depths):
            raise UsageError("stage depths cannot exceed seq_terms")
        if list(self.precision_ladder) != sorted(set(self.precision_ladder)) \
                or not self.precision_ladder \
                or self.precision_ladder[0] < 1:
            raise UsageError("precision_ladder must be strictly increasing "
                             "positive integers")


# ---------------------------------------------------------------------------
# build pipeline and descriptor (de)serialization


@dataclass
class Artifacts:
    config: BuildConfig
    profile: ApproximationProfile
    seq: DigitSequence
    stack: CocycleStack
    measure: WeightedAtomMeasure


def build_artifacts(cfg: BuildConfig) -> Artifacts:
    cfg.validate()
    spec = parse_alpha_spec(cfg.alpha)
    profile = make_profile(spec, quotients=8)
    seq = build_digit_sequence(profile, cfg.seq_terms, cfg.path)
    stack = build_stack(seq, cfg.n_max, cfg.d_max)
    measure = assemble_mu(stack, seq, cfg.i_max, cfg.depth, cfg.mass_bits,
                          cfg.eta())
    return Artifacts(config=cfg, profile=profile, seq=seq, stack=stack,
                     measure=measure)


def descriptor_payload(art: Artifacts) -> dict:
    seq, stack, m = art.seq, art.stack, art.measure
    spec = parse_alpha_spec(art.config.alpha)
    return {
        "schema": DESCRIPTOR_SCHEMA,
        "config": art.config.to_dict(),
        "alpha": {"kind": spec.kind, "canonical": spec.canonical()},
        "digit_sequence": {
            "provenance": seq.provenance,
            "q": [str(v) for v in seq.q],
            "p_values": [str(v) for v in seq.p_values],
        },
        "levels": [{
            "n": lv.n,
            "amplitude": _render_fraction(lv.amplitude),
            "cover_depth": lv.cover_depth,
            "epsilon": _render_fraction(lv.epsilon),
            "translate_range": lv.translate_range,
            "arc_length": _render_fraction(lv.arc_length),
            "gap": _render_fraction(lv.gap),
            "centers": len(lv.centers),
        } for lv in stack.levels],
        "measure": {
            "i_max": m.i_max,
            "depth": m.depth,
            "mass_bits": m.mass_bits,
            "eta": _render_fraction(m.eta),
            "tail_mass": _render_fraction(m.tail_mass),
            "arc_length": _render_fraction(m.arc_length),
            "w_total": _render_fraction(m.w_total),
            "Z": _render_fraction(m.Z),
            "atoms": [{"i": a.i,
                       "code": "".join(str(b) for b in a.code),
                       "w": _render_fraction(a.w)} for a in m.atoms],
        },
    }


def descriptor_bytes(payload: dict) -> bytes:
    return (json.dumps(payload, sort_keys=True,
                       separators=(",", ":")) + "\n").encode()


def load_descriptor(path) -> Tuple[dict, BuildConfig]:
    """Load and structurally validate a descriptor: schema, atom counts,
    positivity and the exact normalization identities."""
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read descriptor {path}: {e}")
    if payload.get("schema") != DESCRIPTOR_SCHEMA:
        raise UsageError(f"descriptor schema {payload.get('schema')!r} "
                         f"is not {DESCRIPTOR_SCHEMA!r}")
    cfg = BuildConfig.from_mapping(payload["config"])
    cfg.validate()
    meas = payload["measure"]
    atoms = meas["atoms"]
    expected = (2 * meas["i_max"] + 1) << meas["depth"]
    if len(atoms) != expected:
        raise ToleranceNotMet(
            f"descriptor holds {len(atoms)} atoms, expected {expected}")
    w_total = Fraction(0)
    zero_block = Fraction(0)
    for a in atoms:
        w = Fraction(a["w"])
        if w <= 0:
            raise ToleranceNotMet(
                f"atom mass {a['w']} at i={a['i']} code={a['code']} "
                f"is not positive")
        w_total += w
        if a["i"] == 0:
            zero_block += w
    if w_total != Fraction(meas["w_total"]):
        raise ToleranceNotMet("atom masses do not sum to the stored total")
    if zero_block != 1:
        raise ToleranceNotMet("central-block masses do not sum to 1")
    Z = Fraction(meas["Z"])
    if Z != w_total + Fraction(meas["eta"]) + Fraction(meas["tail_mass"]):
        raise ToleranceNotMet(
            "stored normalizer Z does not equal w_total + eta + tail_mass")
    return payload, cfg


def rebuild_sequence(payload: dict, cfg: BuildConfig
                     ) -> Tuple[ApproximationProfile, DigitSequence,
                                CocycleStack]:
    """Deterministically rebuild the digit sequence and cocycle stack from
    the stored config, cross-checking against the stored digits."""
    spec = parse_alpha_spec(cfg.alpha)
    profile = make_profile(spec, quotients=8)
    seq = build_digit_sequence(profile, cfg.seq_terms, cfg.path)
    stored_q = [int(v) for v in payload["digit_sequence"]["q"]]
    if list(seq.q) != stored_q:
        raise ToleranceNotMet("rebuilt digit sequence disagrees with the "
                              "descriptor; file corrupt or version skew")
    stack = build_stack(seq, cfg.n_max, cfg.d_max)
    return profile, seq, stack


def measure_from_payload(payload: dict, cfg: BuildConfig, seq: DigitSequence,
                         stack: CocycleStack) -> WeightedAtomMeasure:
    """Reconstruct the measure object from stored atom masses (ideal-mass
    enclosures are not persisted; verification recomputes them)."""
    meas = payload["measure"]
    depth = meas["depth"]
    ctx = AlphaContext(seq.profile.alpha)
    arc_len = Fraction(meas["arc_length"])
    if arc_len != dyadic_cover_length(seq, depth):
        raise ToleranceNotMet("stored arc length disagrees with rebuild")
    atoms = []
    w_total = Fraction(0)
    for a in meas["atoms"]:
        code = tuple(int(ch) for ch in a["code"])
        if len(code) != depth:
            raise ToleranceNotMet(f"atom code {a['code']!r} has wrong depth")
        base = sum((Fraction(bit, seq.q[n + 1])
                    for n, bit in enumerate(code)), Fraction(0))
        w = Fraction(a["w"])
        start = ctx.reduce_mod1(LinForm.of(base, a["i"]))
        atoms.append(Atom(i=a["i"], code=code, base=base, start=start, w=w))
        w_total += w
    return WeightedAtomMeasure(
        seq=seq, stack=stack, i_max=meas["i_max"], depth=depth,
        mass_bits=meas["mass_bits"], eta=Fraction(meas["eta"]),
        tail_mass=Fraction(meas["tail_mass"]), arc_length=arc_len,
        atoms=tuple(atoms), w_total=w_total, Z=Fraction(meas["Z"]))


# ---------------------------------------------------------------------------
# verification suites


@dataclass
class CheckResult:
    name: str
    suite: str
    status: str                      # pass | fail | undecided
    seconds: float
    values: Dict[str, str] = field(default_factory=dict)
    budgets: Dict[str, str] = field(default_factory=dict)


@dataclass
class VerifyContext:
    cfg: BuildConfig
    payload: dict
    seq: DigitSequence
    stack: CocycleStack
    measure: WeightedAtomMeasure          # from stored atom masses
    descriptor: ConjugacyDescriptor
    memo: dict = field(default_factory=dict)


def _sample_codes(cfg: BuildConfig) -> List[Tuple[int, ...]]:
    import random
    rng = random.Random(cfg.seed)
    return [tuple(rng.randrange(2) for _ in range(cfg.depth))
            for _ in range(cfg.sample_count)]


def _sample_points(ctx: VerifyContext) -> List[CirclePoint]:
    pts = ctx.memo.get("sample_points")
    if pts is None:
        seq, cfg = ctx.seq, ctx.cfg
        L = dyadic_cover_length(seq, cfg.depth)
        pts = []
        for code in _sample_codes(cfg):
            c = sum((Fraction(bit, seq.q[n + 1])
                     for n, bit in enumerate(code)), Fraction(0))
            pts.append(CirclePoint(PrecisionReal(c, c + L)))
        ctx.memo["sample_points"] = pts
    return pts


def _check_lemma_equality(ctx: VerifyContext):
    cfg, stack = ctx.cfg, ctx.stack
    alpha = stack.alpha
    max_width = Fraction(0)
    checked = 0
    for pt in _sample_points(ctx):
        for level in stack.levels:
            target_unit = Fraction(3, 4) ** level.n
            for i in range(-level.translate_range, level.translate_range + 1):
                enc = level_birkhoff(level, pt, i, alpha)
                target = -abs(i) * target_unit
                if not (enc.lo <= target <= enc.hi):
                    return "fail", {
                        "failed_at": f"n={level.n} i={i}",
                        "enclosure": f"[{float(enc.lo)!r},{float(enc.hi)!r}]",
                        "target": repr(float(target))}, {}
                max_width = max(max_width, enc.width)
                checked += 1
    status = "pass" if max_width <= cfg.tol_lemma_width else "fail"
    return status, {
        "checked": str(checked),
        "max_width": repr(float(max_width)),
        "tol_width": repr(float(cfg.tol_lemma_width)),
    }, {"samples": str(cfg.sample_count), "levels": str(cfg.n_max)}


def _check_lemma_decay(ctx: VerifyContext):
    cfg, stack = ctx.cfg, ctx.stack
    n_blocks = min(3, stack.n_max - 1)
    m_max = (1 << (n_blocks + 1)) - 1
    worst_margin = None
    max_slack = Fraction(0)
    checked = 0
    for pt in _sample_points(ctx):
        rng = birkhoff_range(stack, pt, m_max, code_point=True)
        for n in range(n_blocks + 1):
            bound = -Fraction(3, 4) * Fraction(3, 2) ** n
            for mag in range(1 << n, 1 << (n + 1)):
                for i in (mag, -mag):
                    enc = rng[i]
                    # upper endpoints are tail-free on C; the slack against
                    # the decay bound is the truncated interval width alone
                    slack = enc.width - abs(i) * stack.tail_bound
                    max_slack = max(max_slack, slack)
                    margin = bound + slack - enc.hi   # >= 0 required
                    if worst_margin is None or margin < worst_margin:
                        worst_margin = margin
                    checked += 1
    ok = worst_margin is not None and worst_margin >= 0
    # the slack must stay small relative to the weakest bound used
    slack_cap = cfg.tol_decay_slack * Fraction(3, 4) * Fraction(3, 2) ** 0
    if max_slack >= slack_cap:
        ok = False
    return ("pass" if ok else "fail"), {
        "checked": str(checked),
        "worst_margin": repr(float(worst_margin)),
        "max_slack": repr(float(max_slack)),
        "slack_cap": repr(float(slack_cap)),
    }, {"samples": str(cfg.sample_count), "blocks": str(n_blocks + 1)}


def _check_summability(ctx: VerifyContext):
    cfg, stack = ctx.cfg, ctx.stack
    M = bound_M()
    worst = Fraction(0)
    for pt in _sample_points(ctx):
        s = sum_exp_birkhoff(stack, pt, cfg.i_max, code_point=True, bits=128)
        worst = max(worst, s.hi)
        if s.hi > M.hi:
            return "fail", {"sum_hi": repr(float(s.hi)),
                            "M_hi": repr(float(M.hi))}, {}
    return "pass", {
        "max_sum": repr(float(worst)),
        "M": f"[{float(M.lo)!r},{float(M.hi)!r}]",
    }, {"samples": str(cfg.sample_count), "i_max": str(cfg.i_max)}


def _check_disjointness(ctx: VerifyContext):
    cfg = ctx.cfg
    report = verify_translate_disjointness(ctx.seq, cfg.disjoint_range,
                                           cfg.d_max)
    status = "pass" if report.min_gap.lo > 0 else "fail"
    return status, {
        "min_gap": repr(float(report.min_gap.lo)),
        "pairs": str(len(report.pairs)),
        "max_depth_used": str(report.max_depth_used),
    }, {"range": str(cfg.disjoint_range), "d_max": str(cfg.d_max)}


def _check_conjugacy_normalization(ctx: VerifyContext):
    cfg = ctx.cfg
    recomputed = assemble_mu(ctx.stack, ctx.seq, cfg.i_max, cfg.depth,
                             cfg.mass_bits, cfg.eta())
    stored = ctx.measure
    if len(recomputed.atoms) != len(stored.atoms):
        return "fail", {"reason": "atom count mismatch"}, {}
    for a, b in zip(recomputed.atoms, stored.atoms):
        if (a.i, a.code, a.w) != (b.i, b.code, b.w):
            return "fail", {
                "reason": "atom mass mismatch",
                "at": f"i={b.i} code={''.join(map(str, b.code))}"}, {}
    if recomputed.Z != stored.Z or recomputed.w_total != stored.w_total:
        return "fail", {"reason": "normalizer mismatch"}, {}
    return "pass", {
        "atoms": str(len(stored.atoms)),
        "Z": repr(float(stored.Z)),
        "atom_mass": repr(float(stored.normalized_atom_mass())),
    }, {"mass_bits": str(cfg.mass_bits)}


def _check_conjugacy_roundtrip(ctx: VerifyContext):
    desc = ctx.descriptor
    total = desc.cum[-1]
    if total.b != 0 or total.a != desc.Z:
        return "fail", {"reason": "CDF total mass differs from Z"}, {}
    if desc.cdf(ZERO) != ZERO or desc.cdf(ONE) != ONE:
        return "fail", {"reason": "CDF endpoint values"}, {}
    probes = [Fraction(1, 7), Fraction(2, 5), Fraction(9, 11),
              Fraction(63, 64)]
    for u in probes:
        y = desc.quantile(LinForm.of(u))
        back = desc.cdf(y)
        if back.b != 0 or back.a != u:
            return "fail", {"reason": f"round trip broke at u={u}"}, {}
    for atom in ctx.measure.atoms[:: max(1, len(ctx.measure.atoms) // 16)]:
        g = desc.cdf(atom.start)
        y = desc.quantile(g)
        if desc.ctx.compare(y, atom.start) != 0:
            return "fail", {"reason": f"round trip broke at atom start "
                                      f"i={atom.i}"}, {}
    return "pass", {"segments": str(len(desc.dens)),
                    "probes": str(len(probes))}, {}


def _check_conjugacy_monotone(ctx: VerifyContext):
    desc = ctx.descriptor
    n = 64
    prev = None
    for j in range(n + 1):
        val = desc.lift(LinForm.of(Fraction(j, n)))
        if prev is not None and desc.ctx.compare(val, prev) <= 0:
            return "fail", {"reason": f"lift not increasing at j={j}"}, {}
        prev = val
    return "pass", {"grid": str(n + 1)}, {}


def _check_derivative(ctx: VerifyContext):
    cfg = ctx.cfg
    stages = tuple(zip(cfg.stage_depths, cfg.stage_mass_bits))
    study = derivative_consistency_study(ctx.stack, ctx.seq, stages,
                                         cfg.grid, cfg.i_max, cfg.eta())
    values = {}
    for st in study.stages:
        values[f"max_gap_d{st.depth}"] = repr(float(st.max_gap))
        values[f"hits_d{st.depth}"] = (f"edge={st.edge_hits},"
                                       f"floor={st.floor_hits}")
    values["final_max_gap"] = repr(float(study.final_max_gap))
    values["tol"] = repr(float(cfg.tol_derivative))
    values["strictly_decreasing"] = str(study.strictly_decreasing)
    ok = (study.strictly_decreasing
          and study.final_max_gap < cfg.tol_derivative)
    return ("pass" if ok else "fail"), values, {
        "grid": str(cfg.grid),
        "stages": ",".join(f"d={d}:bits={b}" for d, b in stages)}


def _fd_report(ctx: VerifyContext):
    rep = ctx.memo.get("fd_report")
    if rep is None:
        rep = fundamental_domain_report(ctx.descriptor, ctx.cfg.image_range,
                                        ctx.cfg.d_max)
        ctx.memo["fd_report"] = rep
    return rep


def _check_fd_mass(ctx: VerifyContext):
    cfg = ctx.cfg
    rep = _fd_report(ctx)
    ok = (rep.atom_mass >= cfg.min_atom_mass and rep.tail_certified
          and rep.unassigned <= rep.block_tail)
    return ("pass" if ok else "fail"), {
        "atom_mass": repr(float(rep.atom_mass)),
        "min_atom_mass": repr(float(cfg.min_atom_mass)),
        "unassigned": repr(float(rep.unassigned)),
        "block_tail": repr(float(rep.block_tail)),
        "sharp_tail": repr(float(rep.sharp_tail)),
        "core_lebesgue": repr(float(rep.core_lebesgue)),
    }, {"i_max": str(cfg.i_max)}


def _check_fd_images(ctx: VerifyContext):
    rep = _fd_report(ctx)
    ok = rep.min_image_gap > 0 and rep.preimage.min_gap.lo > 0
    return ("pass" if ok else "fail"), {
        "min_image_gap": repr(float(rep.min_image_gap)),
        "preimage_min_gap": repr(float(rep.preimage.min_gap.lo)),
    }, {"image_range": str(rep.image_range)}


def _check_rotation(ctx: VerifyContext):
    cfg = ctx.cfg
    est = rotation_number_estimate(ctx.descriptor, cfg.rotation_x0,
                                   cfg.rotation_iterations)
    width = (est.estimate_hi - est.estimate_lo) + (est.alpha_hi - est.alpha_lo)
    ok = est.deviation <= cfg.tol_rotation + width
    return ("pass" if ok else "fail"), {
        "estimate": repr((float(est.estimate_lo) + float(est.estimate_hi)) / 2),
        "deviation": repr(float(est.deviation)),
        "tol": repr(float(cfg.tol_rotation)),
        "enclosure_width": repr(float(width)),
    }, {"iterations": str(cfg.rotation_iterations)}


_CHECKS = {
    "conjugacy.monotone": ("conjugacy", _check_conjugacy_monotone),
    "conjugacy.normalization": ("conjugacy", _check_conjugacy_normalization),
    "conjugacy.roundtrip": ("conjugacy", _check_conjugacy_roundtrip),
    "derivative.stages": ("derivative", _check_derivative),
    "disjointness.translates": ("disjointness", _check_disjointness),
    "fundamental-domain.images": ("fundamental-domain", _check_fd_images),
    "fundamental-domain.mass": ("fundamental-domain", _check_fd_mass),
    "lemma.decay": ("lemma", _check_lemma_decay),
    "lemma.equality": ("lemma", _check_lemma_equality),
    "rotation-number.estimate": ("rotation-number", _check_rotation),
    "summability.sum-exp": ("summability", _check_summability),
}

SUITES = tuple(sorted({suite for suite, _ in _CHECKS.values()}))


def run_suites(ctx: VerifyContext,
               suites: Sequence[str]) -> List[CheckResult]:
    unknown = sorted(set(suites) - set(SUITES))
    if unknown:
        raise UsageError(f"unknown suites: {', '.join(unknown)}; "
                         f"available: {', '.join(SUITES)}")
    wanted = set(suites)
    results = []
    for name in sorted(_CHECKS):
        suite, fn = _CHECKS[name]
        if suite not in wanted:
            continue
        t0 = time.monotonic()
        try:
            status, values, budgets = fn(ctx)
        except (DisjointnessUndecided, PrecisionExhausted) as e:
            status, values, budgets = "undecided", _error_values(e), {}
        except ConstructionError as e:
            status, values, budgets = "fail", _error_values(e), {}
        except AssertionError as e:
            status, values, budgets = "fail", {"reason": f"invariant "
                                               f"violated: {e}"}, {}
        results.append(CheckResult(name=name, suite=suite, status=status,
                                   seconds=round(time.monotonic() - t0, 3),
                                   values=values, budgets=budgets))
    return results


def _error_values(e: ConstructionError) -> Dict[str, str]:
    vals = {"error": type(e).__name__, "message": str(e)}
    for k, v in getattr(e, "payload", {}).items():
        vals[str(k)] = str(v)
    return vals


def report_payload(results: List[CheckResult],
                   suites: Sequence[str]) -> dict:
    if any(r.status == "fail" for r in results):
        overall, exit_code = "fail", EXIT_FAIL
    elif any(r.status == "undecided" for r in results):
        overall, exit_code = "undecided", EXIT_UNDECIDED
    else:
        overall, exit_code = "pass", EXIT_PASS
    return {
        "schema": REPORT_SCHEMA,
        "suites": sorted(set(suites)),
        "checks": [{
            "name": r.name, "suite": r.suite, "status": r.status,
            "wall_seconds": r.seconds, "values": r.values,
            "budgets": r.budgets,
        } for r in results],
        "overall": overall,
        "exit_code": exit_code,
    }


# ---------------------------------------------------------------------------
# export


def _export_rows(what: str, payload: dict, cfg: BuildConfig,
                 samples: int) -> List[Tuple[Fraction, Fraction, Fraction]]:
    _, seq, stack = rebuild_sequence(payload, cfg)
    rows = []
    if what == "phi":
        for j in range(samples + 1):
            x = Fraction(j, samples)
            enc = phi(stack, CirclePoint(PrecisionReal.exact(x)),
                      include_tail=True)
            rows.append((x, enc.mid, enc.width))
        return rows
    measure = measure_from_payload(payload, cfg, seq, stack)
    desc = build_descriptor(measure)
    for j in range(samples + 1):
        x = Fraction(j, samples)
        if what == "F":
            enc = desc.ctx.enclosure(desc.lift(LinForm.of(x)), 256)
        elif what == "cdf":
            enc = desc.ctx.enclosure(desc.cdf(LinForm.of(x)), 256)
        elif what == "derivative":
            y = desc.quantile(LinForm.of(x))
            pt = CirclePoint(desc.ctx.enclosure(y, 512))
            enc = exp_enclosure(phi(stack, pt, include_tail=True), 256)
        else:
            raise UsageError(f"unknown export kind {what!r}")
        rows.append((x, enc.mid, enc.width))
    return rows


def _write_csv(rows, out_path: Path) -> None:
    lines = ["x,value,width"]
    for x, value, width in rows:
        lines.append(f"{float(x)!r},{float(value)!r},{float(width)!r}")
    out_path.write_text("\n".join(lines) + "\n")


def _render_figure(rows, what: str, alpha_text: str, png_path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [float(x) for x, _, _ in rows]
    vs = [float(v) for _, v, _ in rows]
    ws = [float(w) for _, _, w in rows]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(xs, vs, lw=0.8, color="#13305f")
    if max(ws) > 0:
        lo = [v - w / 2 for v, w in zip(vs, ws)]
        hi = [v + w / 2 for v, w in zip(vs, ws)]
        ax.fill_between(xs, lo, hi, alpha=0.25, color="#5b84c4",
                        linewidth=0, label="enclosure")
        ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("x")
    ax.set_ylabel(what)
    ax.set_title(f"{what}  (alpha = {alpha_text})")
    fig.tight_layout()
    fig.savefig(png_path, dpi=160)
    plt.close(fig)


# ---------------------------------------------------------------------------
# commands


def _cache_path(cfg: BuildConfig) -> Optional[Path]:
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    digest = hashlib.sha256(
        (DESCRIPTOR_SCHEMA + "\n" + cfg.to_text()).encode()).hexdigest()
    return Path(root) / f"descriptor-{digest[:24]}.json"


def cmd_build(args) -> int:
    cfg = BuildConfig.from_file(args.config) if args.config else BuildConfig()
    cfg = cfg.with_overrides(args.set or [])
    cfg.validate()
    out = Path(args.out if args.out else cfg.out_descriptor)
    cached = _cache_path(cfg)
    if cached is not None and cached.is_file():
        blob = cached.read_bytes()
    else:
        art = build_artifacts(cfg)
        blob = descriptor_bytes(descriptor_payload(art))
        if cached is not None:
            cached.parent.mkdir(parents=True, exist_ok=True)
            cached.write_bytes(blob)
    out.write_bytes(blob)
    payload = json.loads(blob)
    meas = payload["measure"]
    print(f"wrote {out} ({len(meas['atoms'])} atoms, depth {meas['depth']}, "
          f"i_max {meas['i_max']}, alpha {payload['alpha']['canonical']})")
    return EXIT_PASS


def cmd_verify(args) -> int:
    payload, cfg = load_descriptor(args.descriptor)
    suites = []
    for item in (args.suite or []):
        suites.extend(s.strip() for s in item.split(",") if s.strip())
    if not suites:
        suites = list(SUITES)
    _, seq, stack = rebuild_sequence(payload, cfg)
    measure = measure_from_payload(payload, cfg, seq, stack)
    descriptor = build_descriptor(measure)
    ctx = VerifyContext(cfg=cfg, payload=payload, seq=seq, stack=stack,
                        measure=measure, descriptor=descriptor)
    results = run_suites(ctx, suites)
    report = report_payload(results, suites)
    Path(args.report).write_text(json.dumps(report, indent=2,
                                            sort_keys=True) + "\n")
    for r in results:
        summary = " ".join(f"{k}={v}" for k, v in sorted(r.values.items()))
        print(f"{r.status.upper():9s} {r.name} [{r.seconds}s] {summary}")
    print(f"overall: {report['overall']} (report: {args.report})")
    return report["exit_code"]


def cmd_export(args) -> int:
    if args.samples < 2:
        raise UsageError("samples must be >= 2")
    payload, cfg = load_descriptor(args.descriptor)
    rows = _export_rows(args.what, payload, cfg, args.samples)
    out = Path(args.out if args.out else f"export_{args.what}.csv")
    _write_csv(rows, out)
    print(f"wrote {out} ({len(rows)} rows)")
    if not args.no_figure:
        png = out.with_suffix(".png")
        _render_figure(rows, args.what, payload["alpha"]["canonical"], png)
        print(f"wrote {png}")
    return EXIT_PASS


def cmd_inspect(args) -> int:
    payload, cfg = load_descriptor(args.descriptor)
    meas = payload["measure"]
    w_total = Fraction(meas["w_total"])
    Z = Fraction(meas["Z"])
    info = {
        "schema": payload["schema"],
        "alpha": payload["alpha"],
        "digit_provenance": payload["digit_sequence"]["provenance"],
        "q_bit_lengths": [int(v).bit_length()
                          for v in payload["digit_sequence"]["q"]],
        "levels": payload["levels"],
        "atoms": len(meas["atoms"]),
        "depth": meas["depth"],
        "i_max": meas["i_max"],
        "mass_bits": meas["mass_bits"],
        "Z": float(Z),
        "atom_mass_normalized": float(w_total / Z),
        "config": payload["config"],
    }
    print(json.dumps(info, indent=2, sort_keys=True))
    return EXIT_PASS


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="circlefd",
        description="Construct and verify minimal circle diffeomorphisms "
                    "with measurable fundamental domains, at any irrational "
                    "rotation number.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build a construction descriptor")
    b.add_argument("--config", help="key=value config file")
    b.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    b.add_argument("--out", help="descriptor output path")
    b.set_defaults(fn=cmd_build)

    v = sub.add_parser("verify", help="run certified verification suites")
    v.add_argument("descriptor")
    v.add_argument("--suite", action="append", metavar="NAME",
                   help=f"suite selection (repeatable or comma separated); "
                        f"default all: {', '.join(SUITES)}")
    v.add_argument("--report", default="verification.json",
                   help="report JSON output path")
    v.set_defaults(fn=cmd_verify)

    e = sub.add_parser("export", help="export an evaluation grid as CSV "
                                      "plus a rendered figure")
    e.add_argument("descriptor")
    e.add_argument("--what", required=True,
                   choices=("phi", "F", "derivative", "cdf"))
    e.add_argument("--samples", type=int, default=1024)
    e.add_argument("--out", help="CSV output path")
    e.add_argument("--no-figure", action="store_true",
                   help="skip the PNG figure")
    e.set_defaults(fn=cmd_export)

    i = sub.add_parser("inspect", help="summarize a descriptor")
    i.add_argument("descriptor")
    i.set_defaults(fn=cmd_inspect)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConstructionError as e:
        print(json.dumps(e.as_json(), sort_keys=True), file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
