"""End-to-end acceptance gate for the default golden-ratio construction.

Each test asserts one headline guarantee of the library at its stated
tolerance and wall-clock budget, on the full-size default configuration
(six digit levels, four bump levels, translate range 32, depth-6 cylinder
measure).  Run with -v to get one pass/fail line per criterion.
"""

import random
import time
from contextlib import contextmanager
from fractions import Fraction

import pytest

from circlefd.cantor import (build_digit_sequence,
                             difference_code_grid_products, point_from_code,
                             verify_translate_disjointness)
from circlefd.cocycle import (birkhoff_range, bound_M, level_birkhoff,
                              sum_exp_birkhoff)
from circlefd.conjugacy import (build_descriptor,
                                derivative_consistency_study,
                                fundamental_domain_report,
                                rotation_number_estimate)
from circlefd.diophantine import lonely_multiple_product, make_profile
from circlefd.harness import BuildConfig, build_artifacts

SAMPLE_SEED = 20260815
CODE_SEED = 1906


@contextmanager
def budget(seconds):
    t0 = time.monotonic()
    yield
    elapsed = time.monotonic() - t0
    assert elapsed < seconds, f"budget {seconds}s exceeded: {elapsed:.1f}s"


@pytest.fixture(scope="module")
def art():
    return build_artifacts(BuildConfig())


@pytest.fixture(scope="module")
def desc(art):
    return build_descriptor(art.measure)


@pytest.fixture(scope="module")
def samples(art):
    rng = random.Random(SAMPLE_SEED)
    return [point_from_code(art.seq,
                            tuple(rng.randrange(2) for _ in range(6)), 6)
            for _ in range(50)]


def test_criterion_01_single_level_birkhoff_equality(art, samples):
    # phi_n^{(i)}(x) = -|i| (3/4)^n on C for every |i| <= 2^n, n = 1..4
    with budget(60):
        max_width = Fraction(0)
        for x in samples:
            for level in art.stack.levels:
                for i in range(-level.translate_range,
                               level.translate_range + 1):
                    enc = level_birkhoff(level, x, i, art.stack.alpha)
                    target = -abs(i) * level.amplitude
                    assert enc.lo <= target <= enc.hi
                    max_width = max(max_width, enc.width)
        assert max_width <= Fraction(1, 10 ** 9)


def test_criterion_02_birkhoff_decay_beyond_window(art, samples):
    # phi^{(i)}(x) <= -(3/4)(3/2)^n for 2^n <= |i| < 2^{n+1}, n <= 3, with
    # truncation slack below ten percent of the bound
    with budget(60):
        for x in samples:
            values = birkhoff_range(art.stack, x, 15, code_point=True)
            for n in range(4):
                bound = -Fraction(3, 4) * Fraction(3, 2) ** n
                for i in range(1 << n, 1 << (n + 1)):
                    for s in (i, -i):
                        enc = values[s]
                        # upper endpoints are tail-free on C: the slack
                        # against the bound is the truncated width alone
                        slack = enc.width - abs(s) * art.stack.tail_bound
                        assert slack < abs(bound) / 10
                        assert enc.hi <= bound + slack


def test_criterion_03_exposed_sums_below_m(art, samples):
    # sum_{|i| <= 32} exp(phi^{(i)}(x)) stays below the series constant M
    with budget(60):
        m = bound_M()
        for x in samples:
            total = sum_exp_birkhoff(art.stack, x, 32)
            assert total.hi <= m.hi


def test_criterion_04_translate_disjointness(art):
    # R^n C-cover and R^m C-cover keep strictly positive gaps, |n|,|m| <= 16
    with budget(120):
        report = verify_translate_disjointness(art.seq, 16, 24)
        assert len(report.pairs) == (33 * 32) // 2
        assert all(rec.gap.lo > 0 for rec in report.pairs)
        assert report.min_gap.lo > 0
        assert report.max_depth_used <= 24


def test_criterion_05_digit_conditions_exact():
    # q_0 = 1, divisibility, geometric growth, and p(q_n) 2^n <= q_{n+1},
    # all re-checked in plain integer arithmetic, for the golden rotation
    # number and for a generic periodic quotient block
    with budget(60):
        for spec in ("golden", (2, 1, 3, 1)):
            seq = build_digit_sequence(make_profile(spec), 6)
            q, p = seq.q, seq.p_values
            assert len(q) == 7 and len(p) == 6
            assert q[0] == 1
            for n in range(6):
                assert q[n + 1] % q[n] == 0
                assert q[n + 1] >= 3 * q[n]
                assert p[n] * 2 ** n <= q[n + 1]


def test_criterion_06_difference_code_grid_products(art):
    # p(q_i) dist(beta, (1/q_i)Z) <= 3/2^{i+1} for difference codes beta,
    # i = 1..4; the truncation tail adds at most p(q_i) tail(6)
    with budget(60):
        rng = random.Random(CODE_SEED)
        tail_hi = art.seq.tail(6).hi
        for _ in range(20):
            deltas = [rng.choice((-1, 0, 1)) for _ in range(6)]
            prods = difference_code_grid_products(art.seq, deltas, 4)
            for i, value in enumerate(prods, start=1):
                slack = art.seq.p_values[i] * tail_hi
                assert value <= Fraction(3, 1 << (i + 1))
                assert value <= Fraction(3, 1 << (i + 1)) + slack


def test_criterion_07_derivative_consistency(art):
    # finite differences of F approach exp(phi compose h) on a 1024 grid as
    # the construction refines (depth 4 -> 5 -> 6, step halved per stage)
    with budget(300):
        study = derivative_consistency_study(art.stack, art.seq)
        assert study.grid == 1024
        assert [(s.depth, s.mass_bits) for s in study.stages] == \
            [(4, 96), (5, 144), (6, 192)]
        gaps = [s.max_gap for s in study.stages]
        assert gaps[0] > gaps[1] > gaps[2]
        assert study.strictly_decreasing
        assert study.final_max_gap < Fraction(1, 20)


def test_criterion_08_rotation_number(desc):
    # (lift^k(0) - 0)/k recovers alpha to 1e-4 plus enclosure widths
    with budget(60):
        rot = rotation_number_estimate(desc, Fraction(0), 10 ** 4)
        widths = (rot.estimate_hi - rot.estimate_lo) + \
            (rot.alpha_hi - rot.alpha_lo)
        assert rot.deviation <= Fraction(1, 10 ** 4) + widths


def test_criterion_09_fundamental_domain_mass_and_images(desc):
    # the atoms carry at least 0.99 of the normalized mass, the remainder is
    # certified below the dyadic-block tail, and the translated images of
    # the core stay pairwise disjoint for |i| <= 8
    with budget(180):
        report = fundamental_domain_report(desc, image_range=8, d_max=24)
        assert report.atom_mass >= Fraction(99, 100)
        assert report.tail_certified
        assert report.unassigned <= report.block_tail
        assert report.min_image_gap > 0
        assert all(rec.gap.lo > 0 for rec in report.preimage.pairs)


def test_criterion_10_grid_approximation_lower_bound(art):
    # p(q) dist(m alpha, (1/q)Z) >= 1 for m = 1..8 and every q <= 200 with
    # q >= m, certified strictly by refinement
    with budget(120):
        profile = art.profile
        for m in range(1, 9):
            for q in range(m, 201):
                value = lonely_multiple_product(profile, m, q)
                bits = 128
                while value.lo < 1:
                    assert bits <= 1 << 14, (m, q)
                    value = value.refine(bits)
                    bits *= 2
                assert value.lo >= 1
