from fractions import Fraction

import pytest

from circlefd.diophantine import (build_p, estimate_c_p, expand_alpha,
                                  grid_distance, lonely_multiple_product,
                                  make_profile, min_multiple_dist,
                                  parse_alpha_spec)
from circlefd.errors import NotCertifiable, RationalInput
from circlefd.numerics import PrecisionReal

import oracles

# brute-force maxima of ceil(1/dist(n*alpha, (1/q)Z)) over 1 <= n <= q
P_GOLDEN = [3, 9, 21, 72, 56, 49, 329, 144, 149, 122, 1353, 3864, 378, 329,
            615, 5152, 1293, 5796, 646, 615, 987, 1353, 3313, 7728]
P_GENERIC = [3, 8, 40, 31, 140, 66, 351, 156, 204, 140, 198, 423, 825, 701,
             528, 311, 395, 5796, 3563, 704, 2199, 7084, 1993, 845]
ALPHA_GOLDEN = Fraction("0.618033988749894848204586834366")  # 30 digits
ALPHA_GENERIC = Fraction("0.358570173636287162330608606811")


@pytest.fixture(scope="module")
def golden():
    return make_profile("golden")


@pytest.fixture(scope="module")
def generic():
    return make_profile((2, 1, 3, 1))


# -- alpha specifications --------------------------------------------------


def test_parse_specs():
    assert parse_alpha_spec("golden").kind == "golden"
    s = parse_alpha_spec([2, 1, 3, 1])
    assert s.kind == "quotients" and s.quotient_block == (2, 1, 3, 1)
    assert parse_alpha_spec(s.canonical()) == s
    d = parse_alpha_spec("decimal:0.6180339887:0.0000000001")
    assert d.kind == "decimal" and d.error == Fraction(1, 10 ** 10)
    assert parse_alpha_spec(parse_alpha_spec("golden")) .kind == "golden"


@pytest.mark.parametrize("bad", ["0.5", "0.25"])
def test_rational_specs_rejected(bad):
    with pytest.raises(RationalInput):
        parse_alpha_spec(bad)


def test_invalid_specs():
    with pytest.raises(ValueError):
        parse_alpha_spec("moonshine")
    with pytest.raises(ValueError):
        parse_alpha_spec([0, 1])
    with pytest.raises(ValueError):
        parse_alpha_spec("decimal:0.5")
    with pytest.raises(RationalInput):
        parse_alpha_spec("decimal:0.5:0")


# -- continued fractions ---------------------------------------------------


def test_golden_quotients_and_fibonacci(golden):
    cf = golden.alpha
    assert cf.partial_quotients(12) == (1,) * 12
    for k in range(9):
        assert cf.denominator(k) == oracles.fibonacci(k + 1)
    enc = cf.real(128)
    assert enc.width <= Fraction(1, 1 << 128)
    assert enc.lo <= ALPHA_GOLDEN <= enc.hi + Fraction(1, 10 ** 29)


def test_generic_quotients_cycle(generic):
    cf = generic.alpha
    assert cf.partial_quotients(8) == (2, 1, 3, 1, 2, 1, 3, 1)
    enc = cf.real(160)
    assert enc.width <= Fraction(1, 1 << 160)
    assert enc.lo - Fraction(1, 10 ** 29) <= ALPHA_GENERIC <= enc.hi + Fraction(1, 10 ** 29)


def test_real_refines(golden):
    enc = golden.alpha_real(64)
    finer = enc.refine(300)
    assert finer.width <= Fraction(1, 1 << 300)
    assert enc.lo <= finer.lo and finer.hi <= enc.hi


def test_decimal_band_certifies_finitely():
    cf = expand_alpha("decimal:0.61803398874989484820:0.00000000000000000001", 8)
    assert cf.partial_quotients(8) == (1,) * 8
    assert cf.max_certifiable_depth() is not None
    with pytest.raises(NotCertifiable):
        cf.ensure_quotients(500)


def test_expand_alpha_validation():
    with pytest.raises(ValueError):
        expand_alpha("golden", 0)


# -- p(q) -------------------------------------------------------------------


def test_p_golden_table(golden):
    assert [build_p(golden, q) for q in range(1, 25)] == P_GOLDEN
    assert build_p(golden, 64) == 5152
    assert build_p(golden, 200) == 42889
    assert build_p(golden, 512) == 691420


def test_p_generic_table(generic):
    assert [build_p(generic, q) for q in range(1, 25)] == P_GENERIC


def test_p_memoized(golden):
    v = build_p(golden, 17)
    assert golden.p_table[17] == v
    assert build_p(golden, 17) == v
    with pytest.raises(ValueError):
        build_p(golden, 0)


# -- multiple distances ------------------------------------------------------


@pytest.mark.parametrize("beta_times,limit,argmin", [
    (1, 10, 8), (1, 100, 89), (8, 50, 18), (512, 64, 30)])
def test_min_multiple_dist_golden(golden, beta_times, limit, argmin):
    n, d = min_multiple_dist(golden, beta_times, limit)
    assert n == argmin and d.lo > 0
    truth = oracles.to_fraction(
        oracles.brute_min_multiple_dist(oracles.golden_alpha(80),
                                        beta_times, limit)[1], 40)
    slop = Fraction(1, 10 ** 30)
    assert d.lo - slop <= truth <= d.hi + slop


def test_min_multiple_dist_generic(generic):
    n, d = min_multiple_dist(generic, 5, 40)
    assert n == 29
    truth = oracles.to_fraction(
        oracles.brute_min_multiple_dist(
            oracles.alpha_from_block((2, 1, 3, 1), 80), 5, 40)[1], 40)
    assert d.lo - Fraction(1, 10 ** 30) <= truth <= d.hi + Fraction(1, 10 ** 30)


def test_grid_distance_soundness(golden):
    g = oracles.golden_alpha(80)
    for m in (1, 2, 7):
        for q in (3, 10, 59):
            enc = grid_distance(golden, m, q)
            with oracles.mp.workdps(80):
                truth = oracles.to_fraction(oracles.dist_to_grid(m * g, q, 80), 40)
            assert enc.lo - Fraction(1, 10 ** 30) <= truth <= enc.hi + Fraction(1, 10 ** 30)


def test_lonely_multiple_product_at_least_one(golden):
    # p(q) majorizes 1/dist(n*alpha, (1/q)Z) for every n <= q
    for m in range(1, 5):
        for q in range(m, 31):
            val = lonely_multiple_product(golden, m, q)
            bits = 128
            while val.lo < 1 and bits <= 1 << 12:
                val = val.refine(bits)
                bits *= 2
            assert val.lo >= 1, (m, q)


def test_estimate_c_p(golden):
    x = PrecisionReal.exact(Fraction(1, 2))
    w = estimate_c_p(x, golden, q_max=30, q_min=2, keep_samples=True)
    assert w.window == (2, 30) and len(w.samples) == 29
    assert 2 <= w.q_at_min <= 30
    assert all(w.value.hi <= s.hi for _, s in w.samples)
    with pytest.raises(ValueError):
        estimate_c_p(x, golden, q_max=1)
