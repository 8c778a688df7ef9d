import math
from fractions import Fraction

import numpy as np
import pytest

from snndecode.fxp import (
    Q1_4,
    Q1_7,
    FixedPointFormat,
    FxpValue,
    SaturationCounter,
    dequantize,
    dequantize_array,
    fxp_mul_acc,
    quantize,
    quantize_array,
)


def oracle_quantize_raw(x, fmt):
    """Independent reference: exact rational scaling, round half away, clamp."""
    scaled = Fraction(x) * fmt.scale
    sign = -1 if scaled < 0 else 1
    mag = abs(scaled)
    raw = sign * int(math.floor(mag + Fraction(1, 2)))
    return max(fmt.raw_min, min(fmt.raw_max, raw))


def test_format_geometry():
    assert Q1_7.total_bits == 9
    assert Q1_7.raw_min == -256 and Q1_7.raw_max == 255
    assert Q1_7.min_value == -2.0
    assert Q1_7.max_value == 1.9921875
    assert Q1_7.step == 2.0 ** -7
    assert Q1_4.total_bits == 6
    assert Q1_4.raw_min == -32 and Q1_4.raw_max == 31


def test_format_spec_roundtrip():
    assert FixedPointFormat.from_spec("1-1-7") == Q1_7
    assert Q1_4.spec() == "1-1-4"
    with pytest.raises(ValueError):
        FixedPointFormat.from_spec("2-1-7")
    with pytest.raises(ValueError):
        FixedPointFormat.from_spec("1-7")


def test_quantize_zero():
    q = quantize(0.0, Q1_7)
    assert q.raw == 0 and q.value == 0.0


def test_quantize_tenth_q17():
    # round(0.1 * 128) = 13, cross-checked against the rational oracle
    assert oracle_quantize_raw(Fraction(1, 10), Q1_7) == 13
    q = quantize(0.1, Q1_7)
    assert q.raw == 13
    assert q.value == 0.1015625


def test_quantize_saturates_high():
    q = quantize(3.0, Q1_7)
    assert q.raw == 255
    assert q.value == 1.9921875


def test_quantize_saturates_low():
    assert quantize(-5.0, Q1_7).raw == -256


def test_quantize_rejects_non_finite():
    for bad in (float("nan"), float("inf"), -float("inf")):
        with pytest.raises(ValueError):
            quantize(bad, Q1_7)
    with pytest.raises(ValueError):
        quantize_array(np.array([0.0, float("nan")]), Q1_7)


def test_quantize_counts_saturations():
    c = SaturationCounter()
    quantize(3.0, Q1_7, counter=c)
    quantize(0.5, Q1_7, counter=c)
    quantize_array(np.array([-9.0, 9.0, 0.25]), Q1_7, counter=c)
    assert c.count == 3


def test_dequantize_examples():
    assert dequantize(FxpValue(13, Q1_7)) == 0.1015625  # 13/128
    assert dequantize(FxpValue(0, Q1_4)) == 0.0
    assert dequantize(FxpValue(-256, Q1_7)) == -2.0  # two's-complement minimum


def test_quantize_array_matches_scalar():
    rng = np.random.default_rng(7)
    xs = rng.uniform(-3, 3, size=500)
    raws = quantize_array(xs, Q1_7)
    for x, raw in zip(xs, raws):
        assert raw == quantize(x, Q1_7).raw
        assert raw == oracle_quantize_raw(Fraction(x), Q1_7)


def test_ties_round_away_from_zero():
    # 0.5 * 16 = 8 exactly; halfway cases go away from zero
    half_step = Q1_4.step / 2
    assert quantize(half_step, Q1_4).raw == 1
    assert quantize(-half_step, Q1_4).raw == -1
    assert quantize(3 * half_step, Q1_4).raw == 2
    assert quantize(-3 * half_step, Q1_4).raw == -2


def test_roundtrip_bound_random():
    rng = np.random.default_rng(11)
    for fmt in (Q1_7, Q1_4):
        xs = rng.uniform(fmt.min_value, fmt.max_value, size=20000)
        back = dequantize_array(quantize_array(xs, fmt), fmt)
        assert np.max(np.abs(back - xs)) <= fmt.step / 2


def test_idempotence_exhaustive_q14():
    for raw in range(Q1_4.raw_min, Q1_4.raw_max + 1):
        v = FxpValue(raw, Q1_4)
        assert quantize(dequantize(v), Q1_4).raw == raw


def test_monotonicity_exhaustive_q14():
    # all representable values plus midpoints, in increasing order
    xs = np.arange(Q1_4.raw_min * 2, Q1_4.raw_max * 2 + 1) / (2 * Q1_4.scale)
    raws = quantize_array(xs, Q1_4)
    assert np.all(np.diff(raws) >= 0)


def test_monotonicity_random_pairs():
    rng = np.random.default_rng(3)
    xs = rng.uniform(-4, 4, size=1000)
    ys = xs + rng.uniform(0, 4, size=1000)
    qx = quantize_array(xs, Q1_7)
    qy = quantize_array(ys, Q1_7)
    assert np.all(qx <= qy)


def test_mul_acc_exact_product():
    acc = quantize(0.0, Q1_7)
    a = quantize(1.0, Q1_7)
    b = quantize(0.5, Q1_7)
    assert fxp_mul_acc(acc, a, b).value == 0.5


def test_mul_acc_saturates_at_max():
    acc = FxpValue(Q1_7.raw_max, Q1_7)  # 1.9921875
    one = quantize(1.0, Q1_7)
    c = SaturationCounter()
    out = fxp_mul_acc(acc, one, one, counter=c)
    assert out.raw == Q1_7.raw_max
    assert c.count == 1


def test_mul_acc_requantizes_small_product():
    # 0.1015625^2 = 0.01031494140625 -> nearest Q1.7 step is 1/128
    a = FxpValue(13, Q1_7)
    expected = oracle_quantize_raw(Fraction(13, 128) ** 2, Q1_7)
    assert expected == 1
    out = fxp_mul_acc(FxpValue(0, Q1_7), a, a)
    assert out.raw == 1
    assert out.value == 0.0078125


def test_mul_acc_matches_rational_oracle():
    rng = np.random.default_rng(23)
    for _ in range(300):
        acc = FxpValue(int(rng.integers(Q1_4.raw_min, Q1_4.raw_max + 1)), Q1_4)
        a = FxpValue(int(rng.integers(Q1_7.raw_min, Q1_7.raw_max + 1)), Q1_7)
        b = FxpValue(int(rng.integers(Q1_4.raw_min, Q1_4.raw_max + 1)), Q1_4)
        exact = Fraction(acc.raw, acc.fmt.scale) + Fraction(a.raw, a.fmt.scale) * Fraction(
            b.raw, b.fmt.scale
        )
        expected = oracle_quantize_raw(exact, acc.fmt)
        assert fxp_mul_acc(acc, a, b).raw == expected


def test_mul_acc_ties_follow_total_sign():
    # acc + a*b = 5/16 - 2.5/16 = 2.5/16: the tie is resolved on the sum,
    # away from zero, so the result is 3/16 and not 5/16 - 3/16.
    acc = FxpValue(5, Q1_4)
    a = FxpValue(-5, Q1_4)  # -5/16
    b = FxpValue(8, Q1_4)  # 1/2
    assert fxp_mul_acc(acc, a, b).raw == 3
