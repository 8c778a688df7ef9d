"""Signed fixed-point formats, quantization, and saturating arithmetic.

A format has one sign bit, ``integer_bits`` integer bits and
``fraction_bits`` fractional bits, stored two's complement.  The weight
format used throughout the decoder is Q1.7 (1 sign + 1 integer + 7
fraction bits); streaming buffers use Q1.4.

Conventions (fixed here because hardware leaves them open):

* rounding is to nearest, ties away from zero;
* out-of-range values saturate at the format bounds (never wrap);
* accumulation happens in exact integer arithmetic and is re-quantized
  once per declared quantization point, not after every partial sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FixedPointFormat",
    "FxpValue",
    "SaturationCounter",
    "quantize",
    "quantize_array",
    "dequantize",
    "dequantize_array",
    "fxp_mul_acc",
    "Q1_7",
    "Q1_4",
]


@dataclass(frozen=True)
class FixedPointFormat:
    """Bit layout of a signed fixed-point number."""

    integer_bits: int
    fraction_bits: int
    signed: bool = True

    def __post_init__(self):
        if not self.signed:
            raise ValueError("only signed formats are supported")
        if self.integer_bits < 0 or self.fraction_bits < 0:
            raise ValueError("bit widths must be non-negative")
        if self.integer_bits + self.fraction_bits < 1:
            raise ValueError("need at least one magnitude bit")

    @property
    def total_bits(self) -> int:
        return 1 + self.integer_bits + self.fraction_bits

    @property
    def scale(self) -> int:
        """Mantissa units per 1.0, i.e. 2**fraction_bits."""
        return 1 << self.fraction_bits

    @property
    def step(self) -> float:
        return 1.0 / self.scale

    @property
    def raw_min(self) -> int:
        return -(1 << (self.integer_bits + self.fraction_bits))

    @property
    def raw_max(self) -> int:
        return (1 << (self.integer_bits + self.fraction_bits)) - 1

    @property
    def min_value(self) -> float:
        return self.raw_min / self.scale

    @property
    def max_value(self) -> float:
        return self.raw_max / self.scale

    def spec(self) -> str:
        """Config-file string: sign-integer-fraction, e.g. ``1-1-7``."""
        return f"1-{self.integer_bits}-{self.fraction_bits}"

    @classmethod
    def from_spec(cls, text: str) -> "FixedPointFormat":
        parts = text.strip().split("-")
        if len(parts) != 3:
            raise ValueError(f"bad format spec {text!r}, expected 's-i-f' like '1-1-7'")
        sign, ibits, fbits = (int(p) for p in parts)
        if sign != 1:
            raise ValueError(f"bad format spec {text!r}: sign field must be 1")
        return cls(integer_bits=ibits, fraction_bits=fbits)

    def __str__(self) -> str:
        return f"Q{self.integer_bits}.{self.fraction_bits}"


Q1_7 = FixedPointFormat(1, 7)
Q1_4 = FixedPointFormat(1, 4)


@dataclass(frozen=True)
class FxpValue:
    """A single quantized number: integer mantissa plus its format."""

    raw: int
    fmt: FixedPointFormat

    def __post_init__(self):
        if not self.fmt.raw_min <= self.raw <= self.fmt.raw_max:
            raise ValueError(
                f"raw {self.raw} outside {self.fmt} range "
                f"[{self.fmt.raw_min}, {self.fmt.raw_max}]"
            )

    @property
    def value(self) -> float:
        return self.raw / self.fmt.scale


@dataclass
class SaturationCounter:
    """Counts silently clipped values; pass one in wherever you care."""

    count: int = field(default=0)

    def add(self, n: int):
        self.count += int(n)


def _round_half_away_int(numer: int, denom: int) -> int:
    """Exact round(numer/denom) with ties away from zero; denom > 0."""
    if numer >= 0:
        return (2 * numer + denom) // (2 * denom)
    return -((-2 * numer + denom) // (2 * denom))


def _saturate_raw(raw: int, fmt: FixedPointFormat, counter: SaturationCounter | None) -> int:
    if raw > fmt.raw_max:
        if counter is not None:
            counter.add(1)
        return fmt.raw_max
    if raw < fmt.raw_min:
        if counter is not None:
            counter.add(1)
        return fmt.raw_min
    return raw


def quantize(x: float, fmt: FixedPointFormat,
             counter: SaturationCounter | None = None) -> FxpValue:
    """Quantize a real number to the nearest representable value.

    Ties round away from zero; values beyond the format range saturate
    (and bump ``counter`` when one is supplied).  Non-finite input is an
    error.
    """
    x = float(x)
    if not np.isfinite(x):
        raise ValueError(f"cannot quantize non-finite value {x!r}")
    scaled = x * fmt.scale
    raw = int(np.floor(abs(scaled) + 0.5))
    if scaled < 0:
        raw = -raw
    return FxpValue(_saturate_raw(raw, fmt, counter), fmt)


def quantize_array(x: np.ndarray, fmt: FixedPointFormat,
                   counter: SaturationCounter | None = None) -> np.ndarray:
    """Vectorized :func:`quantize`; returns int64 raw mantissas."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot quantize non-finite values")
    scaled = x * fmt.scale
    raw = np.floor(np.abs(scaled) + 0.5).astype(np.int64)
    raw[scaled < 0] *= -1
    if counter is not None:
        counter.add(np.count_nonzero((raw > fmt.raw_max) | (raw < fmt.raw_min)))
    return np.clip(raw, fmt.raw_min, fmt.raw_max)


def dequantize(v: FxpValue) -> float:
    """Exact real value of a quantized number."""
    return v.raw / v.fmt.scale


def dequantize_array(raw: np.ndarray, fmt: FixedPointFormat) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) / fmt.scale


def requantize_raw(numer, shift_den_log2: int, fmt: FixedPointFormat,
                   counter: SaturationCounter | None = None):
    """Re-quantize exact accumulator mantissas.

    ``numer`` holds values at scale ``2**(fmt.fraction_bits + shift_den_log2)``;
    the result is raw mantissas at ``fmt``'s own scale, rounded half away
    from zero and saturated.  Works on scalars and int64 arrays.
    """
    numer = np.asarray(numer, dtype=np.int64)
    if shift_den_log2 == 0:
        raw = numer.copy()
    else:
        half = np.int64(1) << (shift_den_log2 - 1)
        den = np.int64(1) << shift_den_log2
        mag = (np.abs(numer) + half) // den
        raw = np.where(numer >= 0, mag, -mag)
    if counter is not None:
        counter.add(np.count_nonzero((raw > fmt.raw_max) | (raw < fmt.raw_min)))
    return np.clip(raw, fmt.raw_min, fmt.raw_max)


def fxp_mul_acc(acc: FxpValue, a: FxpValue, b: FxpValue,
                counter: SaturationCounter | None = None) -> FxpValue:
    """Saturating multiply-accumulate: quantize(acc + a*b) in acc's format.

    The product and sum are formed exactly (integer arithmetic at the
    combined scale) and re-quantized once, so no precision is lost before
    the final rounding.
    """
    prod_frac = a.fmt.fraction_bits + b.fmt.fraction_bits
    acc_frac = acc.fmt.fraction_bits
    # common scale 2**max(prod_frac, acc_frac)
    if prod_frac >= acc_frac:
        numer = acc.raw * (1 << (prod_frac - acc_frac)) + a.raw * b.raw
        shift = prod_frac - acc_frac
    else:
        numer = acc.raw + a.raw * b.raw * (1 << (acc_frac - prod_frac))
        shift = 0
    raw = _round_half_away_int(numer, 1 << shift) if shift else numer
    return FxpValue(_saturate_raw(int(raw), acc.fmt, counter), acc.fmt)
