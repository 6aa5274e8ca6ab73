"""
Signed 32-bit fixed point with 23 fraction bits (1 sign, 8 integer bits).

Raw words are carried as ``int64`` so intermediate products and sums do not
wrap; only ``quantize`` saturates to the 32-bit word range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .ingest import RangeImage

FRAC_BITS = 23
WORD_BITS = 32
SCALE = 1 << FRAC_BITS
RAW_MAX = (1 << (WORD_BITS - 1)) - 1
RAW_MIN = -(1 << (WORD_BITS - 1))
#: Quantization step, 2**-23.
LSB = 1.0 / SCALE


@dataclass(frozen=True)
class FixedPoint:
    raw: int
    saturated: bool = False
    fraction_bits: int = FRAC_BITS

    def __float__(self) -> float:
        return self.raw / float(1 << self.fraction_bits)


def quantize_array(v) -> tuple[np.ndarray, np.ndarray]:
    """Round to nearest (ties to even) and saturate; returns ``(raw, overflow)``."""
    scaled = np.rint(np.asarray(v, dtype=np.float64) * SCALE)
    overflow = (scaled > RAW_MAX) | (scaled < RAW_MIN)
    raw = np.clip(scaled, RAW_MIN, RAW_MAX).astype(np.int64)
    return raw, overflow


def quantize(v: float) -> FixedPoint:
    raw, overflow = quantize_array(v)
    return FixedPoint(int(raw), bool(overflow))


def dequantize(f) -> float | np.ndarray:
    if isinstance(f, FixedPoint):
        return float(f)
    return np.asarray(f, dtype=np.float64) / SCALE


def to_raw(v: float) -> int:
    """Quantize a scalar threshold, refusing silent saturation."""
    q = quantize(v)
    if q.saturated:
        raise OverflowError(f"{v} is outside the fixed-point range")
    return q.raw


@njit(cache=True)
def fx_mul(a, b):
    """Product of two raw words, rounded half up back to 23 fraction bits."""
    return (a * b + (1 << (FRAC_BITS - 1))) >> FRAC_BITS


def quantize_image(img: RangeImage) -> RangeImage:
    """Quantize range, pitch and yaw grids of a RangeImage to raw words.

    Invalid cells keep raw 0. Saturated values are reported, not hidden.
    """
    grids = []
    for name in ("range", "pitch", "yaw"):
        raw, overflow = quantize_array(getattr(img, name))
        if overflow.any():
            raise OverflowError(f"{int(overflow.sum())} {name} value(s) outside the fixed-point range")
        grids.append(raw)
    return RangeImage(*grids, img.valid.copy(), img.pitch_valid.copy())
