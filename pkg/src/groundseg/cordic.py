"""
CORDIC kernels on raw fixed-point words.

``atan2_raw`` runs in vectoring mode after a quadrant pre-rotation and a
leading-zero normalization of the input vector, so small vectors keep full
precision. ``sincos_raw`` runs in rotation mode. Both accumulate the angle
with ``GUARD_FRAC`` fraction bits and round to the 23-bit output format once.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .fixedpoint import FRAC_BITS

GUARD_FRAC = 40
_SHIFT_OUT = GUARD_FRAC - FRAC_BITS
MAX_ITERS = 48

ATAN_TABLE = np.array(
    [round(math.atan(2.0 ** -i) * (1 << GUARD_FRAC)) for i in range(MAX_ITERS)], dtype=np.int64
)
HALF_PI_G = round(math.pi / 2 * (1 << GUARD_FRAC))
PI_G = round(math.pi * (1 << GUARD_FRAC))
HALF_PI_RAW = round(math.pi / 2 * (1 << FRAC_BITS))
PI_RAW = round(math.pi * (1 << FRAC_BITS))

# inverse CORDIC gain for n rotation-mode iterations, in guard precision
_INV_GAIN = np.array(
    [round(math.prod(1.0 / math.sqrt(1.0 + 2.0 ** (-2 * i)) for i in range(n)) * (1 << GUARD_FRAC))
     for n in range(MAX_ITERS + 1)],
    dtype=np.int64,
)

ATAN2_ITERS = 24
SINCOS_ITERS = 28

_NORM_TOP = np.int64(1) << 58


@njit(cache=True)
def _round_out(z):
    return (z + (np.int64(1) << (_SHIFT_OUT - 1))) >> _SHIFT_OUT


@njit(cache=True)
def atan2_raw(y, x, iters=ATAN2_ITERS):
    """arctan2(y, x) of raw words, result in raw radians."""
    y = np.int64(y)
    x = np.int64(x)
    if y == 0:
        if x >= 0:
            return np.int64(0)
        return np.int64(PI_RAW)
    if x == 0:
        return np.int64(HALF_PI_RAW) if y > 0 else np.int64(-HALF_PI_RAW)

    z = np.int64(0)
    if x < 0:
        if y > 0:
            x, y = y, -x
            z = np.int64(HALF_PI_G)
        else:
            x, y = -y, x
            z = np.int64(-HALF_PI_G)

    m = max(abs(x), abs(y))
    while m < _NORM_TOP:
        x <<= 1
        y <<= 1
        m <<= 1

    for i in range(iters):
        if y > 0:
            x, y = x + (y >> i), y - (x >> i)
            z += ATAN_TABLE[i]
        else:
            x, y = x - (y >> i), y + (x >> i)
            z -= ATAN_TABLE[i]
    return _round_out(z)


@njit(cache=True)
def sincos_raw(angle, iters=SINCOS_ITERS):
    """(sin, cos) of a raw angle, both as raw words."""
    z = np.int64(angle) << _SHIFT_OUT
    neg = False
    if z > HALF_PI_G:
        z -= PI_G
        neg = True
    elif z < -HALF_PI_G:
        z += PI_G
        neg = True
    x = _INV_GAIN[iters]
    y = np.int64(0)
    for i in range(iters):
        if z >= 0:
            x, y = x - (y >> i), y + (x >> i)
            z -= ATAN_TABLE[i]
        else:
            x, y = x + (y >> i), y - (x >> i)
            z += ATAN_TABLE[i]
    s = _round_out(y)
    c = _round_out(x)
    if neg:
        return -s, -c
    return s, c


@njit(cache=True)
def atan2_array(y, x, iters=ATAN2_ITERS):
    yf = y.ravel()
    xf = x.ravel()
    out = np.empty(yf.size, dtype=np.int64)
    for i in range(yf.size):
        out[i] = atan2_raw(yf[i], xf[i], iters)
    return out.reshape(y.shape)
