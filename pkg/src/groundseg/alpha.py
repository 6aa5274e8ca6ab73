"""
Inter-channel pitch-angle difference (the Alpha matrix).

For two returns A (lower channel) and B (upper channel) in one column,
``alpha = atan2(|dz|, |dx|)`` where dz/dx are the vertical/horizontal
components of B - A in the column's vertical plane. Flat ground gives 0, a
vertical surface pi/2. The value lands on A's cell; the top row copies the
second row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .cordic import ATAN2_ITERS, SINCOS_ITERS, atan2_raw, sincos_raw
from .fixedpoint import fx_mul
from .ingest import RangeImage


@dataclass
class AlphaMatrix:
    alpha: np.ndarray
    valid: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.alpha.shape


def alpha_cell(r_a, p_a, r_b, p_b, printed: bool = False):
    """Float alpha between two returns; works element-wise on arrays.

    ``printed=True`` puts the sine term on the horizontal axis and the cosine
    term on the vertical one, which makes flat ground read pi/2.
    """
    vert = np.abs(r_a * np.sin(p_a) - r_b * np.sin(p_b))
    horiz = np.abs(r_a * np.cos(p_a) - r_b * np.cos(p_b))
    if printed:
        vert, horiz = horiz, vert
    return np.arctan2(vert, horiz)


@njit(cache=True)
def alpha_cell_fixed(r_a, p_a, r_b, p_b, printed=False):
    """Raw-word alpha: CORDIC sin/cos, rounded products, CORDIC atan2."""
    s_a, c_a = sincos_raw(p_a, SINCOS_ITERS)
    s_b, c_b = sincos_raw(p_b, SINCOS_ITERS)
    vert = abs(fx_mul(r_a, s_a) - fx_mul(r_b, s_b))
    horiz = abs(fx_mul(r_a, c_a) - fx_mul(r_b, c_b))
    if printed:
        vert, horiz = horiz, vert
    return atan2_raw(vert, horiz, ATAN2_ITERS)


@njit(cache=True)
def _alpha_fixed_grid(r_a, p_a, r_b, p_b, ok, printed):
    h, w = ok.shape
    out = np.zeros((h, w), dtype=np.int64)
    for i in range(h):
        for j in range(w):
            if ok[i, j]:
                out[i, j] = alpha_cell_fixed(r_a[i, j], p_a[i, j], r_b[i, j], p_b[i, j], printed)
    return out


def _upper_partner(usable: np.ndarray, skip_invalid: bool) -> np.ndarray:
    """Row index of each cell's upper partner, -1 where there is none."""
    h, w = usable.shape
    rows = np.broadcast_to(np.arange(h)[:, None], (h, w))
    partner = np.full((h, w), -1, dtype=np.int64)
    if h < 2:
        return partner
    if skip_invalid:
        seen = np.maximum.accumulate(np.where(usable, rows, -1), axis=0)
        partner[1:] = seen[:-1]
    else:
        partner[1:] = np.where(usable[:-1], rows[:-1], -1)
    return partner


def build_alpha(
    img: RangeImage,
    adjacency: str = "adjacent",
    form: str = "geometric",
) -> AlphaMatrix:
    """Alpha for every cell of a (repaired) range image.

    ``adjacency="adjacent"`` pairs each cell with the row directly above;
    ``"skip_invalid"`` pairs it with the nearest usable row above.
    """
    usable = img.valid & img.pitch_valid
    h, w = usable.shape
    partner = _upper_partner(usable, adjacency == "skip_invalid")
    ok = usable & (partner >= 0)
    cols = np.broadcast_to(np.arange(w)[None, :], (h, w))
    pr = np.where(ok, partner, 0)
    r_b = img.range[pr, cols]
    p_b = img.pitch[pr, cols]
    printed = form == "printed"

    if np.issubdtype(img.range.dtype, np.integer):
        alpha = _alpha_fixed_grid(
            img.range.astype(np.int64), img.pitch.astype(np.int64),
            r_b.astype(np.int64), p_b.astype(np.int64), ok, printed,
        )
    else:
        with np.errstate(invalid="ignore"):
            alpha = np.where(ok, alpha_cell(img.range, img.pitch, r_b, p_b, printed), 0.0)

    if h >= 2:
        alpha[0] = alpha[1]
        ok = ok.copy()
        ok[0] = ok[1]
    return AlphaMatrix(alpha, ok)
