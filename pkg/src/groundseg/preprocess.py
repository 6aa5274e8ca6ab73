"""
Frame repair ahead of the alpha computation.

Range is repaired column-wise from pairs of valid values straddling an
invalid cell; pitch is repaired row-wise with a nearest-neighbor buffer.
Both functions accept float images and quantized images (integer grids of
raw fixed-point words); integer inputs are averaged with integer rounding so
the result matches the streaming datapath bit for bit.
"""

from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, fields
from typing import Literal

import numpy as np

from .ingest import RangeImage, read_config_file

logger = logging.getLogger(__name__)

NeighborMode = Literal["four_way", "eight_way", "cross_eight_way"]
NEIGHBOR_MODES = ("four_way", "eight_way", "cross_eight_way")


@dataclass(frozen=True)
class SegParams:
    """Thresholds and iteration counts of the segmentation pipeline.

    Angles are radians, distances meters. The optional modes exist for
    ablations; the defaults are the production configuration.
    """

    repair_range_thresh: float = 0.5
    repair_half_window: int = 2
    seed_thresh: float = 0.7854
    alpha_thresh: float = 0.0873
    flood_iterations: int = 10
    neighbor_mode: NeighborMode = "cross_eight_way"
    # "cross": every up x down pair; "equidistant": only pairs at equal offsets
    pair_mode: Literal["cross", "equidistant"] = "cross"
    # "printed" swaps sin/cos in the delta computation
    alpha_form: Literal["geometric", "printed"] = "geometric"
    alpha_adjacency: Literal["adjacent", "skip_invalid"] = "adjacent"
    sweep: Literal["forward", "alternating"] = "forward"
    # "jacobi" reads only labels from the previous iteration
    schedule: Literal["in_place", "jacobi"] = "in_place"

    def __post_init__(self) -> None:
        for name in ("repair_range_thresh", "seed_thresh", "alpha_thresh"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.flood_iterations < 1:
            raise ValueError("flood_iterations must be >= 1")
        if self.repair_half_window < 1:
            raise ValueError("repair_half_window must be >= 1")
        choices = {
            "neighbor_mode": NEIGHBOR_MODES,
            "pair_mode": ("cross", "equidistant"),
            "alpha_form": ("geometric", "printed"),
            "alpha_adjacency": ("adjacent", "skip_invalid"),
            "sweep": ("forward", "alternating"),
            "schedule": ("in_place", "jacobi"),
        }
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SegParams":
        data = dict(data.get("params", data))
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown segmentation parameters: {sorted(unknown)}")
        return cls(**data)


def load_params(path: str | os.PathLike) -> SegParams:
    return SegParams.from_dict(read_config_file(path))


def _is_fixed(a: np.ndarray) -> bool:
    return np.issubdtype(a.dtype, np.integer)


def range_pair_sums(
    values: np.ndarray,
    valid: np.ndarray,
    half: int,
    thresh,
    equidistant: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Sum of members and count of qualifying (up, down) pairs around every cell.

    A pair qualifies when both members are valid and differ by less than
    ``thresh``. Cells beyond the image border are treated as invalid.
    """
    h, w = values.shape
    pad_v = np.zeros((h + 2 * half, w), dtype=values.dtype)
    pad_ok = np.zeros((h + 2 * half, w), dtype=bool)
    pad_v[half:half + h] = values
    pad_ok[half:half + h] = valid

    acc = np.int64 if _is_fixed(values) else np.float64
    sums = np.zeros((h, w), dtype=acc)
    counts = np.zeros((h, w), dtype=np.int64)
    for k in range(1, half + 1):
        up = pad_v[half - k:half - k + h]
        up_ok = pad_ok[half - k:half - k + h]
        downs = (k,) if equidistant else range(1, half + 1)
        for m in downs:
            down = pad_v[half + m:half + m + h]
            down_ok = pad_ok[half + m:half + m + h]
            ok = up_ok & down_ok & (np.abs(up - down) < thresh)
            sums += np.where(ok, up.astype(acc) + down.astype(acc), 0)
            counts += ok
    return sums, counts


def fixed_pair_mean(sums: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Round-half-up mean of ``2 * counts`` members, integer arithmetic only."""
    den = 2 * np.maximum(counts, 1)
    return (sums + den // 2) // den


def repair_range(img: RangeImage, p: SegParams, thresh=None) -> RangeImage:
    """Fill invalid range cells from their column window.

    ``thresh`` overrides ``p.repair_range_thresh``; it must be a raw word for
    quantized images.
    """
    if thresh is None:
        thresh = p.repair_range_thresh
    sums, counts = range_pair_sums(
        img.range, img.valid, p.repair_half_window, thresh,
        equidistant=p.pair_mode == "equidistant",
    )
    fill = ~img.valid & (counts > 0)
    out = img.copy()
    if _is_fixed(img.range):
        repaired = fixed_pair_mean(sums, counts)
    else:
        repaired = sums / np.maximum(2 * counts, 1)
    out.range[fill] = repaired[fill].astype(out.range.dtype)
    out.valid[fill] = True
    return out


def repair_pitch(img: RangeImage) -> RangeImage:
    """Row-wise nearest-neighbor pitch repair, scanning left to right.

    Cells before the first valid pitch of a row take that first value. Rows
    without any valid pitch are left as they are and counted in a warning.
    """
    pv = img.pitch_valid
    h, w = pv.shape
    cols = np.where(pv, np.arange(w)[None, :], -1)
    last = np.maximum.accumulate(cols, axis=1)
    has_any = pv.any(axis=1)
    first = np.argmax(pv, axis=1)
    src = np.where(last >= 0, last, first[:, None])

    out = img.copy()
    rows = np.arange(h)[:, None]
    out.pitch = np.where(has_any[:, None], img.pitch[rows, src], img.pitch)
    out.pitch_valid = np.where(has_any[:, None], True, pv)
    n_empty = int(np.count_nonzero(~has_any))
    if n_empty:
        logger.warning("pitch repair: %d row(s) without any valid pitch left unrepaired", n_empty)
    return out
