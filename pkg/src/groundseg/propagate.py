"""
Seed initialization and flood-fill label propagation over the Alpha matrix.

A sweep visits cells bottom-up, left to right (the image stores the top
channel in row 0, so "bottom-up" means decreasing row index). With the
default ``in_place`` schedule a label written during a sweep is visible to
every later cell of the same sweep, which is exactly what one stacked
flood-fill block of the streaming datapath computes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .alpha import AlphaMatrix, build_alpha
from .fixedpoint import quantize_image, to_raw
from .ingest import RangeImage
from .preprocess import SegParams, repair_pitch, repair_range

GROUND = 1
NOT_GROUND = 0
INVALID = -1

MODE_CODES = {"four_way": 0, "eight_way": 1, "cross_eight_way": 2}

_ORTHO = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=np.int64)
_DIAG = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=np.int64)


@dataclass
class LabelMask:
    """Ternary grid: GROUND (1), NOT_GROUND (0), INVALID (-1)."""

    labels: np.ndarray

    @property
    def ground(self) -> np.ndarray:
        return self.labels == GROUND

    @property
    def invalid(self) -> np.ndarray:
        return self.labels == INVALID

    def count_ground(self) -> int:
        return int(np.count_nonzero(self.labels == GROUND))

    def copy(self) -> "LabelMask":
        return LabelMask(self.labels.copy())


@njit(cache=True)
def arm_fills(a_c, lab1, ok1, a1, lab2, ok2, a2, thresh, cross):
    """Whether one orthogonal arm (1-step s1, 2-step s2) grounds the center."""
    if not ok1:
        return False
    if lab1 == GROUND and abs(a_c - a1) <= thresh:
        return True
    if cross and ok2 and lab2 == GROUND and abs(a2 - a1) <= thresh and abs(a_c - a2) <= thresh:
        return True
    return False


@njit(cache=True)
def _sweep(labels, src, alpha, valid, thresh, mode, reverse):
    h, w = labels.shape
    cross = mode == 2
    filled = 0
    for ii in range(h):
        i = ii if reverse else h - 1 - ii
        for jj in range(w):
            j = w - 1 - jj if reverse else jj
            if not valid[i, j] or labels[i, j] != NOT_GROUND:
                continue
            a_c = alpha[i, j]
            hit = False
            for k in range(4):
                di = _ORTHO[k, 0]
                dj = _ORTHO[k, 1]
                i1 = i + di
                j1 = j + dj
                if i1 < 0 or i1 >= h or j1 < 0 or j1 >= w:
                    continue
                i2 = i1 + di
                j2 = j1 + dj
                in2 = 0 <= i2 < h and 0 <= j2 < w
                lab2 = src[i2, j2] if in2 else NOT_GROUND
                ok2 = valid[i2, j2] if in2 else False
                a2 = alpha[i2, j2] if in2 else a_c
                if arm_fills(a_c, src[i1, j1], valid[i1, j1], alpha[i1, j1], lab2, ok2, a2, thresh, cross):
                    hit = True
                    break
            if not hit and mode == 1:
                for k in range(4):
                    i1 = i + _DIAG[k, 0]
                    j1 = j + _DIAG[k, 1]
                    if 0 <= i1 < h and 0 <= j1 < w and src[i1, j1] == GROUND \
                            and abs(a_c - alpha[i1, j1]) <= thresh:
                        hit = True
                        break
            if hit:
                labels[i, j] = GROUND
                filled += 1
    return filled


def _thresholds(alpha: AlphaMatrix, p: SegParams):
    if np.issubdtype(alpha.alpha.dtype, np.integer):
        return to_raw(p.seed_thresh), to_raw(p.alpha_thresh)
    return p.seed_thresh, p.alpha_thresh


def init_seeds(alpha: AlphaMatrix, p: SegParams) -> LabelMask:
    """Ground the bottom-most valid cell of each column when its alpha passes."""
    seed_thresh, _ = _thresholds(alpha, p)
    valid = alpha.valid
    h, w = valid.shape
    labels = np.where(valid, NOT_GROUND, INVALID).astype(np.int8)
    has = valid.any(axis=0)
    bottom = h - 1 - np.argmax(valid[::-1], axis=0)
    cols = np.arange(w)
    seed = has & (alpha.alpha[bottom, cols] <= seed_thresh)
    labels[bottom[seed], cols[seed]] = GROUND
    return LabelMask(labels)


def flood_step(
    labels: LabelMask, alpha: AlphaMatrix, p: SegParams, iteration: int = 0
) -> tuple[LabelMask, int]:
    """One full sweep; returns the new mask and the number of newly grounded cells."""
    _, thresh = _thresholds(alpha, p)
    out = labels.labels.copy()
    src = labels.labels.copy() if p.schedule == "jacobi" else out
    reverse = p.sweep == "alternating" and iteration % 2 == 1
    a = alpha.alpha
    filled = _sweep(out, src, a, alpha.valid, a.dtype.type(thresh), MODE_CODES[p.neighbor_mode], reverse)
    return LabelMask(out), int(filled)


def run_flood(
    labels: LabelMask,
    alpha: AlphaMatrix,
    p: SegParams,
    iterations: int | None = None,
    stop_when_converged: bool = True,
) -> tuple[LabelMask, list[int]]:
    """Repeated sweeps; ``history[k]`` is the count grounded by sweep k."""
    n = p.flood_iterations if iterations is None else iterations
    history: list[int] = []
    for k in range(n):
        labels, filled = flood_step(labels, alpha, p, k)
        history.append(filled)
        if stop_when_converged and filled == 0:
            break
    return labels, history


@dataclass
class SegmentResult:
    image: RangeImage
    alpha: AlphaMatrix
    seeds: LabelMask
    labels: LabelMask
    history: list[int] = field(default_factory=list)


def segment_stages(img: RangeImage, p: SegParams, fixed_point: bool = False) -> SegmentResult:
    """Full pipeline with intermediates.

    ``fixed_point=True`` quantizes the frame and runs every stage on raw
    words, which is what the streaming model must reproduce.
    """
    if fixed_point and not np.issubdtype(img.range.dtype, np.integer):
        img = quantize_image(img)
    thresh = to_raw(p.repair_range_thresh) if fixed_point else None
    repaired = repair_pitch(repair_range(img, p, thresh))
    alpha = build_alpha(repaired, p.alpha_adjacency, p.alpha_form)
    seeds = init_seeds(alpha, p)
    labels, history = run_flood(seeds, alpha, p)
    return SegmentResult(repaired, alpha, seeds, labels, history)


def segment(img: RangeImage, p: SegParams, fixed_point: bool = False) -> LabelMask:
    return segment_stages(img, p, fixed_point).labels
