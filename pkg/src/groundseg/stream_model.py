"""
Cycle-level software model of the streaming segmentation datapath.

The frame is read bottom-up (vertical index inverted) and left to right, one
point per clock. Every stage consumes its input stream one point per cycle,
keeps the lines it needs in a ring-buffer line buffer and emits one point per
cycle once its window is filled. Arithmetic is on raw 32-bit fixed-point
words (23 fraction bits), using the same combinational kernels as the
functional fixed-point path, so the output mask is bit-identical to
``propagate.segment(..., fixed_point=True)``.

Stage warm-up for a K-tap vertical window is ``ceil(K/2) * W + ceil(K/2)``
cycles; point-wise stages cost a single register cycle. Stacked flood-fill
blocks each perform one in-place sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .alpha import alpha_cell_fixed
from .fixedpoint import quantize_array, to_raw
from .ingest import RangeImage
from .preprocess import SegParams
from .propagate import GROUND, INVALID, MODE_CODES, NOT_GROUND, LabelMask, arm_fills

DEFAULT_CLOCK_HZ = 160e6
DEFAULT_BLOCKS = 3
#: Range repair half window used by the hardware (11-tap column window).
STREAM_HALF_WINDOW = 5


def window_warmup(taps: int, width: int) -> int:
    half = math.ceil(taps / 2)
    return half * width + half


@dataclass
class StageReport:
    name: str
    taps: int
    warmup_cycles: int
    buffer_words: int
    cycles: int


@dataclass
class PipelineReport:
    height: int
    width: int
    blocks: int
    clock_hz: float
    total_cycles: int
    warmup_cycles: int
    stages: list[StageReport] = field(default_factory=list)

    @property
    def payload_cycles(self) -> int:
        return self.total_cycles - self.warmup_cycles

    @property
    def estimated_time(self) -> float:
        return self.total_cycles / self.clock_hz

    @property
    def estimated_ms(self) -> float:
        return 1e3 * self.estimated_time

    def to_json(self) -> dict:
        return {
            "channels": self.height,
            "width": self.width,
            "blocks": self.blocks,
            "clock_hz": self.clock_hz,
            "total_cycles": self.total_cycles,
            "estimated_ms": self.estimated_ms,
        }


# ---------------------------------------------------------------------------
# Stage kernels. Each loops over local cycles t; input point t (if any) is
# written into the ring before output t - warmup is computed, and a read of a
# point not yet received raises.
# ---------------------------------------------------------------------------

@njit(cache=True)
def _check(idx, t, size):
    if idx > t or idx <= t - size:
        raise IndexError("line buffer read outside the buffered window")


@njit(cache=True)
def _pointwise_stage(n):
    """A one-cycle register stage; returns emission cycles."""
    emit = np.empty(n, dtype=np.int64)
    for t in range(n + 1):
        if t >= 1:
            emit[t - 1] = t
    return emit


@njit(cache=True)
def _convert_stage(x, y, z):
    n = x.size
    r = np.zeros(n)
    pitch = np.zeros(n)
    yaw = np.zeros(n)
    emit = np.empty(n, dtype=np.int64)
    for t in range(n + 1):
        if t >= 1:
            s = t - 1
            rr = math.sqrt(x[s] * x[s] + y[s] * y[s] + z[s] * z[s])
            r[s] = rr
            if rr > 0:
                pitch[s] = math.asin(min(1.0, max(-1.0, z[s] / rr)))
                yaw[s] = math.atan2(y[s], x[s])
            emit[s] = t
    return r, pitch, yaw, emit


@njit(cache=True)
def _range_repair_stage(rng_in, ok_in, width, half, thresh, equidistant, warmup):
    n = rng_in.size
    size = warmup + half * width + 1
    ring_r = np.zeros(size, dtype=np.int64)
    ring_ok = np.zeros(size, dtype=np.bool_)
    rng_out = np.zeros(n, dtype=np.int64)
    ok_out = np.zeros(n, dtype=np.bool_)
    emit = np.empty(n, dtype=np.int64)
    for t in range(n + warmup):
        if t < n:
            ring_r[t % size] = rng_in[t]
            ring_ok[t % size] = ok_in[t]
        s = t - warmup
        if s < 0:
            continue
        _check(s, t, size)
        r_c = ring_r[s % size]
        ok_c = ring_ok[s % size]
        if not ok_c:
            total = np.int64(0)
            count = np.int64(0)
            for k in range(1, half + 1):
                a = s - k * width
                if a < 0:
                    continue
                _check(a, t, size)
                if not ring_ok[a % size]:
                    continue
                ra = ring_r[a % size]
                for m in range(1, half + 1):
                    if equidistant and m != k:
                        continue
                    b = s + m * width
                    if b >= n:
                        continue
                    _check(b, t, size)
                    if not ring_ok[b % size]:
                        continue
                    rb = ring_r[b % size]
                    if abs(ra - rb) < thresh:
                        total += ra + rb
                        count += 1
            if count > 0:
                den = 2 * count
                r_c = (total + den // 2) // den
                ok_c = True
        rng_out[s] = r_c
        ok_out[s] = ok_c
        emit[s] = t
    return rng_out, ok_out, emit


@njit(cache=True)
def _pitch_repair_stage(p_in, pok_in, width, warmup):
    n = p_in.size
    size = warmup + 1
    ring_p = np.zeros(size, dtype=np.int64)
    ring_ok = np.zeros(size, dtype=np.bool_)
    p_out = np.zeros(n, dtype=np.int64)
    ok_out = np.zeros(n, dtype=np.bool_)
    emit = np.empty(n, dtype=np.int64)
    last = np.int64(0)
    have_last = False
    for t in range(n + warmup):
        if t < n:
            ring_p[t % size] = p_in[t]
            ring_ok[t % size] = pok_in[t]
        s = t - warmup
        if s < 0:
            continue
        col = s % width
        if col == 0:
            have_last = False
        _check(s, t, size)
        if ring_ok[s % size]:
            last = ring_p[s % size]
            have_last = True
            p_out[s] = last
            ok_out[s] = True
        elif have_last:
            p_out[s] = last
            ok_out[s] = True
        else:
            # leading gap: look ahead to the row's first valid pitch
            row_end = s - col + width
            for q in range(s + 1, row_end):
                _check(q, t, size)
                if ring_ok[q % size]:
                    p_out[s] = ring_p[q % size]
                    ok_out[s] = True
                    break
        emit[s] = t
    return p_out, ok_out, emit


@njit(cache=True)
def _alpha_stage(r_in, p_in, usable_in, width, height, printed, warmup):
    n = r_in.size
    size = warmup + width + 1
    ring_r = np.zeros(size, dtype=np.int64)
    ring_p = np.zeros(size, dtype=np.int64)
    ring_u = np.zeros(size, dtype=np.bool_)
    # previous output line, used to duplicate the second line into the top line
    prev_a = np.zeros(width, dtype=np.int64)
    prev_ok = np.zeros(width, dtype=np.bool_)
    a_out = np.zeros(n, dtype=np.int64)
    ok_out = np.zeros(n, dtype=np.bool_)
    emit = np.empty(n, dtype=np.int64)
    for t in range(n + warmup):
        if t < n:
            ring_r[t % size] = r_in[t]
            ring_p[t % size] = p_in[t]
            ring_u[t % size] = usable_in[t]
        s = t - warmup
        if s < 0:
            continue
        k = s // width
        col = s % width
        if k == height - 1 and height >= 2:
            a = prev_a[col]
            ok = prev_ok[col]
        else:
            a = np.int64(0)
            ok = False
            up = s + width
            if up < n:
                _check(s, t, size)
                _check(up, t, size)
                if ring_u[s % size] and ring_u[up % size]:
                    a = alpha_cell_fixed(ring_r[s % size], ring_p[s % size],
                                         ring_r[up % size], ring_p[up % size], printed)
                    ok = True
        prev_a[col] = a
        prev_ok[col] = ok
        a_out[s] = a
        ok_out[s] = ok
        emit[s] = t
    return a_out, ok_out, emit


@njit(cache=True)
def _seed_stage(a_in, ok_in, width, height, seed_thresh, seen, parity):
    """Seed init with a flip buffer: ``seen[c] == parity`` means column c is taken.

    The last line rewrites every entry with the current parity, so after the
    frame flips parity every column reads "not taken" without a reset pass.
    """
    n = a_in.size
    lab = np.empty(n, dtype=np.int8)
    emit = np.empty(n, dtype=np.int64)
    for t in range(n + 1):
        if t < 1:
            continue
        s = t - 1
        col = s % width
        if ok_in[s]:
            if seen[col] != parity:
                seen[col] = parity
                lab[s] = GROUND if a_in[s] <= seed_thresh else NOT_GROUND
            else:
                lab[s] = NOT_GROUND
        else:
            lab[s] = INVALID
        if s // width == height - 1:
            seen[col] = parity
        emit[s] = t
    return lab, emit


@njit(cache=True)
def _flood_stage(lab_in, a_in, ok_in, width, thresh, mode, warmup):
    """One in-place sweep. Cells already swept (below, left) are read from the
    output label FIFO; cells not yet swept (above, right) from the input
    line buffer."""
    n = lab_in.size
    size = warmup + 2 * width + 3
    ring_lab = np.zeros(size, dtype=np.int8)
    ring_a = np.zeros(size, dtype=a_in.dtype)
    ring_ok = np.zeros(size, dtype=np.bool_)
    fifo_size = 2 * width + 3
    fifo = np.full(fifo_size, INVALID, dtype=np.int8)
    lab_out = np.empty(n, dtype=np.int8)
    emit = np.empty(n, dtype=np.int64)
    cross = mode == 2
    # (stream offset row, column offset) of the four orthogonal arms:
    # below, above, right, left; "below" is the previous stream line
    arm_dr = (-1, 1, 0, 0)
    arm_dc = (0, 0, 1, -1)
    diag_dr = (-1, -1, 1, 1)
    diag_dc = (-1, 1, -1, 1)
    height = n // width
    for t in range(n + warmup):
        if t < n:
            ring_lab[t % size] = lab_in[t]
            ring_a[t % size] = a_in[t]
            ring_ok[t % size] = ok_in[t]
        s = t - warmup
        if s < 0:
            continue
        _check(s, t, size)
        k = s // width
        col = s % width
        lab = ring_lab[s % size]
        if ring_ok[s % size] and lab == NOT_GROUND:
            a_c = ring_a[s % size]
            hit = False
            for arm in range(4):
                k1 = k + arm_dr[arm]
                c1 = col + arm_dc[arm]
                if k1 < 0 or k1 >= height or c1 < 0 or c1 >= width:
                    continue
                q1 = k1 * width + c1
                _check(q1, t, size)
                swept1 = q1 < s
                lab1 = fifo[q1 % fifo_size] if swept1 else ring_lab[q1 % size]
                k2 = k1 + arm_dr[arm]
                c2 = c1 + arm_dc[arm]
                ok2 = False
                lab2 = np.int8(NOT_GROUND)
                a2 = a_c
                if 0 <= k2 < height and 0 <= c2 < width:
                    q2 = k2 * width + c2
                    _check(q2, t, size)
                    ok2 = ring_ok[q2 % size]
                    a2 = ring_a[q2 % size]
                    lab2 = fifo[q2 % fifo_size] if q2 < s else ring_lab[q2 % size]
                if arm_fills(a_c, lab1, ring_ok[q1 % size], ring_a[q1 % size],
                             lab2, ok2, a2, thresh, cross):
                    hit = True
                    break
            if not hit and mode == 1:
                for d in range(4):
                    k1 = k + diag_dr[d]
                    c1 = col + diag_dc[d]
                    if k1 < 0 or k1 >= height or c1 < 0 or c1 >= width:
                        continue
                    q1 = k1 * width + c1
                    _check(q1, t, size)
                    lab1 = fifo[q1 % fifo_size] if q1 < s else ring_lab[q1 % size]
                    if lab1 == GROUND and abs(a_c - ring_a[q1 % size]) <= thresh:
                        hit = True
                        break
            if hit:
                lab = np.int8(GROUND)
        fifo[s % fifo_size] = lab
        lab_out[s] = lab
        emit[s] = t
    return lab_out, emit


# ---------------------------------------------------------------------------

def _to_stream(grid: np.ndarray) -> np.ndarray:
    """Bottom-up, left-to-right stream order."""
    return np.ascontiguousarray(grid[::-1]).ravel()


def _from_stream(stream: np.ndarray, height: int, width: int) -> np.ndarray:
    return stream.reshape(height, width)[::-1].copy()


def stream_params(**overrides) -> SegParams:
    """Segmentation parameters with the hardware's 11-tap range repair window."""
    overrides.setdefault("repair_half_window", STREAM_HALF_WINDOW)
    return SegParams(**overrides)


class StreamPipeline:
    """Streaming datapath with persistent state (the seed flip buffer).

    Consecutive frames reuse the seed buffer without clearing it.
    """

    def __init__(self, width: int, params: SegParams | None = None,
                 blocks: int = DEFAULT_BLOCKS, clock_hz: float = DEFAULT_CLOCK_HZ) -> None:
        params = params or stream_params()
        if blocks < 1:
            raise ValueError("stacked_flood_blocks must be >= 1")
        if not clock_hz > 0:
            raise ValueError("clock_hz must be > 0")
        if params.alpha_adjacency != "adjacent":
            raise ValueError("the streaming datapath pairs only adjacent channels")
        if params.schedule != "in_place" or params.sweep != "forward":
            raise ValueError("the streaming datapath implements forward in-place sweeps only")
        self.width = width
        self.params = params
        self.blocks = blocks
        self.clock_hz = clock_hz
        self.seen = np.zeros(width, dtype=np.uint8)
        self.parity = np.uint8(1)

    def _stage(self, stages: list[StageReport], name: str, taps: int, warmup: int,
               buffer_words: int, emit: np.ndarray) -> None:
        n = len(emit)
        if n and not (emit[0] == warmup and np.array_equal(emit - emit[0], np.arange(n))):
            raise RuntimeError(f"stage {name} broke the one-point-per-cycle contract")
        stages.append(StageReport(name, taps, warmup, buffer_words, n + warmup))

    def run(self, img: RangeImage | None = None, xyz: np.ndarray | None = None,
            xyz_valid: np.ndarray | None = None) -> tuple[LabelMask, PipelineReport]:
        """Segment one frame.

        Pass a float or quantized ``img`` (converter bypassed), or Cartesian
        ``xyz`` of shape (H, W, 3) with its validity grid to run the converter.
        """
        p = self.params
        w = self.width
        stages: list[StageReport] = []

        if img is None:
            if xyz is None or xyz_valid is None:
                raise ValueError("need a range image or Cartesian grids")
            h = xyz.shape[0]
            valid = _to_stream(np.asarray(xyz_valid, dtype=bool))
            x, y, z = (_to_stream(np.where(xyz_valid, xyz[..., a], 0.0)).astype(np.float64) for a in range(3))
            r_f, p_f, _, emit = _convert_stage(x, y, z)
            self._stage(stages, "data_converter", 1, 1, 0, emit)
            r_f = np.where(valid, r_f, 0.0)
            p_f = np.where(valid, p_f, 0.0)
            pvalid = valid.copy()
            quantized = False
        else:
            h = img.height
            if img.width != w:
                raise ValueError(f"frame width {img.width} != pipeline width {w}")
            valid = _to_stream(img.valid)
            pvalid = _to_stream(img.pitch_valid)
            r_f = _to_stream(img.range)
            p_f = _to_stream(img.pitch)
            quantized = np.issubdtype(img.range.dtype, np.integer)
        n = h * w

        if quantized:
            r_q = r_f.astype(np.int64)
            p_q = p_f.astype(np.int64)
        else:
            r_q, over_r = quantize_array(r_f)
            p_q, over_p = quantize_array(p_f)
            if over_r.any() or over_p.any():
                raise OverflowError("frame values outside the fixed-point range")
            self._stage(stages, "quantizer", 1, 1, 0, _pointwise_stage(n))

        half = p.repair_half_window
        taps = 2 * half + 1
        wu = window_warmup(taps, w)
        r_q, valid, emit = _range_repair_stage(
            r_q, valid, w, half, np.int64(to_raw(p.repair_range_thresh)),
            p.pair_mode == "equidistant", wu)
        self._stage(stages, "range_repair", taps, wu, (taps - 1) * w, emit)

        wu = window_warmup(1, w)
        p_q, pvalid, emit = _pitch_repair_stage(p_q, pvalid, w, wu)
        self._stage(stages, "pitch_repair", 1, wu, w, emit)

        wu = window_warmup(2, w)
        a_q, a_ok, emit = _alpha_stage(r_q, p_q, valid & pvalid, w, h, p.alpha_form == "printed", wu)
        self._stage(stages, "alpha", 2, wu, w, emit)

        lab, emit = _seed_stage(a_q, a_ok, w, h, np.int64(to_raw(p.seed_thresh)), self.seen, self.parity)
        self.parity ^= np.uint8(1)
        self._stage(stages, "seed_init", 1, 1, w, emit)

        wu = window_warmup(5, w)
        thresh = np.int64(to_raw(p.alpha_thresh))
        mode = MODE_CODES[p.neighbor_mode]
        for b in range(self.blocks):
            lab, emit = _flood_stage(lab, a_q, a_ok, w, thresh, mode, wu)
            self._stage(stages, f"flood_fill_{b}", 5, wu, 4 * w + 2 * w, emit)

        warmup = sum(s.warmup_cycles for s in stages)
        report = PipelineReport(h, w, self.blocks, self.clock_hz, n + warmup, warmup, stages)
        return LabelMask(_from_stream(lab, h, w)), report


def run_pipeline(
    img: RangeImage,
    p: SegParams | None = None,
    stacked_flood_blocks: int = DEFAULT_BLOCKS,
    clock_hz: float = DEFAULT_CLOCK_HZ,
) -> tuple[LabelMask, PipelineReport]:
    """Stream one frame through a fresh pipeline."""
    pipe = StreamPipeline(img.width, p, stacked_flood_blocks, clock_hz)
    return pipe.run(img)


def cycle_estimate(height: int, width: int, blocks: int = DEFAULT_BLOCKS,
                   half_window: int = STREAM_HALF_WINDOW, quantizer: bool = True,
                   converter: bool = False) -> int:
    """Closed-form cycle count of the stage chain, for cross-checking runs."""
    warm = window_warmup(2 * half_window + 1, width) + window_warmup(1, width) \
        + window_warmup(2, width) + 1 + blocks * window_warmup(5, width)
    warm += int(quantizer) + int(converter)
    return height * width + warm
