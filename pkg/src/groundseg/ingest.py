"""
SemanticKITTI I/O and spherical projection.

Scans are stored as little-endian ``float32`` quadruples ``(x, y, z,
intensity)``; labels as little-endian ``uint32`` words whose low 16 bits carry
the semantic class. ``project`` turns an unorganized cloud into a dense
``RangeImage`` (row 0 is the top channel) plus an index map that remembers
where every raw point landed, so per-cell predictions can be read back per
point.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

logger = logging.getLogger(__name__)

#: SemanticKITTI classes merged into the ground truth: road, parking,
#: sidewalk, other-ground.
GROUND_CLASSES = (40, 44, 48, 49)

_POINT_BYTES = 16
_LABEL_BYTES = 4


@dataclass(frozen=True)
class PointCloud:
    """Unorganized scan, ``points`` is an ``(N, 4)`` array of x, y, z, intensity."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float32).reshape(-1, 4)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite values")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_xyz(cls, xyz: np.ndarray, intensity: np.ndarray | None = None) -> "PointCloud":
        xyz = np.asarray(xyz, dtype=np.float32).reshape(-1, 3)
        if intensity is None:
            intensity = np.zeros(len(xyz), dtype=np.float32)
        return cls(np.column_stack([xyz, np.asarray(intensity, dtype=np.float32)]))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]

    @property
    def intensity(self) -> np.ndarray:
        return self.points[:, 3]


@dataclass(frozen=True)
class SensorConfig:
    """Vertical/horizontal resolution and field of view of a spinning LiDAR."""

    channels: int
    horizontal_resolution: int
    fov_up: float  # degrees
    fov_down: float  # degrees
    max_range: float = 120.0  # meters
    name: str = "custom"

    def __post_init__(self) -> None:
        if not 16 <= self.channels <= 256:
            raise ValueError(f"channels must be in [16, 256], got {self.channels}")
        if self.horizontal_resolution < 360:
            raise ValueError(f"horizontal_resolution must be >= 360, got {self.horizontal_resolution}")
        if not self.fov_up > self.fov_down:
            raise ValueError("fov_up must be greater than fov_down")
        if not 0 < self.max_range <= 255:
            raise ValueError(f"max_range must be in (0, 255], got {self.max_range}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.channels, self.horizontal_resolution)

    def row_pitch(self) -> np.ndarray:
        """Pitch (radians) at the center of every row, top row first."""
        span = self.fov_up - self.fov_down
        deg = self.fov_up - (np.arange(self.channels) + 0.5) * span / self.channels
        return np.deg2rad(deg)

    def col_yaw(self) -> np.ndarray:
        """Yaw (radians) at the center of every column."""
        w = self.horizontal_resolution
        return (0.5 - (np.arange(w) + 0.5) / w) * 2.0 * np.pi


SENSOR_PRESETS: dict[str, SensorConfig] = {
    "hdl32": SensorConfig(32, 2048, 10.67, -30.67, 120.0, "hdl32"),
    "hdl64": SensorConfig(64, 2048, 3.0, -25.0, 120.0, "hdl64"),
    "os64": SensorConfig(64, 2048, 3.0, -25.0, 120.0, "os64"),
    "os128": SensorConfig(128, 2048, 22.5, -22.5, 120.0, "os128"),
}

#: Default preset per channel count, used by the benchmark.
PRESET_BY_CHANNELS = {32: "hdl32", 64: "os64", 128: "os128"}


def read_config_file(path: str | os.PathLike) -> dict:
    """Parse a ``.json`` or ``.toml`` file into a dict."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_sensor(spec: str | os.PathLike) -> SensorConfig:
    """Resolve a preset name (``hdl64``) or a JSON/TOML file into a SensorConfig.

    A config file may name a ``preset`` and override individual fields.
    """
    key = str(spec).lower()
    if key in SENSOR_PRESETS:
        return SENSOR_PRESETS[key]
    path = Path(spec)
    if not path.is_file():
        raise ValueError(f"unknown sensor preset or missing config file: {spec}")
    data = read_config_file(path)
    data = data.get("sensor", data)
    base = SENSOR_PRESETS.get(str(data.pop("preset", "")).lower())
    allowed = {f.name for f in fields(SensorConfig)}
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown sensor fields: {sorted(unknown)}")
    if base is not None:
        return replace(base, **data)
    return SensorConfig(**data)


@dataclass
class RangeImage:
    """Organized projection of one scan.

    ``range`` uses 0.0 as the invalid sentinel. ``pitch_valid`` tracks pitch
    availability separately from ``valid`` because pitch repair fills angles
    without creating range returns.
    """

    range: np.ndarray
    pitch: np.ndarray
    yaw: np.ndarray
    valid: np.ndarray
    pitch_valid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.pitch_valid is None:
            self.pitch_valid = self.valid.copy()
        else:
            self.pitch_valid = np.asarray(self.pitch_valid, dtype=bool)
        shapes = {a.shape for a in (self.range, self.pitch, self.yaw, self.valid, self.pitch_valid)}
        if len(shapes) != 1 or len(self.valid.shape) != 2:
            raise ValueError(f"range image grids must share one 2-D shape, got {shapes}")

    @property
    def height(self) -> int:
        return self.range.shape[0]

    @property
    def width(self) -> int:
        return self.range.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.range.shape

    def copy(self) -> "RangeImage":
        return RangeImage(
            self.range.copy(), self.pitch.copy(), self.yaw.copy(),
            self.valid.copy(), self.pitch_valid.copy(),
        )

    @classmethod
    def empty(cls, height: int, width: int) -> "RangeImage":
        z = np.zeros((height, width))
        return cls(z, z.copy(), z.copy(), np.zeros((height, width), dtype=bool))


@dataclass(frozen=True)
class ProjectionIndex:
    """Where each raw point landed.

    ``rows``/``cols`` are -1 for dropped points (zero range or beyond
    ``max_range``). A point that lost a cell collision keeps its cell
    coordinates but has ``winner`` False.
    """

    rows: np.ndarray
    cols: np.ndarray
    winner: np.ndarray
    n_zero_range: int = 0
    n_out_of_range: int = 0

    @property
    def assigned(self) -> np.ndarray:
        return self.rows >= 0

    @property
    def n_dropped(self) -> int:
        return self.n_zero_range + self.n_out_of_range

    @property
    def n_collisions(self) -> int:
        return int(np.count_nonzero(self.assigned & ~self.winner))

    def gather(self, grid: np.ndarray, fill=0) -> np.ndarray:
        """Read a per-cell grid back per point; dropped points get ``fill``."""
        out = np.full(len(self.rows), fill, dtype=grid.dtype)
        ok = self.assigned
        out[ok] = grid[self.rows[ok], self.cols[ok]]
        return out


def load_scan(path: str | os.PathLike) -> PointCloud:
    """Read a KITTI ``.bin`` scan."""
    raw = Path(path).read_bytes()
    if len(raw) % _POINT_BYTES:
        raise ValueError(f"malformed length: {len(raw)} bytes is not a multiple of {_POINT_BYTES}")
    pts = np.frombuffer(raw, dtype="<f4").reshape(-1, 4)
    if not np.all(np.isfinite(pts)):
        bad = int(np.count_nonzero(~np.isfinite(pts).all(axis=1)))
        raise ValueError(f"non-finite coordinate in {path} ({bad} points)")
    return PointCloud(pts.astype(np.float32))


def save_scan(path: str | os.PathLike, cloud: PointCloud) -> None:
    Path(path).write_bytes(np.ascontiguousarray(cloud.points, dtype="<f4").tobytes())


def load_labels(path: str | os.PathLike, n_points: int) -> np.ndarray:
    """Read a ``.label`` file and return the semantic class per point."""
    raw = Path(path).read_bytes()
    if len(raw) != _LABEL_BYTES * n_points:
        raise ValueError(
            f"length mismatch: {len(raw)} bytes for {n_points} points in {path}"
        )
    words = np.frombuffer(raw, dtype="<u4")
    return (words & 0xFFFF).astype(np.uint16)


def save_labels(path: str | os.PathLike, classes: np.ndarray, instance: np.ndarray | None = None) -> None:
    words = np.asarray(classes, dtype=np.uint32) & 0xFFFF
    if instance is not None:
        words = words | (np.asarray(instance, dtype=np.uint32) << 16)
    Path(path).write_bytes(words.astype("<u4").tobytes())


def ground_truth_mask(classes: Iterable[int] | np.ndarray) -> np.ndarray:
    return np.isin(np.asarray(classes, dtype=np.int64), GROUND_CLASSES)


def ground_truth_grid(gt_points: np.ndarray, index: ProjectionIndex, shape: tuple[int, int]) -> np.ndarray:
    """Per-cell ground truth taken from the point that won each cell."""
    grid = np.zeros(shape, dtype=bool)
    keep = index.assigned & index.winner
    grid[index.rows[keep], index.cols[keep]] = np.asarray(gt_points, dtype=bool)[keep]
    return grid


def project(cloud: PointCloud, cfg: SensorConfig) -> tuple[RangeImage, ProjectionIndex]:
    """Spherical projection with nearest-point-wins collisions.

    Ties on equal range go to the lower original index, so the output does
    not depend on point order.
    """
    h, w = cfg.shape
    xyz = cloud.xyz.astype(np.float64)
    n = len(xyz)
    r = np.sqrt(np.sum(xyz * xyz, axis=1))
    zero = r == 0.0
    far = (r > cfg.max_range) & ~zero
    ok = ~(zero | far)

    rows = np.full(n, -1, dtype=np.int64)
    cols = np.full(n, -1, dtype=np.int64)
    yaw = np.zeros(n)
    pitch = np.zeros(n)
    x, y, z = xyz[ok].T
    yaw[ok] = np.arctan2(y, x)
    pitch[ok] = np.arcsin(np.clip(z / r[ok], -1.0, 1.0))

    cols[ok] = np.floor(w * (0.5 - yaw[ok] / (2.0 * np.pi))).astype(np.int64) % w
    span = cfg.fov_up - cfg.fov_down
    row_f = np.floor(h * (cfg.fov_up - np.rad2deg(pitch[ok])) / span)
    rows[ok] = np.clip(row_f, 0, h - 1).astype(np.int64)

    img = RangeImage.empty(h, w)
    winner = np.zeros(n, dtype=bool)
    idx = np.flatnonzero(ok)
    if len(idx):
        cell = rows[idx] * w + cols[idx]
        # primary key cell, then range, then original index
        order = np.lexsort((idx, r[idx], cell))
        cell_sorted = cell[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = cell_sorted[1:] != cell_sorted[:-1]
        win = idx[order[first]]
        winner[win] = True
        rr, cc = rows[win], cols[win]
        img.range[rr, cc] = r[win]
        img.pitch[rr, cc] = pitch[win]
        img.yaw[rr, cc] = yaw[win]
        img.valid[rr, cc] = True
        img.pitch_valid[rr, cc] = True

    if zero.any() or far.any():
        logger.debug("projection dropped %d zero-range and %d out-of-range points",
                     int(zero.sum()), int(far.sum()))
    index = ProjectionIndex(rows, cols, winner, int(zero.sum()), int(far.sum()))
    return img, index


# ---------------------------------------------------------------------------
# Dataset layout
# ---------------------------------------------------------------------------

def sequence_dir(root: str | os.PathLike, sequence: str) -> Path:
    """Accept both ``<root>/sequences/<seq>`` and ``<root>/<seq>`` layouts."""
    root = Path(root)
    for cand in (root / "sequences" / sequence, root / sequence):
        if (cand / "velodyne").is_dir():
            return cand
    raise FileNotFoundError(f"no velodyne directory for sequence {sequence!r} under {root}")


def list_frames(seq_dir: str | os.PathLike) -> list[str]:
    return sorted(p.stem for p in (Path(seq_dir) / "velodyne").glob("*.bin"))


def scan_path(seq_dir: str | os.PathLike, frame: str) -> Path:
    return Path(seq_dir) / "velodyne" / f"{frame}.bin"


def label_path(seq_dir: str | os.PathLike, frame: str) -> Path:
    return Path(seq_dir) / "labels" / f"{frame}.label"
