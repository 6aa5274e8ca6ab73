"""
Ray-cast synthetic scans for tests and benchmarks.

Every cell of the range image casts one ray through its row/column center
against a ground plane plus optional walls and boxes; the nearest hit wins.
The per-cell ``surface`` grid records what was hit so tests have an exact
ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ingest import PointCloud, RangeImage, SensorConfig

NOTHING, GROUND_SURFACE, WALL_SURFACE, BOX_SURFACE = 0, 1, 2, 3

# SemanticKITTI classes used when a synthetic frame is written as a dataset
SURFACE_CLASS = {NOTHING: 0, GROUND_SURFACE: 40, WALL_SURFACE: 50, BOX_SURFACE: 10}


@dataclass(frozen=True)
class Wall:
    """Vertical rectangle over the XY segment p0-p1, between z_min and z_max."""

    p0: tuple[float, float]
    p1: tuple[float, float]
    z_min: float = -10.0
    z_max: float = 10.0


@dataclass(frozen=True)
class ArcWall:
    """Vertical cylinder segment at constant horizontal distance ``radius``."""

    radius: float
    yaw_min: float
    yaw_max: float
    z_min: float = -10.0
    z_max: float = 10.0


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]


@dataclass
class Scene:
    sensor_height: float = 2.0
    slope: tuple[float, float] = (0.0, 0.0)  # dz/dx, dz/dy of the ground
    walls: list[Wall | ArcWall] = field(default_factory=list)
    boxes: list[Box] = field(default_factory=list)


@dataclass
class SyntheticFrame:
    image: RangeImage
    surface: np.ndarray
    xyz: np.ndarray  # (H, W, 3) hit points, zeros where invalid

    @property
    def ground(self) -> np.ndarray:
        return self.surface == GROUND_SURFACE

    def to_cloud(self) -> tuple[PointCloud, np.ndarray]:
        """Valid cells as an unorganized cloud plus their semantic classes."""
        ok = self.image.valid
        classes = np.vectorize(SURFACE_CLASS.get)(self.surface[ok]).astype(np.uint16)
        return PointCloud.from_xyz(self.xyz[ok]), classes


def _ray_dirs(cfg: SensorConfig) -> np.ndarray:
    pitch = cfg.row_pitch()[:, None]
    yaw = cfg.col_yaw()[None, :]
    return np.stack(np.broadcast_arrays(
        np.cos(pitch) * np.cos(yaw), np.cos(pitch) * np.sin(yaw), np.sin(pitch)
    ), axis=-1)


def _hit_ground(d: np.ndarray, scene: Scene) -> np.ndarray:
    sx, sy = scene.slope
    den = d[..., 2] - sx * d[..., 0] - sy * d[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -scene.sensor_height / den
    return np.where(den < 0, t, np.inf)


def _hit_wall(d: np.ndarray, wall: Wall) -> np.ndarray:
    (x0, y0), (x1, y1) = wall.p0, wall.p1
    ex, ey = x1 - x0, y1 - y0
    dx, dy = d[..., 0], d[..., 1]
    den = dx * ey - dy * ex
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (x0 * ey - y0 * ex) / den
        u = (x0 * dy - y0 * dx) / den
    z = t * d[..., 2]
    ok = (np.abs(den) > 1e-12) & (t > 0) & (u >= 0) & (u <= 1) & (z >= wall.z_min) & (z <= wall.z_max)
    return np.where(ok, t, np.inf)


def _hit_arc(d: np.ndarray, wall: ArcWall) -> np.ndarray:
    horiz = np.hypot(d[..., 0], d[..., 1])
    with np.errstate(divide="ignore"):
        t = wall.radius / horiz
    yaw = np.arctan2(d[..., 1], d[..., 0])
    z = t * d[..., 2]
    ok = (yaw >= wall.yaw_min) & (yaw <= wall.yaw_max) & (z >= wall.z_min) & (z <= wall.z_max)
    return np.where(ok, t, np.inf)


def _hit_box(d: np.ndarray, box: Box) -> np.ndarray:
    t_near = np.full(d.shape[:-1], -np.inf)
    t_far = np.full(d.shape[:-1], np.inf)
    for a in range(3):
        da = d[..., a]
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = box.lo[a] / da
            t1 = box.hi[a] / da
        lo = np.minimum(t0, t1)
        hi = np.maximum(t0, t1)
        parallel = np.abs(da) < 1e-15
        inside = (box.lo[a] <= 0) & (0 <= box.hi[a])
        lo = np.where(parallel, np.where(inside, -np.inf, np.inf), lo)
        hi = np.where(parallel, np.where(inside, np.inf, -np.inf), hi)
        t_near = np.maximum(t_near, lo)
        t_far = np.minimum(t_far, hi)
    ok = (t_near <= t_far) & (t_near > 0)
    return np.where(ok, t_near, np.inf)


def render_scene(
    cfg: SensorConfig,
    scene: Scene | None = None,
    noise: float = 0.0,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> SyntheticFrame:
    """Ray-cast ``scene`` for every cell of ``cfg``'s range image."""
    scene = scene or Scene()
    rng = rng or np.random.default_rng(0)
    d = _ray_dirs(cfg)
    hits = [(_hit_ground(d, scene), GROUND_SURFACE)]
    hits += [(_hit_arc(d, w) if isinstance(w, ArcWall) else _hit_wall(d, w), WALL_SURFACE)
             for w in scene.walls]
    hits += [(_hit_box(d, b), BOX_SURFACE) for b in scene.boxes]
    ts = np.stack([t for t, _ in hits])
    kinds = np.array([k for _, k in hits])
    best = np.argmin(ts, axis=0)
    t = np.take_along_axis(ts, best[None], axis=0)[0]
    surface = kinds[best]

    if noise > 0:
        t = t + rng.normal(0.0, noise, t.shape)
    valid = np.isfinite(t) & (t > 0) & (t <= cfg.max_range)
    if dropout > 0:
        valid &= rng.random(t.shape) >= dropout
    surface = np.where(valid, surface, NOTHING)
    rng_img = np.where(valid, t, 0.0)

    h, w = cfg.shape
    pitch = np.broadcast_to(cfg.row_pitch()[:, None], (h, w))
    yaw = np.broadcast_to(cfg.col_yaw()[None, :], (h, w))
    img = RangeImage(
        rng_img, np.where(valid, pitch, 0.0), np.where(valid, yaw, 0.0), valid.copy()
    )
    xyz = np.where(valid[..., None], d * rng_img[..., None], 0.0)
    return SyntheticFrame(img, surface, xyz)


def flat_frame(cfg: SensorConfig, sensor_height: float = 2.0) -> SyntheticFrame:
    return render_scene(cfg, Scene(sensor_height=sensor_height))


def wall_frame(cfg: SensorConfig, distance: float = 10.0, half_angle: float = 0.6,
               sensor_height: float = 2.0) -> SyntheticFrame:
    """Flat ground and a tall wall facing the sensor at constant ``distance``.

    The wall spans yaw in [-half_angle, half_angle]; its base is a clean range
    discontinuity in every column.
    """
    wall = ArcWall(distance, -half_angle, half_angle, -sensor_height, 50.0)
    return render_scene(cfg, Scene(sensor_height=sensor_height, walls=[wall]))


def random_scene(rng: np.random.Generator, sensor_height: float = 2.0) -> Scene:
    """Gently sloped ground with a few boxes (cars) and walls (buildings)."""
    slope = tuple(rng.uniform(-0.03, 0.03, 2))
    boxes = []
    for _ in range(rng.integers(2, 7)):
        r = rng.uniform(5, 30)
        a = rng.uniform(-np.pi, np.pi)
        cx, cy = r * np.cos(a), r * np.sin(a)
        lx, ly, hz = rng.uniform(1.5, 4.5), rng.uniform(1.5, 2.5), rng.uniform(1.2, 2.5)
        ground_z = -sensor_height + slope[0] * cx + slope[1] * cy
        boxes.append(Box((cx - lx / 2, cy - ly / 2, ground_z - 0.5), (cx + lx / 2, cy + ly / 2, ground_z + hz)))
    walls = []
    for _ in range(rng.integers(1, 4)):
        r = rng.uniform(15, 40)
        a = rng.uniform(-np.pi, np.pi)
        c = np.array([r * np.cos(a), r * np.sin(a)])
        tangent = np.array([-np.sin(a), np.cos(a)]) * rng.uniform(5, 20)
        walls.append(Wall(tuple(c - tangent), tuple(c + tangent), -sensor_height - 2.0, 20.0))
    return Scene(sensor_height, slope, walls, boxes)
