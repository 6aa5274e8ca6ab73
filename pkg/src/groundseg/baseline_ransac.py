"""RANSAC single-plane ground baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import PointCloud

DEFAULT_DIST_THRESH = 0.2
DEFAULT_MAX_ITERS = 200
_EPS = 1e-9


@dataclass(frozen=True)
class PlaneModel:
    """Plane ``normal . p + offset = 0`` with a unit normal."""

    normal: np.ndarray
    offset: float

    def distance(self, xyz: np.ndarray) -> np.ndarray:
        return np.abs(xyz @ self.normal + self.offset)


def _plane_from_points(p0, p1, p2) -> PlaneModel | None:
    n = np.cross(p1 - p0, p2 - p0)
    norm = np.linalg.norm(n)
    scale = max(np.linalg.norm(p1 - p0), np.linalg.norm(p2 - p0), 1.0)
    if norm <= _EPS * scale * scale:
        return None
    n = n / norm
    return PlaneModel(n, float(-n @ p0))


def fit_plane_lstsq(xyz: np.ndarray) -> PlaneModel:
    """Total least squares plane through ``xyz`` (smallest singular vector)."""
    centroid = xyz.mean(axis=0)
    _, _, vt = np.linalg.svd(xyz - centroid, full_matrices=False)
    n = vt[-1]
    return PlaneModel(n, float(-n @ centroid))


def _orient_up(plane: PlaneModel) -> PlaneModel:
    if plane.normal[2] < 0:
        return PlaneModel(-plane.normal, -plane.offset)
    return plane


def ransac_ground(
    cloud: PointCloud | np.ndarray,
    dist_thresh: float = DEFAULT_DIST_THRESH,
    max_iters: int = DEFAULT_MAX_ITERS,
    seed: int = 0,
    refit: bool = True,
) -> tuple[PlaneModel, np.ndarray]:
    """Best sampled plane, refit on its inliers; the inlier mask is the prediction.

    The least-squares refit is kept only when it does not lose inliers.
    Degenerate (collinear) samples are redrawn and do not consume iterations.
    """
    xyz = cloud.xyz if isinstance(cloud, PointCloud) else np.asarray(cloud)
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    n = len(xyz)
    if n < 3:
        raise ValueError(f"RANSAC needs at least 3 points, got {n}")
    centered = xyz - xyz.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[1] <= _EPS * max(sv[0], 1.0):
        raise ValueError("all points are collinear; no plane is defined")

    rng = np.random.default_rng(seed)
    best: PlaneModel | None = None
    best_count = -1
    done = 0
    attempts = 0
    while done < max_iters and attempts < 20 * max_iters:
        attempts += 1
        i, j, k = rng.choice(n, size=3, replace=False)
        plane = _plane_from_points(xyz[i], xyz[j], xyz[k])
        if plane is None:
            continue
        done += 1
        count = int(np.count_nonzero(plane.distance(xyz) <= dist_thresh))
        if count > best_count:
            best, best_count = plane, count
    if best is None:
        raise ValueError("no non-degenerate sample found")

    inliers = best.distance(xyz) <= dist_thresh
    if refit and np.count_nonzero(inliers) >= 3:
        fitted = fit_plane_lstsq(xyz[inliers])
        fitted_inliers = fitted.distance(xyz) <= dist_thresh
        if np.count_nonzero(fitted_inliers) >= best_count:
            best, inliers = fitted, fitted_inliers
    return _orient_up(best), inliers
