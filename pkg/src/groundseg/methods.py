"""Per-point ground prediction for the three comparable methods."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .baseline_ransac import DEFAULT_DIST_THRESH, DEFAULT_MAX_ITERS, ransac_ground
from .ingest import PointCloud, SensorConfig, project
from .preprocess import SegParams
from .propagate import segment

METHODS = ("ours", "four_way", "ransac")


def method_params(method: str, params: SegParams) -> SegParams:
    """``four_way`` is the depth-based comparison: same pipeline, N4 fill only."""
    if method == "ours":
        return params
    if method == "four_way":
        return replace(params, neighbor_mode="four_way")
    raise ValueError(f"method {method!r} has no segmentation parameters")


def predict_points(
    cloud: PointCloud,
    sensor: SensorConfig,
    method: str = "ours",
    params: SegParams | None = None,
    ransac_thresh: float = DEFAULT_DIST_THRESH,
    ransac_iters: int = DEFAULT_MAX_ITERS,
    seed: int = 0,
) -> np.ndarray:
    """Boolean ground prediction for every point of ``cloud``.

    Range-image methods label cells; each point takes the label of the cell it
    projected to (dropped points are not ground).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if method == "ransac":
        if len(cloud) < 3:
            return np.zeros(len(cloud), dtype=bool)
        _, inliers = ransac_ground(cloud, ransac_thresh, ransac_iters, seed)
        return inliers
    img, index = project(cloud, sensor)
    labels = segment(img, method_params(method, params or SegParams()))
    return index.gather(labels.ground, fill=False)
