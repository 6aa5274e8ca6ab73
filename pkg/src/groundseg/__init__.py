"""Channel-based LiDAR ground segmentation on range images, with a fixed-point
streaming datapath model and evaluation tooling."""

from __future__ import annotations

__version__ = "0.1.0"

from .alpha import AlphaMatrix, build_alpha
from .baseline_ransac import PlaneModel, ransac_ground
from .ingest import (
    PointCloud,
    ProjectionIndex,
    RangeImage,
    SensorConfig,
    SENSOR_PRESETS,
    load_labels,
    load_scan,
    load_sensor,
    project,
)
from .methods import predict_points
from .metrics import FrameScore, bev_polygon, confusion, f1, iou, iou_bev, score_frame
from .preprocess import SegParams, load_params, repair_pitch, repair_range
from .propagate import GROUND, INVALID, NOT_GROUND, LabelMask, run_flood, segment
from .stream_model import PipelineReport, StreamPipeline, run_pipeline

__all__ = [
    "AlphaMatrix", "FrameScore", "GROUND", "INVALID", "LabelMask", "NOT_GROUND",
    "PipelineReport", "PlaneModel", "PointCloud", "ProjectionIndex", "RangeImage",
    "SENSOR_PRESETS", "SegParams", "SensorConfig", "StreamPipeline", "bev_polygon",
    "build_alpha", "confusion", "f1", "iou", "iou_bev", "load_labels", "load_params",
    "load_scan", "load_sensor", "predict_points", "project", "ransac_ground",
    "repair_pitch", "repair_range", "run_flood", "run_pipeline", "score_frame", "segment",
]
