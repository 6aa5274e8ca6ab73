"""
Point-wise F1/IoU, the bird's-eye-view radial polygon IoU, and PDF/CDF
distribution reports.

The BEV polygon keeps, for each 1-degree sector around the sensor, the
farthest ground point. Because both polygons are radial functions over the
same sectors, their intersection and union are the sector-wise min and max.
"""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass
from typing import Iterable, Sequence

import numpy as np

from .ingest import PointCloud

N_SECTORS = 360
SECTOR_RAD = 2.0 * np.pi / N_SECTORS
METRIC_NAMES = ("f1_ri", "iou_ri", "iou_bev")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class BevRadialPolygon:
    """Max distance per 1-degree sector; sector k covers [k-180, k-179) degrees."""

    radii: np.ndarray
    occupancy: np.ndarray

    @property
    def vertices(self) -> np.ndarray:
        """Cartesian vertices at sector centers, empty sectors at the origin."""
        theta = sector_centers()
        return np.column_stack([self.radii * np.cos(theta), self.radii * np.sin(theta)])


@dataclass(frozen=True)
class FrameScore:
    f1_ri: float
    iou_ri: float
    iou_bev: float


def confusion(pred, gt) -> ConfusionCounts:
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {gt.shape}")
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    return ConfusionCounts(tp, fp, fn, pred.size - tp - fp - fn)


def f1(c: ConfusionCounts) -> float:
    if c.tp == 0:
        return 1.0 if c.fp == 0 and c.fn == 0 else 0.0
    precision = c.tp / (c.tp + c.fp)
    recall = c.tp / (c.tp + c.fn)
    return 2 * precision * recall / (precision + recall)


def iou(c: ConfusionCounts) -> float:
    den = c.tp + c.fp + c.fn
    return 1.0 if den == 0 else c.tp / den


def sector_centers() -> np.ndarray:
    return np.deg2rad(np.arange(N_SECTORS) - 180.0 + 0.5)


def sector_index(xy: np.ndarray) -> np.ndarray:
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    theta = np.degrees(np.arctan2(xy[:, 1], xy[:, 0]))
    return np.clip(np.floor(theta + 180.0), 0, N_SECTORS - 1).astype(np.int64)


def bev_polygon(points) -> BevRadialPolygon:
    xy = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    radii = np.zeros(N_SECTORS)
    occ = np.zeros(N_SECTORS, dtype=bool)
    if len(xy):
        idx = sector_index(xy)
        rho = np.hypot(xy[:, 0], xy[:, 1])
        np.maximum.at(radii, idx, rho)
        occ[idx] = True
    return BevRadialPolygon(radii, occ)


def polygon_area(poly: BevRadialPolygon) -> float:
    """Shoelace area of the closed loop of sector-center vertices.

    Consecutive vertices are 1 degree apart, so each edge contributes the
    triangle ``0.5 * r_k * r_{k+1} * sin(1 deg)``.
    """
    r = poly.radii
    return float(0.5 * np.sin(SECTOR_RAD) * np.sum(r * np.roll(r, -1)))


def shoelace(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def polygon_intersection(a: BevRadialPolygon, b: BevRadialPolygon) -> BevRadialPolygon:
    occ = a.occupancy & b.occupancy
    return BevRadialPolygon(np.where(occ, np.minimum(a.radii, b.radii), 0.0), occ)


def polygon_union(a: BevRadialPolygon, b: BevRadialPolygon) -> BevRadialPolygon:
    occ = a.occupancy | b.occupancy
    return BevRadialPolygon(np.where(occ, np.maximum(a.radii, b.radii), 0.0), occ)


def iou_bev(pred_pts, gt_pts) -> float:
    pred = bev_polygon(pred_pts)
    gt = bev_polygon(gt_pts)
    if not pred.occupancy.any() and not gt.occupancy.any():
        return 1.0
    if not pred.occupancy.any() or not gt.occupancy.any():
        return 0.0
    union = polygon_area(polygon_union(pred, gt))
    if union == 0.0:
        return 1.0
    return polygon_area(polygon_intersection(pred, gt)) / union


def score_frame(pred_mask, gt_mask, cloud: PointCloud | np.ndarray) -> FrameScore:
    pred_mask = np.asarray(pred_mask, dtype=bool)
    gt_mask = np.asarray(gt_mask, dtype=bool)
    c = confusion(pred_mask, gt_mask)
    xyz = cloud.xyz if isinstance(cloud, PointCloud) else np.asarray(cloud)
    if len(xyz) != len(pred_mask):
        raise ValueError(f"masks cover {len(pred_mask)} points but the cloud has {len(xyz)}")
    xy = xyz[:, :2]
    return FrameScore(f1(c), iou(c), iou_bev(xy[pred_mask], xy[gt_mask]))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def distribution(values: Sequence[float], bins: int = 50) -> list[tuple[float, float, float, float]]:
    """Histogram density and empirical CDF (at each bin's upper edge) over [0, 1]."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("distribution of an empty score set")
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(np.clip(v, 0.0, 1.0), bins=edges)
    pdf = counts / (v.size * np.diff(edges))
    srt = np.sort(v)
    cdf = np.searchsorted(srt, edges[1:], side="right") / v.size
    return list(zip(edges[:-1], edges[1:], pdf, cdf))


def distribution_report(scores: Sequence[FrameScore], bins: int = 50) -> dict[str, list]:
    if not scores:
        raise ValueError("distribution report needs at least one score")
    return {
        name: distribution([getattr(s, name) for s in scores], bins)
        for name in METRIC_NAMES
    }


def distribution_csv(scores: Sequence[FrameScore], bins: int = 50) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "bin_lo", "bin_hi", "pdf", "cdf"])
    for name, rows in distribution_report(scores, bins).items():
        for lo, hi, pdf, cdf in rows:
            w.writerow([name, f"{lo:.4f}", f"{hi:.4f}", f"{pdf:.6f}", f"{cdf:.6f}"])
    return buf.getvalue()


def scores_csv(frames: Iterable[tuple[str, FrameScore]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame_id", *METRIC_NAMES])
    for frame_id, s in frames:
        w.writerow([frame_id, *(f"{v:.6f}" for v in astuple(s))])
    return buf.getvalue()


def mean_score(scores: Sequence[FrameScore]) -> FrameScore:
    arr = np.array([astuple(s) for s in scores], dtype=np.float64)
    return FrameScore(*arr.mean(axis=0))
