"""Top-down raster of a scored frame: TP green, FN red, FP blue, rest gray."""

from __future__ import annotations

import numpy as np
from PIL import Image, ImageDraw

from .metrics import bev_polygon

TP_COLOR = (0, 255, 0)
FN_COLOR = (255, 0, 0)
FP_COLOR = (0, 0, 255)
OTHER_COLOR = (128, 128, 128)
BACKGROUND = (0, 0, 0)
GT_OUTLINE = (255, 255, 255)
PRED_OUTLINE = (255, 255, 0)


def render_bev(
    xy: np.ndarray,
    pred: np.ndarray,
    gt: np.ndarray,
    meters_per_pixel: float = 0.1,
    extent: float | None = None,
    outlines: bool = True,
) -> Image.Image:
    """Rasterize points centered on the sensor; +x to the right, +y up.

    ``extent`` is the half-width of the square view in meters; by default it
    covers every point and is a whole number of pixels.
    """
    if meters_per_pixel <= 0:
        raise ValueError("meters_per_pixel must be > 0")
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if extent is None:
        reach = float(np.abs(xy).max()) if len(xy) else 1.0
        extent = meters_per_pixel * (np.ceil(reach / meters_per_pixel) + 1)
    size = int(np.ceil(2 * extent / meters_per_pixel - 1e-9))
    canvas = np.zeros((size, size, 3), dtype=np.uint8)
    canvas[:] = BACKGROUND

    def to_px(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        col = np.floor((pts[:, 0] + extent) / meters_per_pixel).astype(np.int64)
        row = np.floor((extent - pts[:, 1]) / meters_per_pixel).astype(np.int64)
        return row, col

    row, col = to_px(xy)
    inside = (row >= 0) & (row < size) & (col >= 0) & (col < size)
    layers = (
        (~pred & ~gt, OTHER_COLOR),
        (pred & gt, TP_COLOR),
        (~pred & gt, FN_COLOR),
        (pred & ~gt, FP_COLOR),
    )
    for mask, color in layers:
        m = mask & inside
        canvas[row[m], col[m]] = color

    img = Image.fromarray(canvas)
    if outlines:
        draw = ImageDraw.Draw(img)
        for pts, color in ((xy[gt], GT_OUTLINE), (xy[pred], PRED_OUTLINE)):
            poly = bev_polygon(pts)
            if not poly.occupancy.any():
                continue
            r, c = to_px(poly.vertices)
            loop = list(zip(c.tolist(), r.tolist()))
            draw.line(loop + loop[:1], fill=color, width=1)
    return img


def color_counts(img: Image.Image) -> dict[tuple[int, int, int], int]:
    arr = np.asarray(img).reshape(-1, 3)
    colors, counts = np.unique(arr, axis=0, return_counts=True)
    return {tuple(int(v) for v in c): int(n) for c, n in zip(colors, counts)}
