from __future__ import annotations

import math

import numpy as np
import pytest

from groundseg.metrics import bev_polygon, polygon_area
from groundseg.render import (
    FN_COLOR,
    FP_COLOR,
    GT_OUTLINE,
    PRED_OUTLINE,
    TP_COLOR,
    color_counts,
    render_bev,
)

MPP = 0.1


def disc_grid(radius: float = 10.0) -> np.ndarray:
    """One point per pixel center inside a disc."""
    c = (np.arange(-radius / MPP, radius / MPP) + 0.5) * MPP
    xx, yy = np.meshgrid(c, c)
    xy = np.c_[xx.ravel(), yy.ravel()]
    return xy[np.hypot(xy[:, 0], xy[:, 1]) <= radius]


def test_perfect_prediction_has_no_errors(rng):
    xy = disc_grid(5.0)
    gt = rng.random(len(xy)) < 0.5
    counts = color_counts(render_bev(xy, gt, gt, MPP))
    assert counts.get(FN_COLOR, 0) == 0 and counts.get(FP_COLOR, 0) == 0
    assert counts[TP_COLOR] > 0


def test_empty_prediction(rng):
    xy = disc_grid(5.0)
    gt = xy[:, 0] > 0
    counts = color_counts(render_bev(xy, np.zeros(len(xy), bool), gt, MPP, outlines=False))
    assert counts.get(TP_COLOR, 0) == 0
    assert counts[FN_COLOR] == gt.sum()


def test_quarter_vs_half_disc_pixel_areas():
    r = 10.0
    xy = disc_grid(r)
    gt = (xy[:, 0] > 0) & (xy[:, 1] > 0)
    pred = xy[:, 0] > 0
    counts = color_counts(render_bev(xy, pred, gt, MPP, extent=r, outlines=False))
    px = MPP * MPP
    quarter = math.pi * r * r / 4
    assert counts[TP_COLOR] * px == pytest.approx(quarter, rel=0.02)
    assert counts[FP_COLOR] * px == pytest.approx(quarter, rel=0.02)
    assert counts.get(FN_COLOR, 0) == 0
    # cross-check against the radial polygons of the two point sets
    tp_area = polygon_area(bev_polygon(xy[gt]))
    fp_area = polygon_area(bev_polygon(xy[pred])) - tp_area
    assert counts[TP_COLOR] * px == pytest.approx(tp_area, rel=0.02)
    assert counts[FP_COLOR] * px == pytest.approx(fp_area, rel=0.02)


def test_outlines_drawn():
    xy = disc_grid(5.0)
    gt = xy[:, 1] > 0
    img = render_bev(xy, xy[:, 0] > 0, gt, MPP)
    counts = color_counts(img)
    assert counts.get(GT_OUTLINE, 0) > 0 and counts.get(PRED_OUTLINE, 0) > 0
    assert img.size[0] == img.size[1]


def test_fixed_scale():
    xy = np.array([[10.0, 0.0], [-10.0, 0.0]])
    img = render_bev(xy, np.ones(2, bool), np.ones(2, bool), MPP, extent=20.0)
    assert img.size == (400, 400)
    with pytest.raises(ValueError):
        render_bev(xy, np.ones(2, bool), np.ones(2, bool), 0.0)
