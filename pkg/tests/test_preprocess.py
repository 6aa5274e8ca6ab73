from __future__ import annotations

import itertools
import json
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from groundseg.fixedpoint import quantize_array, to_raw
from groundseg.ingest import RangeImage
from groundseg.preprocess import SegParams, load_params, repair_pitch, repair_range


def column_image(values) -> RangeImage:
    """One-column image; ``None`` marks an invalid cell."""
    rng = np.array([[0.0 if v is None else v] for v in values])
    valid = rng != 0.0
    return RangeImage(rng, np.zeros_like(rng), np.zeros_like(rng), valid)


def row_pitch_image(pitches) -> RangeImage:
    p = np.array([[0.0 if v is None else v for v in pitches]])
    ok = np.array([[v is not None for v in pitches]])
    return RangeImage(np.ones_like(p), p, np.zeros_like(p), np.ones_like(ok), ok)


def brute_force_repair(col, center, half, thresh):
    """Enumerate every (up, down) pair around ``center``; mean of members with multiplicity."""
    ups = [col[center - k] for k in range(1, half + 1) if center - k >= 0]
    downs = [col[center + m] for m in range(1, half + 1) if center + m < len(col)]
    members = []
    for u, d in itertools.product(ups, downs):
        if u is not None and d is not None and abs(u - d) < thresh:
            members += [u, d]
    return sum(members) / len(members) if members else None


def test_repair_example_matches_pair_oracle():
    col = [5.0, 5.1, None, 4.9, 5.0]
    expected = brute_force_repair(col, 2, 2, 0.5)
    # Members 5.1, 4.9, 5.1, 5.0, 5.0, 4.9, 5.0, 5.0 sum to 40.0 over 8.
    assert expected == pytest.approx(5.0)
    out = repair_range(column_image(col), SegParams())
    assert out.valid[2, 0]
    assert out.range[2, 0] == pytest.approx(expected, abs=1e-12)


def test_repair_no_qualifying_pair():
    out = repair_range(column_image([5.0, 5.1, None, 80.0, 79.9]), SegParams())
    assert not out.valid[2, 0] and out.range[2, 0] == 0.0


def test_repair_all_valid_identity():
    img = column_image([5.0, 6.0, 7.0, 8.0])
    out = repair_range(img, SegParams())
    np.testing.assert_array_equal(out.range, img.range)


def test_repair_threshold_is_strict():
    out = repair_range(column_image([5.0, None, 5.5]), SegParams(repair_half_window=1))
    assert not out.valid[1, 0]


def test_equidistant_mode_uses_fewer_pairs():
    col = [5.0, 5.1, None, 4.9, 5.0]
    p = SegParams(pair_mode="equidistant")
    # Pairs (5.1, 4.9) and (5.0, 5.0) only.
    assert repair_range(column_image(col), p).range[2, 0] == pytest.approx(20.0 / 4)


def test_fixed_point_repair_rounds_half_up():
    raw = np.array([[3], [0], [4]], dtype=np.int64)
    img = RangeImage(raw, np.zeros_like(raw), np.zeros_like(raw), raw != 0)
    out = repair_range(img, SegParams(repair_half_window=1), thresh=to_raw(0.5))
    assert out.range[1, 0] == 4  # (3 + 4) / 2 = 3.5 -> 4


def test_fixed_point_repair_tracks_float(rng):
    vals = rng.uniform(4, 6, (40, 8))
    valid = rng.random(vals.shape) > 0.3
    vals = np.where(valid, vals, 0.0)
    img = RangeImage(vals, np.zeros_like(vals), np.zeros_like(vals), valid)
    raw, _ = quantize_array(vals)
    img_q = RangeImage(raw, np.zeros_like(raw), np.zeros_like(raw), valid)
    p = SegParams(repair_range_thresh=5.0)
    f = repair_range(img, p)
    q = repair_range(img_q, p, thresh=to_raw(5.0))
    np.testing.assert_array_equal(f.valid, q.valid)
    np.testing.assert_allclose(q.range / 2.0**23, f.range, atol=2.0**-23)


def test_pitch_repair_examples():
    out = repair_pitch(row_pitch_image([0.1, None, None, 0.1]))
    np.testing.assert_allclose(out.pitch[0], [0.1] * 4)
    assert out.pitch_valid.all()
    out = repair_pitch(row_pitch_image([None, 0.2]))
    np.testing.assert_allclose(out.pitch[0], [0.2, 0.2])
    img = row_pitch_image([0.3, 0.2, 0.1])
    np.testing.assert_array_equal(repair_pitch(img).pitch, img.pitch)


def test_pitch_repair_forward_fill():
    out = repair_pitch(row_pitch_image([None, 0.3, None, 0.1, None]))
    np.testing.assert_allclose(out.pitch[0], [0.3, 0.3, 0.3, 0.1, 0.1])


def test_pitch_repair_empty_row_warns(caplog):
    img = row_pitch_image([None, None])
    with caplog.at_level(logging.WARNING, logger="groundseg.preprocess"):
        out = repair_pitch(img)
    assert not out.pitch_valid.any()
    assert "without any valid pitch" in caplog.text


@st.composite
def pitch_images(draw):
    h = draw(st.integers(1, 6))
    w = draw(st.integers(1, 12))
    p = draw(arrays(np.float64, (h, w), elements=st.floats(-0.5, 0.5)))
    ok = draw(arrays(np.bool_, (h, w)))
    return RangeImage(np.ones((h, w)), np.where(ok, p, 0.0), np.zeros((h, w)), np.ones((h, w), bool), ok)


@settings(max_examples=200, deadline=None)
@given(pitch_images())
def test_pitch_repair_idempotent(img):
    once = repair_pitch(img)
    twice = repair_pitch(once)
    np.testing.assert_array_equal(once.pitch, twice.pitch)
    np.testing.assert_array_equal(once.pitch_valid, twice.pitch_valid)
    assert np.all(once.pitch_valid >= img.pitch_valid)


@st.composite
def range_images(draw):
    h = draw(st.integers(1, 12))
    w = draw(st.integers(1, 4))
    r = draw(arrays(np.float64, (h, w), elements=st.floats(1.0, 100.0)))
    ok = draw(arrays(np.bool_, (h, w)))
    return RangeImage(np.where(ok, r, 0.0), np.zeros((h, w)), np.zeros((h, w)), ok)


@settings(max_examples=200, deadline=None)
@given(range_images(), st.integers(1, 4), st.floats(0.1, 50.0))
def test_range_repair_invariants(img, half, thresh):
    p = SegParams(repair_half_window=half, repair_range_thresh=thresh)
    out = repair_range(img, p)
    np.testing.assert_array_equal(out.range[img.valid], img.range[img.valid])
    assert np.all(out.valid >= img.valid)
    h, _ = img.shape
    for i, j in zip(*np.nonzero(out.valid & ~img.valid)):
        lo, hi = max(0, i - half), min(h, i + half + 1)
        members = img.range[lo:hi, j][img.valid[lo:hi, j]]
        assert members.min() - 1e-9 <= out.range[i, j] <= members.max() + 1e-9
        col = [v if ok else None for v, ok in zip(img.range[:, j], img.valid[:, j])]
        assert out.range[i, j] == pytest.approx(brute_force_repair(col, i, half, thresh))


@pytest.mark.parametrize("kwargs", [
    dict(flood_iterations=0), dict(alpha_thresh=0.0), dict(seed_thresh=-1.0),
    dict(repair_range_thresh=0.0), dict(repair_half_window=0), dict(neighbor_mode="six_way"),
])
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        SegParams(**kwargs)


def test_params_file_round_trip(tmp_path):
    p = SegParams(alpha_thresh=0.1, neighbor_mode="four_way")
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"params": p.to_dict()}))
    assert load_params(path) == p
    path.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ValueError, match="unknown"):
        load_params(path)
