from __future__ import annotations

import numpy as np
import pytest

from groundseg.fixedpoint import quantize_image
from groundseg.ingest import RangeImage, SensorConfig
from groundseg.propagate import INVALID, segment
from groundseg.stream_model import (
    STREAM_HALF_WINDOW,
    StreamPipeline,
    cycle_estimate,
    run_pipeline,
    stream_params,
    window_warmup,
)
from groundseg.synthetic import flat_frame, random_scene, render_scene


def scene_image(cfg, seed, noise=0.02, dropout=0.05) -> RangeImage:
    rng = np.random.default_rng(seed)
    return render_scene(cfg, random_scene(rng), noise=noise, dropout=dropout, rng=rng).image


def functional(img, blocks, **kw):
    return segment(img, stream_params(flood_iterations=blocks, **kw), fixed_point=True).labels


def test_window_warmup():
    assert window_warmup(11, 2048) == 6 * 2048 + 6
    assert window_warmup(5, 100) == 303
    assert window_warmup(1, 7) == 8


@pytest.mark.parametrize("mode", ["four_way", "eight_way", "cross_eight_way"])
@pytest.mark.parametrize("blocks", [1, 3])
def test_bit_exact_with_functional_path(small_sensor, mode, blocks):
    img = scene_image(small_sensor, 10 + blocks)
    mask, _ = run_pipeline(img, stream_params(neighbor_mode=mode), blocks)
    np.testing.assert_array_equal(mask.labels, functional(img, blocks, neighbor_mode=mode))


def test_bit_exact_on_quantized_input(small_sensor):
    img = quantize_image(scene_image(small_sensor, 4))
    mask, report = run_pipeline(img)
    np.testing.assert_array_equal(mask.labels, functional(img, 3))
    assert "quantizer" not in [s.name for s in report.stages]


def test_equidistant_and_printed_modes(small_sensor):
    img = scene_image(small_sensor, 5)
    for kw in (dict(pair_mode="equidistant"), dict(alpha_form="printed"), dict(repair_half_window=2)):
        mask, _ = run_pipeline(img, stream_params(**kw), 2)
        np.testing.assert_array_equal(mask.labels, functional(img, 2, **kw))


def test_payload_is_one_point_per_cycle(small_sensor):
    img = scene_image(small_sensor, 6)
    _, report = run_pipeline(img)
    h, w = img.shape
    assert report.payload_cycles == h * w
    assert report.total_cycles == cycle_estimate(h, w, 3, STREAM_HALF_WINDOW)
    assert all(s.cycles - s.warmup_cycles == h * w for s in report.stages)


def test_seed_flip_buffer_across_frames(small_sensor):
    """Consecutive frames through one pipeline match fresh pipelines, including
    columns that have no valid cell in some frames."""
    pipe = StreamPipeline(small_sensor.horizontal_resolution)
    rng = np.random.default_rng(0)
    for k in range(5):
        img = scene_image(small_sensor, 100 + k)
        dead = rng.random(img.width) < 0.2
        img.valid[:, dead] = False
        img.pitch_valid[:, dead] = False
        img.range[:, dead] = 0.0
        mask, _ = pipe.run(img)
        np.testing.assert_array_equal(mask.labels, functional(img, 3), err_msg=f"frame {k}")


def test_converter_stage_from_cartesian(small_sensor):
    frame = render_scene(small_sensor, random_scene(np.random.default_rng(8)))
    pipe = StreamPipeline(small_sensor.horizontal_resolution)
    mask, report = pipe.run(xyz=frame.xyz, xyz_valid=frame.image.valid)
    assert report.stages[0].name == "data_converter"
    ref, _ = run_pipeline(frame.image)
    agree = (mask.labels == ref.labels)[frame.image.valid].mean()
    assert agree >= 0.995


def test_one_by_one_frame():
    img = RangeImage(np.array([[5.0]]), np.array([[0.0]]), np.array([[0.0]]), np.array([[True]]))
    mask, report = run_pipeline(img)
    assert report.payload_cycles == 1
    assert report.total_cycles == 1 + report.warmup_cycles
    np.testing.assert_array_equal(mask.labels, functional(img, 3))


def test_flat_frame_all_ground():
    cfg = SensorConfig(32, 1024, 10.67, -30.67)
    frame = flat_frame(cfg)
    mask, _ = run_pipeline(frame.image)
    labelled = mask.labels != INVALID
    assert labelled.sum() > 0.5 * frame.image.valid.sum()
    assert mask.ground[labelled].all()


def test_estimated_time_scales_with_clock(small_sensor):
    img = flat_frame(small_sensor).image
    _, a = run_pipeline(img, clock_hz=160e6)
    _, b = run_pipeline(img, clock_hz=320e6)
    assert a.total_cycles == b.total_cycles
    assert a.estimated_ms == pytest.approx(2 * b.estimated_ms)
    assert set(a.to_json()) == {"channels", "width", "blocks", "clock_hz", "total_cycles", "estimated_ms"}


@pytest.mark.parametrize("kwargs", [dict(blocks=0), dict(clock_hz=0.0)])
def test_pipeline_validation(kwargs):
    with pytest.raises(ValueError):
        StreamPipeline(512, **kwargs)


@pytest.mark.parametrize("override", [dict(alpha_adjacency="skip_invalid"), dict(schedule="jacobi"),
                                      dict(sweep="alternating")])
def test_unstreamable_options_rejected(override):
    with pytest.raises(ValueError):
        StreamPipeline(512, stream_params(**override))


def test_width_mismatch(small_sensor):
    pipe = StreamPipeline(600)
    with pytest.raises(ValueError):
        pipe.run(flat_frame(small_sensor).image)
