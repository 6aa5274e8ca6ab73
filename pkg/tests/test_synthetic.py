from __future__ import annotations

import numpy as np

from groundseg.ingest import ground_truth_mask, project
from groundseg.synthetic import GROUND_SURFACE, Scene, flat_frame, random_scene, render_scene, wall_frame


def test_flat_frame_points_lie_on_plane(small_sensor):
    frame = flat_frame(small_sensor, sensor_height=2.0)
    z = frame.xyz[..., 2][frame.image.valid]
    np.testing.assert_allclose(z, -2.0, atol=1e-9)
    assert (frame.surface[frame.image.valid] == GROUND_SURFACE).all()


def test_cloud_round_trip_reprojects(small_sensor, rng):
    frame = render_scene(small_sensor, random_scene(rng), rng=rng)
    cloud, classes = frame.to_cloud()
    assert len(cloud) == frame.image.valid.sum()
    img, idx = project(cloud, small_sensor)
    assert idx.n_collisions == 0
    np.testing.assert_array_equal(img.valid, frame.image.valid)
    np.testing.assert_allclose(img.range[img.valid], frame.image.range[img.valid], rtol=1e-6)
    gt = ground_truth_mask(classes)
    np.testing.assert_array_equal(gt, frame.ground[frame.image.valid])


def test_wall_occludes_ground_behind_it(small_sensor):
    frame = wall_frame(small_sensor, distance=10.0)
    rho = np.hypot(frame.xyz[..., 0], frame.xyz[..., 1])
    ground = frame.ground & frame.image.valid
    in_front = np.abs(frame.image.yaw) < 0.5
    assert rho[ground & in_front].max() <= 10.0 + 1e-9


def test_noise_and_dropout(small_sensor, rng):
    clean = render_scene(small_sensor, Scene())
    noisy = render_scene(small_sensor, Scene(), noise=0.05, dropout=0.2, rng=rng)
    assert noisy.image.valid.sum() < 0.9 * clean.image.valid.sum()
    both = clean.image.valid & noisy.image.valid
    assert 0.01 < np.std(noisy.image.range[both] - clean.image.range[both]) < 0.1
