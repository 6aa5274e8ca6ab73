from __future__ import annotations

import numpy as np
import pytest

from groundseg.ingest import SensorConfig

_CRITERIA: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(cid, title): acceptance criterion id and title")


@pytest.fixture
def small_sensor() -> SensorConfig:
    return SensorConfig(32, 512, 10.67, -30.67, 120.0, "small32")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def measured(request):
    """Attach measured values to the acceptance line of the running test."""
    details: list[str] = []
    yield details.append
    marker = request.node.get_closest_marker("criterion")
    if marker is not None:
        _CRITERIA.setdefault(marker.args[0], {})["details"] = details


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    cid, title = marker.args
    entry = _CRITERIA.setdefault(cid, {})
    entry["title"] = title
    if rep.when == "setup" and rep.skipped:
        entry["status"] = "SKIP"
        entry["reason"] = str(rep.longrepr[-1]) if isinstance(rep.longrepr, tuple) else ""
    elif rep.when == "call":
        if rep.skipped:
            entry["status"] = "SKIP"
            entry["reason"] = str(rep.longrepr[-1]) if isinstance(rep.longrepr, tuple) else ""
        else:
            entry["status"] = "PASS" if rep.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=lambda c: (len(str(c)), str(c))):
        e = _CRITERIA[cid]
        status = e.get("status", "NOT RUN")
        line = f"[{status}] criterion {cid}: {e.get('title', '')}"
        if e.get("details"):
            line += " | " + "; ".join(e["details"])
        if status == "SKIP" and e.get("reason"):
            line += f" ({e['reason']})"
        tr.write_line(line)


@pytest.fixture
def synthetic_dataset(tmp_path, small_sensor):
    """A two-frame sequence ``00`` rendered from random scenes, plus a sensor file."""
    import json
    from dataclasses import asdict

    from groundseg.ingest import save_labels, save_scan
    from groundseg.synthetic import random_scene, render_scene

    root = tmp_path / "dataset"
    seq = root / "sequences" / "00"
    (seq / "velodyne").mkdir(parents=True)
    (seq / "labels").mkdir()
    rng = np.random.default_rng(2024)
    for k in range(2):
        frame = render_scene(small_sensor, random_scene(rng), noise=0.01, rng=rng)
        cloud, classes = frame.to_cloud()
        save_scan(seq / "velodyne" / f"{k:06d}.bin", cloud)
        save_labels(seq / "labels" / f"{k:06d}.label", classes)
    sensor = tmp_path / "sensor.json"
    sensor.write_text(json.dumps(asdict(small_sensor)))
    return root, sensor
