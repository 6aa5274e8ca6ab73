"""``groundseg`` command line: segment, eval, render, bench.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, astuple, replace
from pathlib import Path

import numpy as np

from . import __version__
from .baseline_ransac import DEFAULT_DIST_THRESH, DEFAULT_MAX_ITERS
from .ingest import (
    PRESET_BY_CHANNELS,
    SENSOR_PRESETS,
    SensorConfig,
    ground_truth_mask,
    label_path,
    list_frames,
    load_labels,
    load_scan,
    load_sensor,
    project,
    scan_path,
    sequence_dir,
)
from .methods import METHODS, predict_points
from .metrics import (
    METRIC_NAMES,
    FrameScore,
    distribution_csv,
    distribution_report,
    mean_score,
    score_frame,
    scores_csv,
)
from .preprocess import SegParams, load_params
from .stream_model import DEFAULT_BLOCKS, DEFAULT_CLOCK_HZ, StreamPipeline, stream_params

log = logging.getLogger("groundseg")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
DATASET_ENV = "GROUNDSEG_DATASET"
PRED_SUFFIX = ".pred"
#: Target per-frame execution times (ms) at 160 MHz, keyed by channel count.
REFERENCE_MS = {32: 0.54, 64: 1.09, 128: 1.89}


class CliError(RuntimeError):
    """Runtime failure reported with exit code 1."""


class UsageError(ValueError):
    """Bad flag combination reported with exit code 2."""


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def atomic_write(path: Path, data: bytes | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def parse_frames(text: str | None) -> tuple[int | None, int | None]:
    """``A..B`` (inclusive), ``A..``, ``..B`` or a single ``A``."""
    if not text:
        return None, None
    if ".." not in text:
        a = int(text)
        return a, a
    lo, hi = text.split("..", 1)
    a = int(lo) if lo else None
    b = int(hi) if hi else None
    if a is not None and b is not None and b < a:
        raise ValueError(f"empty frame range {text!r}")
    return a, b


def select_frames(frames: list[str], span: tuple[int | None, int | None]) -> list[str]:
    lo, hi = span
    out = []
    for f in frames:
        try:
            k = int(f)
        except ValueError:
            k = None
        if k is None:
            if lo is None and hi is None:
                out.append(f)
            continue
        if (lo is None or k >= lo) and (hi is None or k <= hi):
            out.append(f)
    return out


def _dataset_root(args) -> Path:
    root = args.dataset or os.environ.get(DATASET_ENV)
    if not root:
        raise UsageError(f"--dataset is required (or set {DATASET_ENV})")
    return Path(root)


def _resolve_frames(args) -> tuple[Path, list[str]]:
    root = _dataset_root(args)
    try:
        seq = sequence_dir(root, args.sequence)
    except FileNotFoundError as exc:
        raise CliError(str(exc)) from None
    try:
        span = parse_frames(args.frames)
    except ValueError as exc:
        raise UsageError(f"bad --frames: {exc}") from None
    frames = select_frames(list_frames(seq), span)
    if not frames:
        raise CliError(f"no frames in {seq / 'velodyne'} for selection {args.frames or 'all'}")
    return seq, frames


def _params(args) -> SegParams:
    p = load_params(args.params) if args.params else SegParams()
    if args.iterations is not None:
        p = replace(p, flood_iterations=args.iterations)
    return p


def _sensor(args) -> SensorConfig:
    try:
        return load_sensor(args.sensor)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _predictions_dir(pred_root: Path, sequence: str) -> Path:
    """Predictions live in ``<root>/<seq>/predictions`` or directly in ``<root>``."""
    nested = Path(pred_root) / sequence / "predictions"
    return nested if nested.is_dir() else Path(pred_root)


def load_prediction(path: Path, n_points: int) -> np.ndarray:
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size != n_points:
        raise CliError(f"{path.name}: {raw.size} predictions for {n_points} points (length mismatch)")
    return raw.astype(bool)


# ---------------------------------------------------------------------------
# segment
# ---------------------------------------------------------------------------

def _segment_one(job: tuple) -> tuple[str, int, float, str | None]:
    frame, scan, out_path, sensor, method, params, r_thresh, r_iters, seed = job
    t0 = time.perf_counter()
    try:
        cloud = load_scan(scan)
        pred = predict_points(cloud, sensor, method, params, r_thresh, r_iters, seed)
    except (OSError, ValueError) as exc:
        return frame, 0, 0.0, str(exc)
    atomic_write(out_path, pred.astype(np.uint8).tobytes())
    return frame, len(cloud), time.perf_counter() - t0, None


def cmd_segment(args) -> int:
    seq, frames = _resolve_frames(args)
    sensor = _sensor(args)
    params = _params(args)
    out_dir = Path(args.out) / args.sequence / "predictions"
    jobs = [
        (f, scan_path(seq, f), out_dir / f"{f}{PRED_SUFFIX}", sensor, args.method, params,
         args.ransac_thresh, args.ransac_iters, args.seed)
        for f in frames
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_segment_one, jobs))
    else:
        results = [_segment_one(j) for j in jobs]

    records, failed = [], []
    for frame, n, dt, err in results:
        if err is not None:
            log.warning("skipping frame %s: %s", frame, err)
            failed.append(frame)
        else:
            records.append({"frame": frame, "points": n, "seconds": round(dt, 6)})
    manifest = {
        "method": args.method,
        "sequence": args.sequence,
        "dataset": str(_dataset_root(args)),
        "sensor": asdict(sensor),
        "params": params.to_dict(),
        "ransac": {"dist_thresh": args.ransac_thresh, "max_iters": args.ransac_iters, "seed": args.seed},
        "versions": {
            "groundseg": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "frames": records,
        "failed": failed,
    }
    atomic_write(Path(args.out) / args.sequence / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    if not records:
        raise CliError("all frames failed")
    print(f"segmented {len(records)} frame(s) into {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def evaluate(seq: Path, frames: list[str], pred_dir: Path) -> list[tuple[str, FrameScore]]:
    available = {p.stem for p in pred_dir.glob(f"*{PRED_SUFFIX}")}
    missing = [f for f in frames if f not in available]
    if missing:
        raise CliError(
            f"frame-count mismatch: {len(frames)} frames selected, "
            f"{len(frames) - len(missing)} predictions found (first missing: {missing[0]})"
        )
    scores = []
    for f in frames:
        cloud = load_scan(scan_path(seq, f))
        gt = ground_truth_mask(load_labels(label_path(seq, f), len(cloud)))
        pred = load_prediction(pred_dir / f"{f}{PRED_SUFFIX}", len(cloud))
        scores.append((f, score_frame(pred, gt, cloud)))
    return scores


def cmd_eval(args) -> int:
    seq, frames = _resolve_frames(args)
    scores = evaluate(seq, frames, _predictions_dir(Path(args.predictions), args.sequence))
    mean = mean_score([s for _, s in scores])
    out = Path(args.out)
    if args.format == "csv":
        atomic_write(out / "scores.csv", scores_csv(scores))
        summary = f"sequence,frames,{','.join(METRIC_NAMES)}\n{args.sequence},{len(scores)}," \
            + ",".join(f"{v:.6f}" for v in astuple(mean)) + "\n"
        atomic_write(out / "summary.csv", summary)
        atomic_write(out / "distribution.csv", distribution_csv([s for _, s in scores]))
    else:
        dist = distribution_report([s for _, s in scores])
        doc = {
            "sequence": args.sequence,
            "frames": [{"frame_id": f, **asdict(s)} for f, s in scores],
            "mean": asdict(mean),
            "distribution": {
                k: [dict(zip(("bin_lo", "bin_hi", "pdf", "cdf"), map(float, row))) for row in rows]
                for k, rows in dist.items()
            },
        }
        atomic_write(out / "scores.json", json.dumps(doc, indent=2) + "\n")
    print(json.dumps({"sequence": args.sequence, "frames": len(scores), **asdict(mean)}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# render
# ---------------------------------------------------------------------------

def cmd_render(args) -> int:
    from .render import render_bev

    seq, frames = _resolve_frames(args)
    pred_dir = _predictions_dir(Path(args.predictions), args.sequence)
    out = Path(args.out)
    single = len(frames) == 1 and out.suffix.lower() == ".png"
    for f in frames:
        cloud = load_scan(scan_path(seq, f))
        gt = ground_truth_mask(load_labels(label_path(seq, f), len(cloud)))
        pred_path = pred_dir / f"{f}{PRED_SUFFIX}"
        if not pred_path.is_file():
            raise CliError(f"missing prediction for frame {f}")
        pred = load_prediction(pred_path, len(cloud))
        img = render_bev(cloud.xyz[:, :2], pred, gt, args.mpp, args.extent)
        target = out if single else out / f"{f}.png"
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=target.parent, suffix=".png")
        os.close(fd)
        img.save(tmp, format="PNG")
        os.replace(tmp, target)
    print(f"rendered {len(frames)} frame(s)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def bench_frame(sensor: SensorConfig, seed: int = 0):
    from .synthetic import random_scene, render_scene

    rng = np.random.default_rng(seed)
    return render_scene(sensor, random_scene(rng), noise=0.01, dropout=0.02, rng=rng).image


def cmd_bench(args) -> int:
    if args.channels not in PRESET_BY_CHANNELS:
        raise UsageError(f"--channels must be one of {sorted(PRESET_BY_CHANNELS)}")
    if not args.clock_hz > 0:
        raise UsageError("--clock-hz must be > 0")
    if args.blocks < 1:
        raise UsageError("--blocks must be >= 1")
    sensor = SENSOR_PRESETS[PRESET_BY_CHANNELS[args.channels]]
    if args.width:
        sensor = replace(sensor, horizontal_resolution=args.width)
    if args.dataset:
        seq, frames = _resolve_frames(args)
        img, _ = project(load_scan(scan_path(seq, frames[0])), sensor)
    else:
        img = bench_frame(sensor, args.seed)

    params = stream_params(**({"flood_iterations": args.iterations} if args.iterations else {}))
    pipe = StreamPipeline(img.width, params, args.blocks, args.clock_hz)
    _, report = pipe.run(img)
    doc = report.to_json()
    print(json.dumps(doc))
    ref = REFERENCE_MS.get(args.channels)
    if ref is not None and img.width == 2048:
        dev = 100.0 * (report.estimated_ms - ref) / ref
        print(f"{args.channels} ch: {report.estimated_ms:.3f} ms vs target {ref:.2f} ms "
              f"({dev:+.1f}%)", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groundseg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_flags(p, need_sequence=True):
        p.add_argument("--dataset", help=f"dataset root (default: ${DATASET_ENV})")
        p.add_argument("--sequence", default="00" if not need_sequence else None,
                       required=need_sequence)
        p.add_argument("--frames", help="frame range A..B (inclusive)")

    seg = sub.add_parser("segment", help="label ground points per frame")
    data_flags(seg)
    seg.add_argument("--sensor", default="hdl64", help="preset name or JSON/TOML file")
    seg.add_argument("--params", help="segmentation parameter file")
    seg.add_argument("--method", choices=METHODS, default="ours")
    seg.add_argument("--iterations", type=int)
    seg.add_argument("--ransac-thresh", type=float, default=DEFAULT_DIST_THRESH)
    seg.add_argument("--ransac-iters", type=int, default=DEFAULT_MAX_ITERS)
    seg.add_argument("--seed", type=int, default=0)
    seg.add_argument("--jobs", type=int, default=1)
    seg.add_argument("--out", required=True)
    seg.set_defaults(func=cmd_segment)

    ev = sub.add_parser("eval", help="score predictions against labels")
    data_flags(ev)
    ev.add_argument("--predictions", required=True)
    ev.add_argument("--out", required=True)
    ev.add_argument("--format", choices=("csv", "json"), default="csv")
    ev.set_defaults(func=cmd_eval)

    ren = sub.add_parser("render", help="top-down TP/FN/FP image per frame")
    data_flags(ren)
    ren.add_argument("--predictions", required=True)
    ren.add_argument("--out", required=True, help="PNG path (single frame) or directory")
    ren.add_argument("--mpp", type=float, default=0.1, help="meters per pixel")
    ren.add_argument("--extent", type=float, default=None, help="half-width of the view in meters")
    ren.set_defaults(func=cmd_render)

    b = sub.add_parser("bench", help="cycle model of the streaming datapath")
    data_flags(b, need_sequence=False)
    b.add_argument("--channels", type=int, default=64)
    b.add_argument("--width", type=int, default=None)
    b.add_argument("--blocks", type=int, default=DEFAULT_BLOCKS)
    b.add_argument("--clock-hz", type=float, default=DEFAULT_CLOCK_HZ)
    b.add_argument("--iterations", type=int)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--format", choices=("json",), default="json")
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        if getattr(args, "iterations", None) is not None and args.iterations < 1:
            raise UsageError("--iterations must be >= 1")
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (CliError, OSError, ValueError) as exc:
        print(f"groundseg: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
