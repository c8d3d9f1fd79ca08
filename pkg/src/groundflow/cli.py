"""Command-line interface.

Subcommands cover each pipeline stage over the documented file formats:

* ``simulate``  render a synthetic flight into frames and sensor logs
* ``flow``      block-match a frame directory into a motion-vector stream
* ``estimate``  turn a motion-vector stream plus logs into velocity/pose CSVs
* ``eval``      score a velocity CSV against truth, with report and figures
* ``envelope``  tabulate the theoretical detectable-velocity limits
* ``pipeline``  run all stages against one simulation config

Diagnostics go to stderr; stdout carries only data when ``--out -`` is used.
"""

from __future__ import annotations

import argparse
import glob
import sys
from pathlib import Path

import numpy as np

from . import io as gfio
from .block_match import MatchParams, compute_flow_field
from .motion import RansacParams
from .mvs import decode_mv_stream, encode_mv_stream
from .pipeline import (
    PipelineConfig,
    align_trajectories,
    integrate_velocity_series,
    run_pipeline,
    velocity_error_stats,
)
from .scale import velocity_envelope
from .simulator import simulate_sequence
from .types import CameraIntrinsics, FlowField

__all__ = ["main"]


def _fail(message: str) -> int:
    print(f"groundflow: {message}", file=sys.stderr)
    return 1


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = gfio.parse_sim_config(Path(args.config).read_text())
    seq = simulate_sequence(cfg)
    gfio.write_simulation(seq, args.out_dir)
    return 0


def _frame_paths(spec: str) -> list[Path]:
    if any(ch in spec for ch in "*?["):
        return [Path(p) for p in sorted(glob.glob(spec))]
    root = Path(spec)
    if root.is_dir():
        return sorted(root.glob("*.pgm"))
    return [root] if root.exists() else []


def _cmd_flow(args: argparse.Namespace) -> int:
    paths = _frame_paths(args.frames)
    if not paths:
        return _fail("no frames found")
    params = MatchParams(macroblock_size=args.mb_size, search_range=args.range, step=args.step)
    fields = []
    previous = None
    for index, path in enumerate(paths):
        image = gfio.read_pgm(path)
        timestamp = index / args.fps
        if previous is None:
            grid_w = image.width // params.macroblock_size
            grid_h = image.height // params.macroblock_size
            if grid_w < 1 or grid_h < 1:
                return _fail(f"{path}: image smaller than one macroblock")
            n = grid_w * grid_h
            fields.append(
                FlowField.from_components(
                    index, timestamp, grid_w, grid_h, np.zeros(n), np.zeros(n), None, params.macroblock_size
                )
            )
        else:
            fields.append(compute_flow_field(previous, image, timestamp, index, params))
        previous = image
    data = encode_mv_stream(fields)
    if args.out == "-":
        sys.stdout.buffer.write(data)
    else:
        Path(args.out).write_bytes(data)
    return 0


def _cmd_estimate(args: argparse.Namespace) -> int:
    fields, truncated = decode_mv_stream(Path(args.mv).read_bytes())
    if truncated:
        print(f"groundflow: warning: {args.mv} truncated, using {len(fields)} complete frames", file=sys.stderr)
    if len(fields) < 2:
        return _fail("motion-vector stream holds fewer than 2 frames")
    gyro = gfio.read_gyro_csv(args.gyro)
    range_log = gfio.read_range_csv(args.range)
    extent_w = fields[0].grid_w * fields[0].macroblock_size
    extent_h = fields[0].grid_h * fields[0].macroblock_size
    cam = CameraIntrinsics(
        focal_px=args.focal_px,
        cx=args.cx if args.cx is not None else extent_w / 2.0,
        cy=args.cy if args.cy is not None else extent_h / 2.0,
        image_w=extent_w,
        image_h=extent_h,
    )
    cfg = PipelineConfig(
        cam=cam,
        ransac=RansacParams(
            iterations=args.ransac_iters,
            inlier_threshold=args.inlier_thresh,
            min_inliers=args.min_inliers,
            seed=args.seed,
        ),
        compensation_enabled=not args.no_compensation,
    )
    estimates, poses = run_pipeline(fields, gyro, range_log, cfg)
    gfio.write_velocity_csv(args.out_vel, estimates)
    gfio.write_pose_csv(args.out_pose, poses)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    estimates = gfio.read_velocity_csv(args.est)
    truth = gfio.read_truth_csv(args.truth)
    stats = velocity_error_stats(estimates, truth)
    n_invalid = sum(1 for e in estimates if not e.valid)

    poses = integrate_velocity_series(estimates)
    ref = np.array([[s.timestamp, s.pose.x, s.pose.y] for s in truth])
    rotation = 0.0
    if args.align:
        poses, rotation, _shift = align_trajectories(poses, ref)
    final = poses[-1]
    nearest = int(np.argmin(np.abs(ref[:, 0] - final.timestamp)))
    final_error = float(np.hypot(final.pose.x - ref[nearest, 1], final.pose.y - ref[nearest, 2]))

    metrics = [
        ("mean_err", repr(stats.mean)),
        ("std_err", repr(stats.std)),
        ("n_valid", str(stats.n)),
        ("n_invalid", str(n_invalid)),
        ("alignment_rotation_rad", repr(rotation)),
        ("final_position_error_m", repr(final_error)),
    ]
    out = Path(args.out)
    text = "velocity error report\n" + "\n".join(f"{k} = {v}" for k, v in metrics) + "\n"
    out.write_text(text)
    csv_path = out.with_suffix(".csv")
    csv_path.write_text("metric,value\n" + "\n".join(f"{k},{v}" for k, v in metrics) + "\n")

    from . import plots

    stem = out.parent / out.stem
    plots.save_velocity_figure(f"{stem}_velocity.png", estimates, truth)
    plots.save_trajectory_figure(f"{stem}_trajectory.png", poses, ref)
    return 0


def _cmd_envelope(args: argparse.Namespace) -> int:
    cam = CameraIntrinsics(
        focal_px=args.focal_px,
        cx=0.0,
        cy=0.0,
        image_w=max(1, int(2 * args.range)),
        image_h=max(1, int(2 * args.range)),
    )
    params = MatchParams(search_range=args.range, step=args.step)
    if args.steps < 1:
        return _fail("--steps must be >= 1")
    zs = [float(z) for z in np.linspace(args.z_min, args.z_max, args.steps)]
    rows = [velocity_envelope(cam, z, args.fps, params) for z in zs]
    lines = ["z,v_min,v_max"]
    lines += [f"{z!r},{vmin!r},{vmax!r}" for z, (vmin, vmax) in zip(zs, rows)]
    text = "\n".join(lines) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    if args.plot:
        from . import plots

        arr = np.array(rows)
        plots.save_envelope_figure(args.plot, zs, arr[:, 0], arr[:, 1])
    return 0


def _cmd_pipeline(args: argparse.Namespace) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = gfio.parse_sim_config(Path(args.config).read_text())

    seq = simulate_sequence(cfg)
    gfio.write_simulation(seq, out)

    params = MatchParams()
    fields = []
    for index, frame in enumerate(seq.frames):
        timestamp = index / cfg.fps
        if index == 0:
            grid_w = frame.width // params.macroblock_size
            grid_h = frame.height // params.macroblock_size
            n = grid_w * grid_h
            fields.append(
                FlowField.from_components(0, timestamp, grid_w, grid_h, np.zeros(n), np.zeros(n))
            )
        else:
            fields.append(compute_flow_field(seq.frames[index - 1], frame, timestamp, index, params))
    (out / "flow.mvs").write_bytes(encode_mv_stream(fields))

    pipe_cfg = PipelineConfig(
        cam=cfg.cam,
        match=params,
        ransac=RansacParams(seed=args.seed),
        compensation_enabled=not args.no_compensation,
    )
    estimates, poses = run_pipeline(fields, seq.gyro, seq.range_log, pipe_cfg)
    gfio.write_velocity_csv(out / "velocity.csv", estimates)
    gfio.write_pose_csv(out / "pose.csv", poses)

    eval_args = argparse.Namespace(
        est=str(out / "velocity.csv"),
        truth=str(out / "truth.csv"),
        out=str(out / "report.txt"),
        align=args.align,
    )
    status = _cmd_eval(eval_args)
    if status != 0:
        return status

    envelope_args = argparse.Namespace(
        focal_px=cfg.cam.focal_px,
        z_min=0.5 * cfg.altitude,
        z_max=2.0 * cfg.altitude,
        steps=16,
        fps=cfg.fps,
        range=params.search_range,
        step=params.step,
        out=str(out / "envelope.csv"),
        plot=str(out / "envelope.png"),
    )
    return _cmd_envelope(envelope_args)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groundflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a synthetic flight")
    p.add_argument("--config", required=True, help="flat key=value simulation config")
    p.add_argument("--out-dir", required=True, help="output directory for frames and logs")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("flow", help="block-match PGM frames into a motion-vector stream")
    p.add_argument("--frames", required=True, help="frame directory or glob")
    p.add_argument("--out", required=True, help="output .mvs path, or - for stdout")
    p.add_argument("--mb-size", type=int, default=16)
    p.add_argument("--range", type=int, default=64)
    p.add_argument("--step", type=int, default=2)
    p.add_argument("--fps", type=float, default=30.0, help="frame cadence used for timestamps")
    p.set_defaults(func=_cmd_flow)

    p = sub.add_parser("estimate", help="estimate velocity and pose from a motion-vector stream")
    p.add_argument("--mv", required=True, help="motion-vector stream (.mvs)")
    p.add_argument("--gyro", required=True, help="gyro CSV log")
    p.add_argument("--range", required=True, help="range CSV log")
    p.add_argument("--focal-px", type=float, required=True)
    p.add_argument("--cx", type=float, default=None)
    p.add_argument("--cy", type=float, default=None)
    p.add_argument("--ransac-iters", type=int, default=210)
    p.add_argument("--inlier-thresh", type=float, default=3.0)
    p.add_argument("--min-inliers", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-compensation", action="store_true")
    p.add_argument("--out-vel", required=True)
    p.add_argument("--out-pose", required=True)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("eval", help="score a velocity CSV against ground truth")
    p.add_argument("--est", required=True, help="velocity CSV")
    p.add_argument("--truth", required=True, help="truth CSV")
    p.add_argument("--out", required=True, help="report path; CSV twin and figures sit alongside")
    p.add_argument("--align", action="store_true", help="rotate the trajectory to best fit the truth")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("envelope", help="tabulate detectable-velocity limits")
    p.add_argument("--focal-px", type=float, required=True)
    p.add_argument("--z-min", type=float, required=True)
    p.add_argument("--z-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--fps", type=float, required=True)
    p.add_argument("--range", type=int, default=64)
    p.add_argument("--step", type=int, default=2)
    p.add_argument("--out", default="-", help="output CSV path, or - for stdout")
    p.add_argument("--plot", default=None, help="optional envelope figure path")
    p.set_defaults(func=_cmd_envelope)

    p = sub.add_parser("pipeline", help="simulate, match, estimate and evaluate in one go")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-compensation", action="store_true")
    p.add_argument("--align", action="store_true")
    p.set_defaults(func=_cmd_pipeline)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _fail(f"{exc.filename}: file not found")
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
