"""File formats: binary PGM images, CSV sensor logs, and simulation configs.

CSV headers are fixed:

* gyro: ``timestamp,wx,wy,wz``
* range: ``timestamp,z``
* velocity: ``timestamp,vx,vy,wz,z_used,inlier_count,valid_count``
* pose: ``timestamp,x,y,heading``
* truth: ``timestamp,x,y,heading,vx,vy,wz,z,corner_flag``

Simulation configs are flat ``key=value`` text files; unknown keys are
rejected.  Floats are written with ``repr`` so rewritten files and logs are
byte-identical across runs.
"""

from __future__ import annotations

import csv
import io as _stdio
from pathlib import Path
from typing import Sequence

import numpy as np

from .block_match import GrayImage
from .simulator import GroundTruthSample, SimConfig, SimSequence, TrajectorySpec
from .types import CameraIntrinsics, GyroSample, Pose2D, PoseSample, RangeSample, VelocityEstimate

__all__ = [
    "read_pgm",
    "write_pgm",
    "read_gyro_csv",
    "write_gyro_csv",
    "read_range_csv",
    "write_range_csv",
    "read_velocity_csv",
    "write_velocity_csv",
    "read_pose_csv",
    "write_pose_csv",
    "read_truth_csv",
    "write_truth_csv",
    "parse_sim_config",
    "format_sim_config",
    "write_simulation",
]

GYRO_HEADER = ["timestamp", "wx", "wy", "wz"]
RANGE_HEADER = ["timestamp", "z"]
VELOCITY_HEADER = ["timestamp", "vx", "vy", "wz", "z_used", "inlier_count", "valid_count"]
POSE_HEADER = ["timestamp", "x", "y", "heading"]
TRUTH_HEADER = ["timestamp", "x", "y", "heading", "vx", "vy", "wz", "z", "corner_flag"]


def write_pgm(path: str | Path, image: GrayImage) -> None:
    """Write an 8-bit binary PGM (P5, maxval 255)."""
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.width} {image.height}\n255\n".encode("ascii"))
        fh.write(image.pixels.tobytes())


def read_pgm(path: str | Path) -> GrayImage:
    """Read an 8-bit binary PGM (P5, maxval 255)."""
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos] in b" \t\r\n":
            pos += 1
        if pos < len(data) and data[pos] == ord("#"):
            while pos < len(data) and data[pos] != ord("\n"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos] not in b" \t\r\n":
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = tokens
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    expected = width * height
    if len(data) - pos < expected:
        raise ValueError(f"{path}: truncated pixel data")
    pixels = np.frombuffer(data, dtype=np.uint8, count=expected, offset=pos)
    return GrayImage(width, height, pixels.reshape(height, width).copy())


def _write_csv(path: str | Path, header: list[str], rows) -> None:
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue())


def _read_csv(path: str | Path, header: list[str]) -> list[list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if first != header:
            raise ValueError(f"{path}: expected header {','.join(header)!r}")
        return [row for row in reader if row]


def write_gyro_csv(path: str | Path, samples: Sequence[GyroSample]) -> None:
    _write_csv(path, GYRO_HEADER, ([repr(s.timestamp), repr(s.wx), repr(s.wy), repr(s.wz)] for s in samples))


def read_gyro_csv(path: str | Path) -> list[GyroSample]:
    return [GyroSample(*(float(v) for v in row)) for row in _read_csv(path, GYRO_HEADER)]


def write_range_csv(path: str | Path, samples: Sequence[RangeSample]) -> None:
    _write_csv(path, RANGE_HEADER, ([repr(s.timestamp), repr(s.z)] for s in samples))


def read_range_csv(path: str | Path) -> list[RangeSample]:
    return [RangeSample(*(float(v) for v in row)) for row in _read_csv(path, RANGE_HEADER)]


def write_velocity_csv(path: str | Path, estimates: Sequence[VelocityEstimate]) -> None:
    _write_csv(
        path,
        VELOCITY_HEADER,
        (
            [repr(e.timestamp), repr(e.vx), repr(e.vy), repr(e.wz), repr(e.z_used), e.inlier_count, e.valid_count]
            for e in estimates
        ),
    )


def read_velocity_csv(path: str | Path) -> list[VelocityEstimate]:
    return [
        VelocityEstimate(
            float(row[0]), float(row[1]), float(row[2]), float(row[3]), float(row[4]), int(row[5]), int(row[6])
        )
        for row in _read_csv(path, VELOCITY_HEADER)
    ]


def write_pose_csv(path: str | Path, poses: Sequence[PoseSample]) -> None:
    _write_csv(
        path,
        POSE_HEADER,
        ([repr(p.timestamp), repr(p.pose.x), repr(p.pose.y), repr(p.pose.heading)] for p in poses),
    )


def read_pose_csv(path: str | Path) -> list[PoseSample]:
    return [
        PoseSample(float(row[0]), Pose2D(float(row[1]), float(row[2]), float(row[3])))
        for row in _read_csv(path, POSE_HEADER)
    ]


def write_truth_csv(path: str | Path, truth: Sequence[GroundTruthSample]) -> None:
    _write_csv(
        path,
        TRUTH_HEADER,
        (
            [
                repr(s.timestamp),
                repr(s.pose.x),
                repr(s.pose.y),
                repr(s.pose.heading),
                repr(s.vx),
                repr(s.vy),
                repr(s.wz),
                repr(s.z),
                1 if s.corner else 0,
            ]
            for s in truth
        ),
    )


def read_truth_csv(path: str | Path) -> list[GroundTruthSample]:
    out = []
    for row in _read_csv(path, TRUTH_HEADER):
        out.append(
            GroundTruthSample(
                timestamp=float(row[0]),
                pose=Pose2D(float(row[1]), float(row[2]), float(row[3])),
                vx=float(row[4]),
                vy=float(row[5]),
                wz=float(row[6]),
                z=float(row[7]),
                corner=bool(int(row[8])),
            )
        )
    return out


_CONFIG_STR_KEYS = ("trajectory_kind", "yaw_mode")
_CONFIG_INT_KEYS = ("image_w", "image_h", "texture_seed", "noise_seed")
_CONFIG_FLOAT_KEYS = (
    "circle_radius",
    "circle_period",
    "square_side",
    "square_speed",
    "line_vx",
    "line_vy",
    "duration",
    "altitude",
    "focal_px",
    "cx",
    "cy",
    "fps",
    "texture_scale",
    "gyro_noise_std",
    "gyro_bias",
    "range_noise_std",
    "gyro_rate",
    "rotation_pulse_wy",
    "rotation_pulse_start",
    "rotation_pulse_stop",
)


def parse_sim_config(text: str) -> SimConfig:
    """Parse a flat key=value simulation config; unknown keys raise."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_STR_KEYS + _CONFIG_INT_KEYS + _CONFIG_FLOAT_KEYS:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value

    def take(key: str, default):
        if key not in values:
            return default
        raw = values[key]
        if key in _CONFIG_STR_KEYS:
            return raw
        if key in _CONFIG_INT_KEYS:
            return int(raw)
        return float(raw)

    spec = TrajectorySpec(
        kind=take("trajectory_kind", "circle"),
        duration=take("duration", 10.0),
        radius=take("circle_radius", 1.0),
        period=take("circle_period", 12.566370614359172),
        side=take("square_side", 2.0),
        speed=take("square_speed", 0.5),
        vx=take("line_vx", 0.5),
        vy=take("line_vy", 0.0),
        yaw_mode=take("yaw_mode", "tangent"),
    )
    image_w = take("image_w", 480)
    image_h = take("image_h", 480)
    cam = CameraIntrinsics(
        focal_px=take("focal_px", 640.0),
        cx=take("cx", image_w / 2.0),
        cy=take("cy", image_h / 2.0),
        image_w=image_w,
        image_h=image_h,
    )
    return SimConfig(
        trajectory=spec,
        altitude=take("altitude", 1.0),
        cam=cam,
        fps=take("fps", 30.0),
        texture_seed=take("texture_seed", 1),
        texture_scale=take("texture_scale", 0.05),
        gyro_noise_std=take("gyro_noise_std", 0.0),
        gyro_bias=take("gyro_bias", 0.0),
        range_noise_std=take("range_noise_std", 0.0),
        gyro_rate=take("gyro_rate", 200.0),
        noise_seed=take("noise_seed", 0),
        rotation_pulse_wy=take("rotation_pulse_wy", 0.0),
        rotation_pulse_start=take("rotation_pulse_start", 0.0),
        rotation_pulse_stop=take("rotation_pulse_stop", 0.0),
    )


def format_sim_config(cfg: SimConfig) -> str:
    """Render a SimConfig back to the flat key=value format."""
    spec = cfg.trajectory
    lines = [
        f"trajectory_kind={spec.kind}",
        f"duration={spec.duration!r}",
        f"circle_radius={spec.radius!r}",
        f"circle_period={spec.period!r}",
        f"square_side={spec.side!r}",
        f"square_speed={spec.speed!r}",
        f"line_vx={spec.vx!r}",
        f"line_vy={spec.vy!r}",
        f"yaw_mode={spec.yaw_mode}",
        f"altitude={cfg.altitude!r}",
        f"focal_px={cfg.cam.focal_px!r}",
        f"cx={cfg.cam.cx!r}",
        f"cy={cfg.cam.cy!r}",
        f"image_w={cfg.cam.image_w}",
        f"image_h={cfg.cam.image_h}",
        f"fps={cfg.fps!r}",
        f"texture_seed={cfg.texture_seed}",
        f"texture_scale={cfg.texture_scale!r}",
        f"gyro_noise_std={cfg.gyro_noise_std!r}",
        f"gyro_bias={cfg.gyro_bias!r}",
        f"range_noise_std={cfg.range_noise_std!r}",
        f"gyro_rate={cfg.gyro_rate!r}",
        f"noise_seed={cfg.noise_seed}",
        f"rotation_pulse_wy={cfg.rotation_pulse_wy!r}",
        f"rotation_pulse_start={cfg.rotation_pulse_start!r}",
        f"rotation_pulse_stop={cfg.rotation_pulse_stop!r}",
    ]
    return "\n".join(lines) + "\n"


def write_simulation(seq: SimSequence, out_dir: str | Path) -> None:
    """Write frames and logs: frame_%06d.pgm, truth.csv, gyro.csv, range.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames):
        write_pgm(out / f"frame_{i:06d}.pgm", frame)
    write_truth_csv(out / "truth.csv", seq.truth)
    write_gyro_csv(out / "gyro.csv", seq.gyro)
    write_range_csv(out / "range.csv", seq.range_log)
