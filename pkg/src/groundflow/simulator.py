"""Synthetic downward-camera scenes with analytic ground truth.

A procedural ground texture is sampled through an ideal pinhole camera moving
along a parametric trajectory, producing image sequences whose true pose,
body-frame velocity and yaw rate are known in closed form.  Optional sensor
noise and a rotation-injection mode (a known wy pulse applied both to the
gyro log and, via its induced image shift, to the rendered frames) exercise
the compensation path end to end.  All randomness flows from explicit seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .types import CameraIntrinsics, GyroSample, Pose2D, RangeSample, normalize_angle
from .block_match import GrayImage

__all__ = [
    "TrajectorySpec",
    "SimConfig",
    "GroundTruthSample",
    "SimSequence",
    "texture_sample",
    "render_frame",
    "trajectory_state",
    "simulate_sequence",
]

TEXTURE_OCTAVES = 4
#: Contrast expansion applied to the summed octaves; pushes the smooth noise
#: out to the 0..255 rails without flattening large regions.
TEXTURE_GAIN = 2.2

_SQUARE_DIRECTIONS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))
_SQUARE_CORNERS = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))


@dataclass(frozen=True)
class TrajectorySpec:
    """Parametric camera path: circle, square circuit, or straight line."""

    kind: str
    duration: float
    radius: float = 1.0
    period: float = 10.0
    side: float = 2.0
    speed: float = 0.5
    vx: float = 0.5
    vy: float = 0.0
    yaw_mode: str = "tangent"

    def __post_init__(self) -> None:
        if self.kind not in ("circle", "square", "line"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.yaw_mode not in ("fixed", "tangent"):
            raise ValueError(f"unknown yaw_mode {self.yaw_mode!r}")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.kind == "circle" and (self.radius <= 0 or self.period <= 0):
            raise ValueError("circle requires positive radius and period")
        if self.kind == "square" and (self.side <= 0 or self.speed <= 0):
            raise ValueError("square requires positive side and speed")

    @classmethod
    def circle(
        cls, radius: float, period: float, duration: float, yaw_mode: str = "tangent"
    ) -> "TrajectorySpec":
        return cls(kind="circle", duration=duration, radius=radius, period=period, yaw_mode=yaw_mode)

    @classmethod
    def square(
        cls, side: float, speed: float, duration: float, yaw_mode: str = "fixed"
    ) -> "TrajectorySpec":
        return cls(kind="square", duration=duration, side=side, speed=speed, yaw_mode=yaw_mode)

    @classmethod
    def line(
        cls, vx: float, vy: float, duration: float, yaw_mode: str = "fixed"
    ) -> "TrajectorySpec":
        return cls(kind="line", duration=duration, vx=vx, vy=vy, yaw_mode=yaw_mode)


def _default_cam() -> CameraIntrinsics:
    return CameraIntrinsics(focal_px=640.0, cx=240.0, cy=240.0, image_w=480, image_h=480)


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulated flight."""

    trajectory: TrajectorySpec
    altitude: float = 1.0
    cam: CameraIntrinsics = field(default_factory=_default_cam)
    fps: float = 30.0
    texture_seed: int = 1
    texture_scale: float = 0.05
    gyro_noise_std: float = 0.0
    gyro_bias: float = 0.0
    range_noise_std: float = 0.0
    gyro_rate: float = 200.0
    noise_seed: int = 0
    rotation_pulse_wy: float = 0.0
    rotation_pulse_start: float = 0.0
    rotation_pulse_stop: float = 0.0

    def __post_init__(self) -> None:
        if self.altitude <= 0:
            raise ValueError("altitude must be positive")
        if self.fps <= 0 or self.gyro_rate <= 0:
            raise ValueError("fps and gyro_rate must be positive")
        if self.texture_scale <= 0:
            raise ValueError("texture_scale must be positive")
        if self.gyro_noise_std < 0 or self.range_noise_std < 0:
            raise ValueError("noise standard deviations must be non-negative")


@dataclass(frozen=True)
class GroundTruthSample:
    """Analytic truth for one instant: pose, body-frame velocity, yaw rate."""

    timestamp: float
    pose: Pose2D
    vx: float
    vy: float
    wz: float
    z: float
    corner: bool = False


@dataclass(frozen=True)
class SimSequence:
    """In-memory result of a simulation run."""

    frames: list[GrayImage]
    truth: list[GroundTruthSample]
    gyro: list[GyroSample]
    range_log: list[RangeSample]


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps by design
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def _lattice(seed: int, octave: int, ix: np.ndarray, iy: np.ndarray) -> np.ndarray:
    """Uniform [0, 1) lattice values, a pure function of the integer inputs."""
    salt = (seed * 0x165667B19E3779F9 + octave * 0x27D4EB2F165667C5) & 0xFFFFFFFFFFFFFFFF
    h = (
        ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
        ^ iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
        ^ np.uint64(salt)
    )
    return _mix64(h).astype(np.float64) * (1.0 / 2.0**64)


def _noise01(seed: int, xs: np.ndarray, ys: np.ndarray, scale: float) -> np.ndarray:
    """Multi-octave smoothstep-interpolated value noise, normalized to [0, 1]."""
    total = np.zeros(np.broadcast(xs, ys).shape)
    amp = 1.0
    amp_sum = 0.0
    cell = float(scale)
    for octave in range(TEXTURE_OCTAVES):
        gx = xs / cell
        gy = ys / cell
        ix = np.floor(gx)
        iy = np.floor(gy)
        fx = gx - ix
        fy = gy - iy
        ix = ix.astype(np.int64)
        iy = iy.astype(np.int64)
        v00 = _lattice(seed, octave, ix, iy)
        v10 = _lattice(seed, octave, ix + 1, iy)
        v01 = _lattice(seed, octave, ix, iy + 1)
        v11 = _lattice(seed, octave, ix + 1, iy + 1)
        sx = fx * fx * (3.0 - 2.0 * fx)
        sy = fy * fy * (3.0 - 2.0 * fy)
        top = v00 + (v10 - v00) * sx
        bottom = v01 + (v11 - v01) * sx
        total += amp * (top + (bottom - top) * sy)
        amp_sum += amp
        amp *= 0.5
        cell *= 0.5
    return total / amp_sum


def _texture_u8(seed: int, xs: np.ndarray, ys: np.ndarray, scale: float) -> np.ndarray:
    n = _noise01(seed, xs, ys, scale)
    v = np.clip((n - 0.5) * TEXTURE_GAIN + 0.5, 0.0, 1.0)
    return np.rint(v * 255.0).astype(np.uint8)


def texture_sample(seed: int, x: float, y: float, scale: float) -> int:
    """Ground intensity at a world point; deterministic in (seed, x, y, scale)."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return int(_texture_u8(seed, np.asarray([x], dtype=np.float64), np.asarray([y], dtype=np.float64), scale)[0])


def render_frame(
    pose: Pose2D,
    z: float,
    cfg: SimConfig,
    image_shift: tuple[float, float] = (0.0, 0.0),
) -> GrayImage:
    """Render the ground texture seen by the camera at ``pose``.

    Each pixel's ray is intersected with the ground plane at distance ``z``
    and the texture is sampled at that point.  ``image_shift`` translates the
    rendered content by the given pixel amounts; the rotation-injection mode
    uses it to apply the image displacement a tilted camera would see.
    """
    if z <= 0:
        raise ValueError("ground distance must be positive")
    cam = cfg.cam
    ground_per_px = z / cam.focal_px
    us = (np.arange(cam.image_w, dtype=np.float64) - cam.cx - image_shift[0]) * ground_per_px
    vs = (np.arange(cam.image_h, dtype=np.float64) - cam.cy - image_shift[1]) * ground_per_px
    xx, yy = np.meshgrid(us, vs)
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    gx = pose.x + c * xx - s * yy
    gy = pose.y + s * xx + c * yy
    return GrayImage(cam.image_w, cam.image_h, _texture_u8(cfg.texture_seed, gx, gy, cfg.texture_scale))


def trajectory_state(
    spec: TrajectorySpec, t: float, z: float = 0.0, corner_window: float = 0.0
) -> GroundTruthSample:
    """Closed-form pose and body-frame velocity at time ``t``.

    Square circuits are traversed at constant speed with instantaneous corner
    turns; samples within ``corner_window`` seconds of a corner carry the
    discontinuity flag so evaluation can exclude them.
    """
    if not 0.0 <= t <= spec.duration:
        raise ValueError(f"t={t} outside [0, {spec.duration}]")
    corner = False
    if spec.kind == "circle":
        omega = 2.0 * math.pi / spec.period
        ang = omega * t
        x = spec.radius * math.cos(ang)
        y = spec.radius * math.sin(ang)
        wvx = -spec.radius * omega * math.sin(ang)
        wvy = spec.radius * omega * math.cos(ang)
        if spec.yaw_mode == "tangent":
            heading = normalize_angle(ang + 0.5 * math.pi)
            wz = omega
        else:
            heading, wz = 0.0, 0.0
    elif spec.kind == "line":
        x, y = spec.vx * t, spec.vy * t
        wvx, wvy = spec.vx, spec.vy
        if spec.yaw_mode == "tangent" and (spec.vx, spec.vy) != (0.0, 0.0):
            heading = math.atan2(spec.vy, spec.vx)
        else:
            heading = 0.0
        wz = 0.0
    else:
        leg_time = spec.side / spec.speed
        u = (t / leg_time) % 4.0
        leg = int(u) % 4
        frac = u - int(u)
        cx, cy = _SQUARE_CORNERS[leg]
        dx, dy = _SQUARE_DIRECTIONS[leg]
        x = (cx + dx * frac) * spec.side
        y = (cy + dy * frac) * spec.side
        wvx, wvy = dx * spec.speed, dy * spec.speed
        if spec.yaw_mode == "tangent":
            heading = normalize_angle(math.atan2(dy, dx))
        else:
            heading = 0.0
        wz = 0.0
        corner_dist = min(frac, 1.0 - frac) * leg_time
        corner = corner_dist <= corner_window + 1e-12

    c, s = math.cos(heading), math.sin(heading)
    return GroundTruthSample(
        timestamp=t,
        pose=Pose2D(x, y, heading),
        vx=c * wvx + s * wvy,
        vy=-s * wvx + c * wvy,
        wz=wz,
        z=z,
        corner=corner,
    )


def _pulse_tilt(cfg: SimConfig, t: float) -> float:
    """Accumulated camera tilt (rad) about the y axis from the injected pulse."""
    if cfg.rotation_pulse_wy == 0.0 or cfg.rotation_pulse_stop <= cfg.rotation_pulse_start:
        return 0.0
    active = min(t, cfg.rotation_pulse_stop) - cfg.rotation_pulse_start
    return cfg.rotation_pulse_wy * max(0.0, active)


def _pulse_rate(cfg: SimConfig, t: float) -> float:
    if cfg.rotation_pulse_wy == 0.0:
        return 0.0
    return cfg.rotation_pulse_wy if cfg.rotation_pulse_start <= t < cfg.rotation_pulse_stop else 0.0


def simulate_sequence(cfg: SimConfig) -> SimSequence:
    """Generate frames, ground truth and sensor logs for one flight.

    Frames are produced at ``fps`` over the trajectory duration, the gyro log
    at ``gyro_rate`` (wz from the trajectory plus noise and bias, wx/wy noise
    plus the injected pulse) and the range log at frame rate.  Outputs are a
    pure function of the configuration, including its seeds.
    """
    spec = cfg.trajectory
    n_frames = int(round(spec.duration * cfg.fps))
    if n_frames < 1:
        raise ValueError("duration too short for a single frame")
    rng = np.random.default_rng(cfg.noise_seed)

    n_gyro = max(1, int(round(spec.duration * cfg.gyro_rate)))
    gyro_noise = rng.normal(0.0, cfg.gyro_noise_std, size=(n_gyro, 3)) if cfg.gyro_noise_std > 0 else np.zeros((n_gyro, 3))
    range_noise = rng.normal(0.0, cfg.range_noise_std, size=n_frames) if cfg.range_noise_std > 0 else np.zeros(n_frames)

    frames: list[GrayImage] = []
    truth: list[GroundTruthSample] = []
    range_log: list[RangeSample] = []
    corner_window = 1.0 / cfg.fps
    for k in range(n_frames):
        t = k / cfg.fps
        sample = trajectory_state(spec, t, z=cfg.altitude, corner_window=corner_window)
        truth.append(sample)
        shift_x = cfg.cam.focal_px * math.tan(_pulse_tilt(cfg, t))
        frames.append(render_frame(sample.pose, cfg.altitude, cfg, (shift_x, 0.0)))
        range_log.append(RangeSample(t, max(cfg.altitude + float(range_noise[k]), 1e-6)))

    gyro: list[GyroSample] = []
    for j in range(n_gyro):
        t = j / cfg.gyro_rate
        if t > spec.duration:
            break
        wz_true = trajectory_state(spec, t).wz
        gyro.append(
            GyroSample(
                t,
                float(gyro_noise[j, 0]),
                float(gyro_noise[j, 1]) + _pulse_rate(cfg, t),
                wz_true + float(gyro_noise[j, 2]) + cfg.gyro_bias,
            )
        )
    return SimSequence(frames, truth, gyro, range_log)
