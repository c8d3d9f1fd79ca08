"""End-to-end estimation over recorded or simulated streams, plus evaluation.

For every consecutive pair of flow-field timestamps the pipeline fits a
rigid transform, removes the gyro-predicted rotation shift, scales by the
ground distance nearest the interval midpoint, and folds the velocity into a
dead-reckoned pose.  Frames without motion consensus emit an invalid-flagged
estimate (``inlier_count == 0``) carrying the last valid velocity and leave
the pose untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Sequence

import numpy as np

from .block_match import MatchParams
from .motion import (
    NoConsensusError,
    RansacParams,
    _average_gyro_arrays,
    compensate_rotation,
    ransac_rigid,
)
from .scale import flow_to_velocity, integrate_pose
from .simulator import GroundTruthSample
from .types import (
    FLAT_BLOCK_SAD,
    CameraIntrinsics,
    FlowField,
    GyroSample,
    Pose2D,
    PoseSample,
    RangeSample,
    RigidTransform2D,
    VelocityEstimate,
    normalize_angle,
)

__all__ = [
    "PipelineConfig",
    "ErrorStats",
    "run_pipeline",
    "integrate_velocity_series",
    "velocity_error_stats",
    "align_trajectories",
    "geodetic_to_local",
]

# WGS-84 ellipsoid
_WGS84_A = 6378137.0
_WGS84_F = 1.0 / 298.257223563
_WGS84_E2 = _WGS84_F * (2.0 - _WGS84_F)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the estimation stage needs besides the input streams."""

    cam: CameraIntrinsics
    match: MatchParams = dataclass_field(default_factory=MatchParams)
    ransac: RansacParams = dataclass_field(default_factory=RansacParams)
    compensation_enabled: bool = True


@dataclass(frozen=True)
class ErrorStats:
    """Mean and standard deviation of velocity error norms."""

    mean: float
    std: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.std < 0:
            raise ValueError("std must be non-negative")


def _nearest_value(times: np.ndarray, values: np.ndarray, t: float) -> float:
    idx = int(np.searchsorted(times, t))
    if idx <= 0:
        return float(values[0])
    if idx >= len(times):
        return float(values[-1])
    return float(values[idx] if times[idx] - t < t - times[idx - 1] else values[idx - 1])


def _principal_point_translation(xf: RigidTransform2D, cam: CameraIntrinsics) -> tuple[float, float]:
    """Translation of the fitted transform evaluated at the principal point.

    The fit parametrizes rotation about the pixel origin; the ego-motion
    component that metric scaling needs is the flow at the nadir ray, i.e.
    ``R(theta) @ c + t - c`` with ``c`` the principal point.
    """
    c, s = math.cos(xf.theta), math.sin(xf.theta)
    px, py = cam.cx, cam.cy
    return (c * px - s * py + xf.tx - px, s * px + c * py + xf.ty - py)


def run_pipeline(
    fields: Sequence[FlowField],
    gyro: Sequence[GyroSample],
    range_log: Sequence[RangeSample],
    cfg: PipelineConfig,
) -> tuple[list[VelocityEstimate], list[PoseSample]]:
    """Estimate velocity and dead-reckoned pose from a flow-field stream.

    ``fields[k]`` (k >= 1) must hold the motion measured from frame k-1 to
    frame k and be stamped with frame k's time; the first field only anchors
    the time base and its vectors are ignored.  Returns one velocity estimate
    and one pose sample per frame, starting with an invalid placeholder and
    the origin pose at the first timestamp.
    """
    if len(fields) < 2:
        raise ValueError("need at least 2 frames")
    times = np.array([f.timestamp for f in fields])
    if np.any(np.diff(times) <= 0):
        raise ValueError("flow-field timestamps must strictly increase")
    if not range_log:
        raise ValueError("empty range log")
    range_t = np.array([r.timestamp for r in range_log])
    range_z = np.array([r.z for r in range_log])
    if np.any(np.diff(range_t) < 0):
        raise ValueError("range log timestamps must be non-decreasing")
    if cfg.compensation_enabled:
        if not gyro:
            raise ValueError("empty gyro log")
        gyro_t = np.array([g.timestamp for g in gyro])
        if np.any(np.diff(gyro_t) < 0):
            raise ValueError("gyro log timestamps must be non-decreasing")
        gyro_ch = np.array([[g.wx for g in gyro], [g.wy for g in gyro], [g.wz for g in gyro]])

    t0 = fields[0].timestamp
    z0 = _nearest_value(range_t, range_z, t0)
    estimates = [VelocityEstimate(t0, 0.0, 0.0, 0.0, z0, 0, 0)]
    pose = Pose2D(0.0, 0.0, 0.0)
    poses = [PoseSample(t0, pose)]
    last_velocity = (0.0, 0.0, 0.0)

    for k in range(1, len(fields)):
        flow = fields[k]
        t_prev = fields[k - 1].timestamp
        dt = flow.timestamp - t_prev
        n_usable = int(np.count_nonzero(flow.sad != FLAT_BLOCK_SAD))
        z = _nearest_value(range_t, range_z, t_prev + 0.5 * dt)

        estimate = None
        try:
            xf, _mask, inlier_count = ransac_rigid(flow, cfg.ransac)
        except NoConsensusError:
            xf = None
        if xf is not None:
            tx, ty = _principal_point_translation(xf, cfg.cam)
            try:
                if cfg.compensation_enabled:
                    wx, wy, _wz = _average_gyro_arrays(gyro_t, gyro_ch, t_prev, flow.timestamp)
                    tx, ty = compensate_rotation((tx, ty), (wx, wy), dt, cfg.cam)
                estimate = flow_to_velocity(
                    RigidTransform2D(xf.theta, tx, ty),
                    z,
                    dt,
                    flow.timestamp,
                    cfg.cam,
                    (inlier_count, n_usable),
                )
            except ValueError:
                estimate = None

        if estimate is None:
            estimate = VelocityEstimate(flow.timestamp, *last_velocity, z, 0, n_usable)
        else:
            pose = integrate_pose(pose, estimate, dt)
            last_velocity = (estimate.vx, estimate.vy, estimate.wz)
        estimates.append(estimate)
        poses.append(PoseSample(flow.timestamp, pose))
    return estimates, poses


def integrate_velocity_series(estimates: Sequence[VelocityEstimate]) -> list[PoseSample]:
    """Fold a velocity series into a pose series starting at the origin.

    Reproduces exactly the pose track :func:`run_pipeline` emits for the same
    estimates: invalid rows never advance the pose.
    """
    if not estimates:
        raise ValueError("empty velocity series")
    pose = Pose2D(0.0, 0.0, 0.0)
    poses = [PoseSample(estimates[0].timestamp, pose)]
    for prev, est in zip(estimates, estimates[1:]):
        dt = est.timestamp - prev.timestamp
        if dt <= 0:
            raise ValueError("velocity timestamps must strictly increase")
        if est.valid:
            pose = integrate_pose(pose, est, dt)
        poses.append(PoseSample(est.timestamp, pose))
    return poses


def velocity_error_stats(
    estimates: Sequence[VelocityEstimate], truth: Sequence[GroundTruthSample]
) -> ErrorStats:
    """Velocity error statistics against interpolated ground truth.

    For each valid estimate inside the truth time span the error is the
    Euclidean distance between estimated and interpolated true (vx, vy);
    estimates bracketed by corner-flagged truth samples are excluded.
    """
    if not truth:
        raise ValueError("empty truth series")
    tt = np.array([s.timestamp for s in truth])
    tvx = np.array([s.vx for s in truth])
    tvy = np.array([s.vy for s in truth])
    tcorner = np.array([1.0 if s.corner else 0.0 for s in truth])

    errors = []
    for est in estimates:
        if not est.valid:
            continue
        if est.timestamp < tt[0] or est.timestamp > tt[-1]:
            continue
        if np.interp(est.timestamp, tt, tcorner) > 0.0:
            continue
        dvx = est.vx - np.interp(est.timestamp, tt, tvx)
        dvy = est.vy - np.interp(est.timestamp, tt, tvy)
        errors.append(math.hypot(dvx, dvy))
    if not errors:
        raise ValueError("no valid estimates overlap the truth series")
    arr = np.asarray(errors)
    return ErrorStats(float(arr.mean()), float(arr.std()), len(arr))


def align_trajectories(
    est: Sequence[PoseSample],
    ref: np.ndarray,
    time_tolerance: float | None = None,
) -> tuple[list[PoseSample], float, tuple[float, float]]:
    """Align an estimated pose series to a reference position series.

    Both series are translated to a common origin (their first samples) and
    the estimate is rotated by the least-squares angle minimizing summed
    squared position error over nearest-time matched pairs.  ``ref`` is an
    (N, 3) array of ``(timestamp, x, y)`` rows.

    Returns ``(aligned estimate series, rotation, translation)`` with the
    translation being the net shift applied after rotation.
    """
    ref = np.asarray(ref, dtype=np.float64)
    if len(est) < 2 or ref.shape[0] < 2 or ref.shape[1] != 3:
        raise ValueError("need at least 2 samples in each series")
    ref_t, ref_xy = ref[:, 0], ref[:, 1:]
    if time_tolerance is None:
        time_tolerance = 0.75 * float(np.median(np.diff(ref_t))) if len(ref_t) > 1 else math.inf

    est_t = np.array([p.timestamp for p in est])
    est_xy = np.array([[p.pose.x, p.pose.y] for p in est])
    idx = np.clip(np.searchsorted(ref_t, est_t), 1, len(ref_t) - 1)
    idx = np.where(np.abs(ref_t[idx] - est_t) < np.abs(est_t - ref_t[idx - 1]), idx, idx - 1)
    matched = np.abs(ref_t[idx] - est_t) <= time_tolerance
    if int(matched.sum()) < 2:
        raise ValueError("fewer than 2 time-matched pairs")

    a = est_xy[matched] - est_xy[0]
    b = ref_xy[idx[matched]] - ref_xy[0]
    theta = math.atan2(
        float(np.sum(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])),
        float(np.sum(a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1])),
    )
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    shifted = (est_xy - est_xy[0]) @ rot.T + ref_xy[0]
    aligned = [
        PoseSample(p.timestamp, Pose2D(shifted[i, 0], shifted[i, 1], normalize_angle(p.pose.heading + theta)))
        for i, p in enumerate(est)
    ]
    translation = ref_xy[0] - rot @ est_xy[0]
    return aligned, theta, (float(translation[0]), float(translation[1]))


def geodetic_to_local(
    lat: float, lon: float, origin_lat: float, origin_lon: float
) -> tuple[float, float]:
    """Convert geodetic coordinates to local east/north meters.

    Local tangent-plane approximation on the WGS-84 ellipsoid: north uses the
    meridional radius of curvature at the origin latitude, east the prime
    vertical radius scaled by ``cos(origin_lat)``.
    """
    if abs(lat) >= 89.0 or abs(origin_lat) >= 89.0:
        raise ValueError("latitudes must stay below 89 degrees")
    phi = math.radians(origin_lat)
    w2 = 1.0 - _WGS84_E2 * math.sin(phi) ** 2
    meridional = _WGS84_A * (1.0 - _WGS84_E2) / w2**1.5
    prime_vertical = _WGS84_A / math.sqrt(w2)
    x = math.radians(lon - origin_lon) * prime_vertical * math.cos(phi)
    y = math.radians(lat - origin_lat) * meridional
    return x, y
