"""Metric conversion of pixel-domain motion and planar dead reckoning.

Pixel displacements scale to ground displacements through the pinhole model:
a translation of ``t`` pixels at ground distance ``z`` corresponds to
``-t * z / focal_px`` meters (the image moves opposite to the camera).  The
same inversion applies to rotation about the optical axis, whose fitted
image angle is the negative of the vehicle's heading change.
"""

from __future__ import annotations

import math

from .block_match import MatchParams
from .types import CameraIntrinsics, Pose2D, RigidTransform2D, VelocityEstimate

__all__ = ["flow_to_velocity", "velocity_envelope", "integrate_pose"]


def flow_to_velocity(
    xf: RigidTransform2D,
    z: float,
    dt: float,
    timestamp: float,
    cam: CameraIntrinsics,
    quality: tuple[int, int],
) -> VelocityEstimate:
    """Convert a compensated rigid transform into a metric velocity estimate.

    ``xf`` must describe image motion with its translation expressed at the
    principal point.  ``quality`` carries ``(inlier_count, valid_count)``
    through to the estimate.
    """
    if z <= 0:
        raise ValueError("ground distance must be positive")
    if dt <= 0:
        raise ValueError("dt must be positive")
    inlier_count, valid_count = quality
    return VelocityEstimate(
        timestamp=timestamp,
        vx=-(xf.tx * z) / (cam.focal_px * dt),
        vy=-(xf.ty * z) / (cam.focal_px * dt),
        wz=-xf.theta / dt,
        z_used=z,
        inlier_count=inlier_count,
        valid_count=valid_count,
    )


def velocity_envelope(
    cam: CameraIntrinsics, z: float, fps: float, params: MatchParams = MatchParams()
) -> tuple[float, float]:
    """Theoretical (v_min, v_max) detectable speeds at ground distance ``z``.

    The smallest nonzero detectable speed corresponds to one matcher step per
    frame, the largest to the full search range; both are linear in ``z`` and
    in the frame rate.
    """
    if z <= 0:
        raise ValueError("ground distance must be positive")
    if fps <= 0:
        raise ValueError("fps must be positive")
    if params.step >= params.search_range:
        raise ValueError("step must be smaller than search_range")
    return (
        params.step * z * fps / cam.focal_px,
        params.search_range * z * fps / cam.focal_px,
    )


def integrate_pose(pose: Pose2D, v: VelocityEstimate, dt: float) -> Pose2D:
    """Advance a planar pose by one velocity estimate over ``dt``.

    The body-frame velocity is rotated into the world frame at the midpoint
    heading, which removes the first-order bias of explicit Euler on curved
    paths and makes the step exactly time-reversible.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    h_mid = pose.heading + 0.5 * v.wz * dt
    c, s = math.cos(h_mid), math.sin(h_mid)
    return Pose2D(
        pose.x + (c * v.vx - s * v.vy) * dt,
        pose.y + (s * v.vx + c * v.vy) * dt,
        pose.heading + v.wz * dt,
    )
