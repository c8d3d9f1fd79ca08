"""Robust 2-D rigid-transform estimation and gyro rotation compensation.

The flow field is fit with a rotation-plus-translation model using RANSAC
over two-vector samples, then refit in closed form on the consensus set.
Translation induced by inter-frame roll/pitch is removed from the fitted
transform using the full-tangent pinhole model; rotation about the optical
axis is deliberately kept, as it measures heading change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .types import FLAT_BLOCK_SAD, CameraIntrinsics, FlowField, GyroSample, RigidTransform2D

__all__ = [
    "RansacParams",
    "Correspondence",
    "DegenerateSampleError",
    "NoConsensusError",
    "fit_rigid_2d",
    "ransac_rigid",
    "ransac_iterations",
    "average_gyro",
    "compensate_rotation",
]


class DegenerateSampleError(ValueError):
    """Raised when the point configuration cannot constrain a rigid fit."""


class NoConsensusError(RuntimeError):
    """Raised when no hypothesis reaches the required inlier count."""


@dataclass(frozen=True)
class RansacParams:
    """Consensus-search configuration.

    The default iteration budget of 210 keeps the probability of drawing an
    uncontaminated two-vector sample at 0.99 for up to 85% outliers; see
    :func:`ransac_iterations` for the underlying count formula.
    """

    iterations: int = 210
    inlier_threshold: float = 3.0
    min_inliers: int = 6
    confidence: float = 0.99
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if self.min_inliers < 2:
            raise ValueError("min_inliers must be >= 2")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")


@dataclass(frozen=True)
class Correspondence:
    """A macroblock center in frame t and its matched position in frame t+dt."""

    src_u: float
    src_v: float
    dst_u: float
    dst_v: float

    def __post_init__(self) -> None:
        for v in (self.src_u, self.src_v, self.dst_u, self.dst_v):
            if not math.isfinite(v):
                raise ValueError("correspondence coordinates must be finite")


def _fit_rigid_arrays(src: np.ndarray, dst: np.ndarray) -> RigidTransform2D:
    if len(src) < 2:
        raise DegenerateSampleError("need at least 2 correspondences")
    if np.ptp(src, axis=0).max() < 1e-12:
        raise DegenerateSampleError("source points are coincident")
    src_c = src - src.mean(axis=0)
    dst_c = dst - dst.mean(axis=0)
    cross = float(np.sum(src_c[:, 0] * dst_c[:, 1] - src_c[:, 1] * dst_c[:, 0]))
    dot = float(np.sum(src_c[:, 0] * dst_c[:, 0] + src_c[:, 1] * dst_c[:, 1]))
    theta = math.atan2(cross, dot)
    c, s = math.cos(theta), math.sin(theta)
    sx, sy = src.mean(axis=0)
    dx, dy = dst.mean(axis=0)
    return RigidTransform2D(theta, dx - (c * sx - s * sy), dy - (s * sx + c * sy))


def fit_rigid_2d(pairs: Sequence[Correspondence]) -> RigidTransform2D:
    """Least-squares rigid transform (rotation + translation, no scale).

    Minimizes ``sum || R(theta) @ src + t - dst ||^2`` in closed form via
    centroid subtraction and ``theta = atan2(sum cross, sum dot)``.
    """
    src = np.array([(p.src_u, p.src_v) for p in pairs], dtype=np.float64).reshape(-1, 2)
    dst = np.array([(p.dst_u, p.dst_v) for p in pairs], dtype=np.float64).reshape(-1, 2)
    return _fit_rigid_arrays(src, dst)


@njit(cache=True)
def _score_hypotheses(src, dst, c, s, tx, ty, thresh2):
    """Inlier count and summed squared inlier residual per hypothesis."""
    iters = c.shape[0]
    n = src.shape[0]
    counts = np.zeros(iters, dtype=np.int64)
    residuals = np.zeros(iters)
    for i in range(iters):
        ci, si, txi, tyi = c[i], s[i], tx[i], ty[i]
        count = 0
        total = 0.0
        for j in range(n):
            dx = ci * src[j, 0] - si * src[j, 1] + txi - dst[j, 0]
            dy = si * src[j, 0] + ci * src[j, 1] + tyi - dst[j, 1]
            r2 = dx * dx + dy * dy
            if r2 <= thresh2:
                count += 1
                total += r2
        counts[i] = count
        residuals[i] = total
    return counts, residuals


@njit(cache=True)
def _hypothesis_mask(src, dst, c, s, tx, ty, thresh2, out):
    # Same arithmetic, expression order included, as _score_hypotheses.
    for j in range(src.shape[0]):
        dx = c * src[j, 0] - s * src[j, 1] + tx - dst[j, 0]
        dy = s * src[j, 0] + c * src[j, 1] + ty - dst[j, 1]
        out[j] = dx * dx + dy * dy <= thresh2


def field_correspondences(field: FlowField) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(src, dst, original indices) of the field's usable vectors.

    Vectors carrying the textureless marker SAD are excluded.
    """
    centers = field.centers()
    usable = np.flatnonzero(field.sad != FLAT_BLOCK_SAD)
    src = centers[usable]
    dst = src + np.column_stack((field.du[usable], field.dv[usable]))
    return src, dst, usable


def ransac_rigid(
    field: FlowField, params: RansacParams = RansacParams()
) -> tuple[RigidTransform2D, np.ndarray, int]:
    """Fit a rigid transform to a flow field while rejecting outliers.

    Each iteration samples two distinct correspondences, fits a hypothesis
    and counts vectors with residual <= ``inlier_threshold``.  The hypothesis
    with the largest consensus wins (ties: lower summed squared inlier
    residual, then earlier iteration), and is refit on its full inlier set.
    Deterministic for a fixed seed.

    Returns ``(transform, inlier_mask, inlier_count)`` where the mask indexes
    the field's row-major vectors.  Raises :class:`NoConsensusError` when the
    best consensus stays below ``min_inliers``.
    """
    src, dst, usable = field_correspondences(field)
    n = len(src)
    if n < max(2, params.min_inliers):
        raise NoConsensusError(f"only {n} usable vectors")

    rng = np.random.default_rng(params.seed)
    iters = params.iterations
    first = rng.integers(0, n, size=iters)
    second = rng.integers(0, n, size=iters)
    dup = first == second
    while np.any(dup):
        second[dup] = rng.integers(0, n, size=int(dup.sum()))
        dup = first == second

    p1, p2 = src[first], src[second]
    q1, q2 = dst[first], dst[second]
    sp = p2 - p1
    sq = q2 - q1
    theta = np.arctan2(
        sp[:, 0] * sq[:, 1] - sp[:, 1] * sq[:, 0],
        sp[:, 0] * sq[:, 0] + sp[:, 1] * sq[:, 1],
    )
    c, s = np.cos(theta), np.sin(theta)
    pmx, pmy = 0.5 * (p1 + p2).T
    qmx, qmy = 0.5 * (q1 + q2).T
    tx = qmx - (c * pmx - s * pmy)
    ty = qmy - (s * pmx + c * pmy)

    thresh2 = params.inlier_threshold**2
    counts, residual = _score_hypotheses(src, dst, c, s, tx, ty, thresh2)
    best = np.lexsort((np.arange(iters), residual, -counts))[0]
    if counts[best] < params.min_inliers:
        raise NoConsensusError(
            f"best consensus {counts[best]} below min_inliers {params.min_inliers}"
        )

    hyp = np.zeros(n, dtype=np.bool_)
    _hypothesis_mask(src, dst, c[best], s[best], tx[best], ty[best], thresh2, hyp)
    transform = _fit_rigid_arrays(src[hyp], dst[hyp])
    mask = np.zeros(field.grid_w * field.grid_h, dtype=bool)
    mask[usable[hyp]] = True
    return transform, mask, int(counts[best])


def ransac_iterations(outlier_ratio: float, sample_size: int, confidence: float) -> int:
    """Iteration count for drawing one uncontaminated sample with given confidence.

    ``ceil(log(1 - confidence) / log(1 - (1 - outlier_ratio)**sample_size))``,
    with 1 returned when a single draw already suffices.
    """
    if not 0.0 <= outlier_ratio < 1.0:
        raise ValueError("outlier_ratio must lie in [0, 1)")
    if sample_size < 1:
        raise ValueError("sample_size must be >= 1")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    w = (1.0 - outlier_ratio) ** sample_size
    fail = 1.0 - w
    if fail <= 0.0:
        return 1
    return max(1, math.ceil(math.log(1.0 - confidence) / math.log(fail)))


def _average_gyro_arrays(
    times: np.ndarray, channels: np.ndarray, t0: float, t1: float
) -> tuple[float, float, float]:
    lo, hi = np.searchsorted(times, t0, side="right"), np.searchsorted(times, t1, side="left")
    knots = np.concatenate(([t0], times[lo:hi], [t1]))
    out = []
    for channel in channels:
        values = np.interp(knots, times, channel)
        out.append(float(np.trapezoid(values, knots) / (t1 - t0)))
    return out[0], out[1], out[2]


def average_gyro(
    samples: Sequence[GyroSample], t0: float, t1: float
) -> tuple[float, float, float]:
    """Time-weighted mean body rates over ``[t0, t1]``.

    Trapezoidal integration over the log with linear interpolation at the
    interval endpoints; outside the log's span the nearest sample's rates
    extend as constants, so an interval not covered at all simply returns
    the nearest sample.
    """
    if not samples:
        raise ValueError("empty gyro log")
    if t1 <= t0:
        raise ValueError("t1 must exceed t0")
    times = np.array([g.timestamp for g in samples])
    if np.any(np.diff(times) < 0):
        raise ValueError("gyro log timestamps must be non-decreasing")
    channels = np.array([[g.wx for g in samples], [g.wy for g in samples], [g.wz for g in samples]])
    return _average_gyro_arrays(times, channels, t0, t1)


def compensate_rotation(
    t_px: tuple[float, float],
    rates: tuple[float, float],
    dt: float,
    cam: CameraIntrinsics,
) -> tuple[float, float]:
    """Remove the image translation induced by inter-frame roll/pitch.

    A rotation at rate ``wy`` about the camera y axis shifts the image by
    ``focal_px * tan(wy * dt)`` along x (and ``wx`` correspondingly along y);
    that shift is subtracted from the measured translation.  Raises when the
    rotation angle approaches the tangent singularity at pi/2.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    wx, wy = rates
    ax, ay = wy * dt, wx * dt
    if abs(ax) >= math.pi / 2 or abs(ay) >= math.pi / 2:
        raise ValueError("rotation angle reaches the tangent singularity")
    tx, ty = t_px
    return tx - cam.focal_px * math.tan(ax), ty - cam.focal_px * math.tan(ay)
