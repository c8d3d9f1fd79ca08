"""Core value types shared across the ego-motion pipeline.

All types are immutable value data and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "VECTOR_DTYPE",
    "FLAT_BLOCK_SAD",
    "normalize_angle",
    "MotionVector",
    "FlowField",
    "CameraIntrinsics",
    "GyroSample",
    "RangeSample",
    "RigidTransform2D",
    "VelocityEstimate",
    "Pose2D",
    "PoseSample",
]

#: In-memory layout of a motion-vector grid.  Displacements are kept as floats
#: so synthetic fields can carry sub-pixel values; the stream codec enforces
#: the integer wire ranges at encode time.
VECTOR_DTYPE = np.dtype([("du", "<f8"), ("dv", "<f8"), ("sad", "<u2")])

#: SAD marker for blocks rejected as textureless.  A real 16x16 SAD cannot
#: exceed 256 * 255 = 65280, so the all-ones value is free to act as a flag.
FLAT_BLOCK_SAD = 0xFFFF

_TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, _TWO_PI)
    if wrapped <= 0.0:
        wrapped += _TWO_PI
    return wrapped - math.pi


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name}: non-finite value {v!r}")


def _coerce_floats(obj, *fields: str) -> None:
    # normalize numpy scalars so equality and repr-based serialization behave
    for name in fields:
        object.__setattr__(obj, name, float(getattr(obj, name)))


@dataclass(frozen=True)
class MotionVector:
    """Displacement of one macroblock (pixels, frame t -> t+dt) and its SAD."""

    du: float
    dv: float
    sad: int = 0

    def __post_init__(self) -> None:
        _coerce_floats(self, "du", "dv")
        object.__setattr__(self, "sad", int(self.sad))
        _require_finite("MotionVector", self.du, self.dv)
        if not (-128 <= self.du <= 127 and -128 <= self.dv <= 127):
            raise ValueError(f"displacement ({self.du}, {self.dv}) outside 8-bit range")
        if not 0 <= self.sad <= 0xFFFF:
            raise ValueError(f"sad {self.sad} outside 16-bit range")


@dataclass(frozen=True, eq=False)
class FlowField:
    """Row-major grid of motion vectors produced for one frame interval.

    ``vectors`` is a structured array with dtype :data:`VECTOR_DTYPE` and
    length ``grid_w * grid_h``; entry ``row * grid_w + col`` belongs to the
    macroblock whose top-left pixel is ``(col * macroblock_size,
    row * macroblock_size)``.
    """

    frame_index: int
    timestamp: float
    grid_w: int
    grid_h: int
    vectors: np.ndarray
    macroblock_size: int = 16

    def __post_init__(self) -> None:
        if self.grid_w < 1 or self.grid_h < 1:
            raise ValueError("grid dimensions must be positive")
        if self.macroblock_size < 1:
            raise ValueError("macroblock_size must be positive")
        _coerce_floats(self, "timestamp")
        _require_finite("FlowField", self.timestamp)
        vec = self.vectors
        if not (isinstance(vec, np.ndarray) and vec.dtype == VECTOR_DTYPE):
            items = list(vec)
            vec = np.array([(m.du, m.dv, m.sad) for m in items], dtype=VECTOR_DTYPE)
        else:
            vec = np.ascontiguousarray(vec)
        if vec.shape != (self.grid_w * self.grid_h,):
            raise ValueError(
                f"expected {self.grid_w * self.grid_h} vectors, got {vec.shape}"
            )
        du, dv = vec["du"], vec["dv"]
        if not (np.all(np.isfinite(du)) and np.all(np.isfinite(dv))):
            raise ValueError("non-finite displacement in flow field")
        if du.size and (du.min() < -128 or du.max() > 127 or dv.min() < -128 or dv.max() > 127):
            raise ValueError("displacement outside 8-bit range")
        vec.setflags(write=False)
        object.__setattr__(self, "vectors", vec)

    @classmethod
    def from_components(
        cls,
        frame_index: int,
        timestamp: float,
        grid_w: int,
        grid_h: int,
        du: np.ndarray,
        dv: np.ndarray,
        sad: np.ndarray | None = None,
        macroblock_size: int = 16,
    ) -> "FlowField":
        du = np.asarray(du, dtype=np.float64).ravel()
        dv = np.asarray(dv, dtype=np.float64).ravel()
        if sad is None:
            sad = np.zeros(du.shape, dtype=np.uint16)
        else:
            sad = np.asarray(sad).ravel()
            if sad.size and (sad.min() < 0 or sad.max() > 0xFFFF):
                raise ValueError("sad outside 16-bit range")
            sad = sad.astype(np.uint16)
        if not (du.shape == dv.shape == sad.shape):
            raise ValueError("component arrays must share a shape")
        vec = np.empty(du.shape, dtype=VECTOR_DTYPE)
        vec["du"], vec["dv"], vec["sad"] = du, dv, sad
        return cls(frame_index, timestamp, grid_w, grid_h, vec, macroblock_size)

    @property
    def du(self) -> np.ndarray:
        return self.vectors["du"]

    @property
    def dv(self) -> np.ndarray:
        return self.vectors["dv"]

    @property
    def sad(self) -> np.ndarray:
        return self.vectors["sad"]

    def centers(self) -> np.ndarray:
        """Macroblock center coordinates, shape (grid_w * grid_h, 2), row-major."""
        size = float(self.macroblock_size)
        xs = (np.arange(self.grid_w) + 0.5) * size
        ys = (np.arange(self.grid_h) + 0.5) * size
        xx, yy = np.meshgrid(xs, ys)
        return np.column_stack((xx.ravel(), yy.ravel()))

    def vector_at(self, row: int, col: int) -> MotionVector:
        if not (0 <= row < self.grid_h and 0 <= col < self.grid_w):
            raise IndexError(f"block ({row}, {col}) outside grid")
        rec = self.vectors[row * self.grid_w + col]
        return MotionVector(float(rec["du"]), float(rec["dv"]), int(rec["sad"]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FlowField):
            return NotImplemented
        return (
            self.frame_index == other.frame_index
            and self.timestamp == other.timestamp
            and self.grid_w == other.grid_w
            and self.grid_h == other.grid_h
            and self.macroblock_size == other.macroblock_size
            and np.array_equal(self.vectors, other.vectors)
        )


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; ``focal_px`` is the focal length in pixel units."""

    focal_px: float
    cx: float
    cy: float
    image_w: int
    image_h: int

    def __post_init__(self) -> None:
        _require_finite("CameraIntrinsics", self.focal_px, self.cx, self.cy)
        if self.focal_px <= 0:
            raise ValueError("focal_px must be positive")
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValueError("image dimensions must be positive")
        if not (0 <= self.cx < self.image_w and 0 <= self.cy < self.image_h):
            raise ValueError("principal point outside image")


@dataclass(frozen=True)
class GyroSample:
    """Body rates (rad/s) about the camera axes; z is the optical axis."""

    timestamp: float
    wx: float
    wy: float
    wz: float

    def __post_init__(self) -> None:
        _coerce_floats(self, "timestamp", "wx", "wy", "wz")
        _require_finite("GyroSample", self.timestamp, self.wx, self.wy, self.wz)


@dataclass(frozen=True)
class RangeSample:
    """Camera-to-ground distance (m) from an external range sensor."""

    timestamp: float
    z: float

    def __post_init__(self) -> None:
        _coerce_floats(self, "timestamp", "z")
        _require_finite("RangeSample", self.timestamp, self.z)
        if self.z <= 0:
            raise ValueError("range must be positive")


@dataclass(frozen=True)
class RigidTransform2D:
    """In-plane rotation about the coordinate origin plus pixel translation."""

    theta: float
    tx: float
    ty: float

    def __post_init__(self) -> None:
        _coerce_floats(self, "theta", "tx", "ty")
        _require_finite("RigidTransform2D", self.theta, self.tx, self.ty)
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply the transform to an (N, 2) point array."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation().T + np.array([self.tx, self.ty])


@dataclass(frozen=True)
class VelocityEstimate:
    """Camera-frame planar velocity plus yaw rate and quality metadata.

    ``inlier_count == 0`` marks an estimate for which no motion consensus was
    found; such rows carry the last valid velocity forward and never advance
    the integrated pose.
    """

    timestamp: float
    vx: float
    vy: float
    wz: float
    z_used: float
    inlier_count: int
    valid_count: int

    def __post_init__(self) -> None:
        _coerce_floats(self, "timestamp", "vx", "vy", "wz", "z_used")
        object.__setattr__(self, "inlier_count", int(self.inlier_count))
        object.__setattr__(self, "valid_count", int(self.valid_count))
        _require_finite("VelocityEstimate", self.timestamp, self.vx, self.vy, self.wz)
        if self.inlier_count < 0 or self.valid_count < 0:
            raise ValueError("counts must be non-negative")
        if self.inlier_count > self.valid_count:
            raise ValueError("inlier_count exceeds valid_count")
        if self.valid and self.z_used <= 0:
            raise ValueError("valid estimate requires positive z_used")

    @property
    def valid(self) -> bool:
        return self.inlier_count > 0


@dataclass(frozen=True)
class Pose2D:
    """Planar pose in the world frame; heading wrapped to (-pi, pi]."""

    x: float
    y: float
    heading: float

    def __post_init__(self) -> None:
        _coerce_floats(self, "x", "y", "heading")
        _require_finite("Pose2D", self.x, self.y, self.heading)
        object.__setattr__(self, "heading", normalize_angle(self.heading))


@dataclass(frozen=True)
class PoseSample:
    """A pose stamped with the estimate time it was integrated at."""

    timestamp: float
    pose: Pose2D

    def __post_init__(self) -> None:
        _coerce_floats(self, "timestamp")
