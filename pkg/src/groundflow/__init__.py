"""Ground-facing camera ego-motion sensing.

Sparse block-matching optical flow, robust rigid-transform estimation with
gyro rotation compensation, metric velocity recovery from ground distance,
and a synthetic scene simulator with analytic ground truth.
"""

from .types import (
    FLAT_BLOCK_SAD,
    CameraIntrinsics,
    FlowField,
    GyroSample,
    MotionVector,
    Pose2D,
    PoseSample,
    RangeSample,
    RigidTransform2D,
    VelocityEstimate,
    normalize_angle,
)
from .mvs import StreamFormatError, decode_mv_stream, encode_mv_stream
from .block_match import GrayImage, MatchParams, compute_flow_field, match_block
from .motion import (
    Correspondence,
    DegenerateSampleError,
    NoConsensusError,
    RansacParams,
    average_gyro,
    compensate_rotation,
    fit_rigid_2d,
    ransac_iterations,
    ransac_rigid,
)
from .scale import flow_to_velocity, integrate_pose, velocity_envelope
from .simulator import (
    GroundTruthSample,
    SimConfig,
    SimSequence,
    TrajectorySpec,
    render_frame,
    simulate_sequence,
    texture_sample,
    trajectory_state,
)
from .pipeline import (
    ErrorStats,
    PipelineConfig,
    align_trajectories,
    geodetic_to_local,
    integrate_velocity_series,
    run_pipeline,
    velocity_error_stats,
)

__version__ = "0.1.0"

__all__ = [
    "FLAT_BLOCK_SAD",
    "CameraIntrinsics",
    "FlowField",
    "GyroSample",
    "MotionVector",
    "Pose2D",
    "PoseSample",
    "RangeSample",
    "RigidTransform2D",
    "VelocityEstimate",
    "normalize_angle",
    "StreamFormatError",
    "decode_mv_stream",
    "encode_mv_stream",
    "GrayImage",
    "MatchParams",
    "compute_flow_field",
    "match_block",
    "Correspondence",
    "DegenerateSampleError",
    "NoConsensusError",
    "RansacParams",
    "average_gyro",
    "compensate_rotation",
    "fit_rigid_2d",
    "ransac_iterations",
    "ransac_rigid",
    "flow_to_velocity",
    "integrate_pose",
    "velocity_envelope",
    "GroundTruthSample",
    "SimConfig",
    "SimSequence",
    "TrajectorySpec",
    "render_frame",
    "simulate_sequence",
    "texture_sample",
    "trajectory_state",
    "ErrorStats",
    "PipelineConfig",
    "align_trajectories",
    "geodetic_to_local",
    "integrate_velocity_series",
    "run_pipeline",
    "velocity_error_stats",
]
