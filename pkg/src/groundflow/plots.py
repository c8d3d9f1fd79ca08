"""Report figures rendered alongside the delimited evaluation output."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .simulator import GroundTruthSample
from .types import PoseSample, VelocityEstimate

__all__ = ["save_velocity_figure", "save_trajectory_figure", "save_envelope_figure"]


def save_velocity_figure(
    path: str | Path,
    estimates: Sequence[VelocityEstimate],
    truth: Sequence[GroundTruthSample] | None = None,
) -> None:
    """Plot estimated body-frame velocity components over time."""
    valid = [e for e in estimates if e.valid]
    fig, ax = plt.subplots(figsize=(8, 4))
    if valid:
        t = [e.timestamp for e in valid]
        ax.plot(t, [e.vx for e in valid], label="vx est", color="tab:blue", lw=1)
        ax.plot(t, [e.vy for e in valid], label="vy est", color="tab:orange", lw=1)
    if truth:
        tt = [s.timestamp for s in truth]
        ax.plot(tt, [s.vx for s in truth], "--", label="vx truth", color="tab:blue", lw=1)
        ax.plot(tt, [s.vy for s in truth], "--", label="vy truth", color="tab:orange", lw=1)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("velocity [m/s]")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_trajectory_figure(
    path: str | Path,
    poses: Sequence[PoseSample],
    reference: np.ndarray | None = None,
) -> None:
    """Plot the integrated trajectory, optionally against reference positions.

    ``reference`` is an (N, 3) array of (timestamp, x, y) rows.
    """
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([p.pose.x for p in poses], [p.pose.y for p in poses], label="estimate", lw=1)
    if reference is not None and len(reference):
        ref = np.asarray(reference)
        ax.plot(ref[:, 1], ref[:, 2], "--", label="reference", lw=1)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_envelope_figure(
    path: str | Path, z: np.ndarray, v_min: np.ndarray, v_max: np.ndarray
) -> None:
    """Plot the detectable-velocity envelope against ground distance."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(z, v_max, label="v_max", color="tab:red")
    ax.plot(z, v_min, label="v_min", color="tab:green")
    ax.fill_between(z, v_min, v_max, alpha=0.1, color="tab:blue")
    ax.set_xlabel("ground distance [m]")
    ax.set_ylabel("velocity [m/s]")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
