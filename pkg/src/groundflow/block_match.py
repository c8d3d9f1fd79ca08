"""Software block-matching optical flow.

Emulates the constraints of a hardware coarse motion estimator: the image is
tiled into fixed-size macroblocks and for each block the displacement
minimizing the sum of absolute differences (SAD) is searched exhaustively
over a bounded grid (default +-64 pixels at 2-pixel resolution).

Equal-SAD candidates are resolved by preferring the smaller du^2 + dv^2,
then the smaller dv, then the smaller du, which biases textureless blocks
toward zero motion.  Candidate windows leaving the target image are skipped
rather than padded.  Per-block work is independent and runs in parallel;
results are identical to sequential evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit, prange

from .types import FLAT_BLOCK_SAD, FlowField, MotionVector

__all__ = ["GrayImage", "MatchParams", "match_block", "compute_flow_field"]


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit grayscale image with row-major pixel storage."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels)
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("pixel values outside 0..255")
            arr = arr.astype(np.uint8)
        if arr.shape != (self.height, self.width):
            raise ValueError(f"pixel array shape {arr.shape} != (height, width)")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "GrayImage":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(arr.shape[1], arr.shape[0], arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True)
class MatchParams:
    """Search configuration for the block matcher."""

    macroblock_size: int = 16
    search_range: int = 64
    step: int = 2
    flat_sad_threshold: float | None = None

    def __post_init__(self) -> None:
        if self.macroblock_size < 4:
            raise ValueError("macroblock_size must be >= 4")
        if self.step < 1:
            raise ValueError("step must be >= 1")
        if self.search_range < self.step or self.search_range % self.step != 0:
            raise ValueError("search_range must be a positive multiple of step")
        if self.flat_sad_threshold is not None and self.flat_sad_threshold < 0:
            raise ValueError("flat_sad_threshold must be non-negative")


@lru_cache(maxsize=None)
def _candidate_offsets(search_range: int, step: int) -> np.ndarray:
    """Displacement grid ordered by the tie-break rule (radius, dv, du)."""
    span = np.arange(-search_range, search_range + 1, step, dtype=np.int64)
    du, dv = np.meshgrid(span, span, indexing="xy")
    du, dv = du.ravel(), dv.ravel()
    order = np.lexsort((du, dv, du * du + dv * dv))
    offsets = np.column_stack((du[order], dv[order]))
    offsets.setflags(write=False)
    return offsets


@njit(cache=True)
def _best_offset(ref, tgt, top, left, mb, offsets):
    """Index into ``offsets`` of the minimum-SAD in-bounds candidate.

    Candidates are visited in tie-break priority order with strict
    improvement required, so the first minimal candidate wins.  Row-level
    early termination is exact because SAD accumulates non-negative terms.
    """
    th, tw = tgt.shape
    best_sad = np.int64(1) << np.int64(62)
    best_i = -1
    for i in range(offsets.shape[0]):
        t_left = left + offsets[i, 0]
        t_top = top + offsets[i, 1]
        if t_left < 0 or t_top < 0 or t_left + mb > tw or t_top + mb > th:
            continue
        s = np.int64(0)
        for r in range(mb):
            ref_row = ref[top + r]
            tgt_row = tgt[t_top + r]
            for c in range(mb):
                d = np.int64(ref_row[left + c]) - np.int64(tgt_row[t_left + c])
                s += d if d >= 0 else -d
            if s >= best_sad:
                break
        if s < best_sad:
            best_sad = s
            best_i = i
    return best_i, best_sad


@njit(cache=True, parallel=True)
def _match_grid(ref, tgt, mb, offsets, grid_w, grid_h, out_du, out_dv, out_sad):
    for b in prange(grid_w * grid_h):
        row = b // grid_w
        col = b - row * grid_w
        best_i, best_sad = _best_offset(ref, tgt, row * mb, col * mb, mb, offsets)
        if best_i < 0:
            out_sad[b] = -1
        else:
            out_du[b] = offsets[best_i, 0]
            out_dv[b] = offsets[best_i, 1]
            out_sad[b] = best_sad if best_sad < 0xFFFF else 0xFFFF


def match_block(
    ref: GrayImage,
    tgt: GrayImage,
    center_u: int,
    center_v: int,
    params: MatchParams = MatchParams(),
) -> MotionVector:
    """Match one macroblock of ``ref`` against ``tgt``.

    The block window is centered on ``(center_u, center_v)`` and must lie
    fully inside ``ref``.  Returns the displacement minimizing SAD over the
    search grid; the reported SAD is the winning sum saturated to 16 bits.
    """
    mb = params.macroblock_size
    left = int(center_u) - mb // 2
    top = int(center_v) - mb // 2
    if left < 0 or top < 0 or left + mb > ref.width or top + mb > ref.height:
        raise ValueError(f"macroblock at ({center_u}, {center_v}) outside reference image")
    offsets = _candidate_offsets(params.search_range, params.step)
    best_i, best_sad = _best_offset(ref.pixels, tgt.pixels, top, left, mb, offsets)
    if best_i < 0:
        raise ValueError("no candidate window lies inside the target image")
    return MotionVector(
        float(offsets[best_i, 0]), float(offsets[best_i, 1]), int(min(best_sad, 0xFFFF))
    )


def _block_texture(pixels: np.ndarray, grid_w: int, grid_h: int, mb: int) -> np.ndarray:
    """Per-block sum of absolute deviations from the block mean."""
    blocks = (
        pixels[: grid_h * mb, : grid_w * mb]
        .reshape(grid_h, mb, grid_w, mb)
        .transpose(0, 2, 1, 3)
        .astype(np.float64)
    )
    means = blocks.mean(axis=(2, 3), keepdims=True)
    return np.abs(blocks - means).sum(axis=(2, 3)).ravel()


def compute_flow_field(
    ref: GrayImage,
    tgt: GrayImage,
    timestamp: float,
    frame_index: int,
    params: MatchParams = MatchParams(),
) -> FlowField:
    """Match every macroblock of ``ref`` against ``tgt``.

    The grid covers ``floor(width / mb) x floor(height / mb)`` blocks; blocks
    near the border simply see a constrained candidate set.  When
    ``params.flat_sad_threshold`` is set, blocks whose intensity deviation
    falls below it are marked textureless: their vector is zeroed and their
    SAD is set to :data:`FLAT_BLOCK_SAD` so downstream fitting can skip them.
    """
    if (ref.width, ref.height) != (tgt.width, tgt.height):
        raise ValueError("reference and target image dimensions differ")
    mb = params.macroblock_size
    grid_w, grid_h = ref.width // mb, ref.height // mb
    if grid_w < 1 or grid_h < 1:
        raise ValueError("image smaller than one macroblock")
    offsets = _candidate_offsets(params.search_range, params.step)
    n = grid_w * grid_h
    du = np.zeros(n, dtype=np.int64)
    dv = np.zeros(n, dtype=np.int64)
    sad = np.zeros(n, dtype=np.int64)
    _match_grid(ref.pixels, tgt.pixels, mb, offsets, grid_w, grid_h, du, dv, sad)
    if np.any(sad < 0):
        raise ValueError("no candidate window lies inside the target image")
    if params.flat_sad_threshold is not None:
        flat = _block_texture(ref.pixels, grid_w, grid_h, mb) < params.flat_sad_threshold
        du[flat] = 0
        dv[flat] = 0
        sad[flat] = FLAT_BLOCK_SAD
    return FlowField.from_components(
        frame_index,
        timestamp,
        grid_w,
        grid_h,
        du.astype(np.float64),
        dv.astype(np.float64),
        sad.astype(np.uint16),
        mb,
    )
