import numpy as np
import pytest

import groundflow as gf


@pytest.fixture(scope="session", autouse=True)
def warm_jit():
    """Compile the jitted kernels once so timed tests see steady-state costs."""
    rng = np.random.default_rng(0)
    img = gf.GrayImage.from_array(rng.integers(0, 256, (32, 32), dtype=np.uint8))
    gf.compute_flow_field(img, img, 0.0, 0, gf.MatchParams(search_range=4, step=2))
    field = gf.FlowField.from_components(0, 0.0, 3, 3, np.zeros(9), np.zeros(9))
    gf.ransac_rigid(field, gf.RansacParams(iterations=5, min_inliers=2, seed=0))


def shifted_pair(rng, width, height, du, dv, pad=80):
    """Random texture pair where content moves by exactly (du, dv) pixels."""
    big = rng.integers(0, 256, (height + 2 * pad, width + 2 * pad), dtype=np.uint8)
    ref = big[pad : pad + height, pad : pad + width]
    tgt = big[pad - dv : pad - dv + height, pad - du : pad - du + width]
    return gf.GrayImage.from_array(ref.copy()), gf.GrayImage.from_array(tgt.copy())


def synthetic_field(transform, grid_w=30, grid_h=30, mb=16, frame_index=1, timestamp=1 / 30):
    """Flow field whose vectors are exactly consistent with a rigid transform."""
    base = gf.FlowField.from_components(
        frame_index, timestamp, grid_w, grid_h, np.zeros(grid_w * grid_h), np.zeros(grid_w * grid_h), None, mb
    )
    centers = base.centers()
    moved = transform.apply(centers)
    return gf.FlowField.from_components(
        frame_index,
        timestamp,
        grid_w,
        grid_h,
        moved[:, 0] - centers[:, 0],
        moved[:, 1] - centers[:, 1],
        None,
        mb,
    )
