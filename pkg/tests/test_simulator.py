import math

import numpy as np
import pytest

import groundflow as gf
from groundflow.simulator import _texture_u8


class TestTexture:
    def test_deterministic(self):
        assert gf.texture_sample(5, 1.234, -9.876, 0.05) == gf.texture_sample(5, 1.234, -9.876, 0.05)
        xs = np.linspace(-3, 3, 50)
        a = _texture_u8(9, xs, xs[::-1], 0.05)
        b = _texture_u8(9, xs, xs[::-1], 0.05)
        assert np.array_equal(a, b)

    def test_seeds_differ_almost_everywhere(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-50, 50, (1000, 2))
        a = _texture_u8(1, pts[:, 0], pts[:, 1], 0.05)
        b = _texture_u8(2, pts[:, 0], pts[:, 1], 0.05)
        assert np.mean(a != b) >= 0.99

    def test_continuity_bound_on_fine_grid(self):
        # implementation-frozen bound: adjacent samples 1 mm apart at the
        # default 0.05 m scale never jump by more than 30 levels
        xs = np.arange(0.0, 1.0, 0.001)
        gx, gy = np.meshgrid(xs, xs)
        img = _texture_u8(1, gx, gy, 0.05).astype(np.int32)
        assert np.abs(np.diff(img, axis=0)).max() <= 30
        assert np.abs(np.diff(img, axis=1)).max() <= 30

    def test_full_dynamic_range_per_patch(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            ox, oy = rng.uniform(-100, 100, 2)
            xs = np.arange(ox, ox + 0.5, 0.001)
            ys = np.arange(oy, oy + 0.5, 0.001)
            gx, gy = np.meshgrid(xs, ys)
            img = _texture_u8(int(rng.integers(0, 1000)), gx, gy, 0.05)
            assert img.min() == 0 and img.max() == 255

    def test_scale_validation(self):
        with pytest.raises(ValueError):
            gf.texture_sample(1, 0.0, 0.0, 0.0)


class TestRenderFrame:
    CFG = gf.SimConfig(trajectory=gf.TrajectorySpec.line(0.1, 0.0, duration=1.0))

    def test_deterministic(self):
        pose = gf.Pose2D(0.3, -0.2, 0.4)
        a = gf.render_frame(pose, 1.0, self.CFG)
        b = gf.render_frame(pose, 1.0, self.CFG)
        assert a == b

    def test_one_pixel_ground_shift(self):
        z = 1.0
        step = z / self.CFG.cam.focal_px
        a = gf.render_frame(gf.Pose2D(0, 0, 0), z, self.CFG)
        b = gf.render_frame(gf.Pose2D(step, 0, 0), z, self.CFG)
        diff = b.pixels[:, :-1].astype(int) - a.pixels[:, 1:].astype(int)
        assert np.abs(diff).max() <= 1

    def test_half_turn_rotates_image(self):
        a = gf.render_frame(gf.Pose2D(0.5, 0.5, 0.0), 1.0, self.CFG)
        b = gf.render_frame(gf.Pose2D(0.5, 0.5, math.pi), 1.0, self.CFG)
        # 180 degrees about the principal point (cx, cy) = (240, 240)
        rotated = a.pixels[::-1, ::-1]
        diff = b.pixels[1:, 1:].astype(int) - rotated[:-1, :-1].astype(int)
        assert np.abs(diff).max() <= 1

    def test_image_shift_moves_content(self):
        a = gf.render_frame(gf.Pose2D(0, 0, 0), 1.0, self.CFG)
        b = gf.render_frame(gf.Pose2D(0, 0, 0), 1.0, self.CFG, image_shift=(3.0, 0.0))
        diff = b.pixels[:, 3:].astype(int) - a.pixels[:, :-3].astype(int)
        assert np.abs(diff).max() <= 1

    def test_invalid_ground_distance(self):
        with pytest.raises(ValueError):
            gf.render_frame(gf.Pose2D(0, 0, 0), 0.0, self.CFG)


class TestTrajectoryState:
    def test_circle_reference_point(self):
        spec = gf.TrajectorySpec.circle(radius=1.0, period=2 * math.pi, duration=5.0)
        s = gf.trajectory_state(spec, 0.0)
        assert (s.pose.x, s.pose.y) == pytest.approx((1.0, 0.0))
        assert math.hypot(s.vx, s.vy) == pytest.approx(1.0)
        assert s.pose.heading == pytest.approx(math.pi / 2)
        assert s.wz == pytest.approx(1.0)
        # tangent mode keeps body velocity aligned with the nose
        assert s.vx == pytest.approx(1.0) and s.vy == pytest.approx(0.0, abs=1e-12)

    def test_line_reference_point(self):
        spec = gf.TrajectorySpec.line(0.5, 0.0, duration=4.0)
        s = gf.trajectory_state(spec, 2.0)
        assert (s.pose.x, s.pose.y) == (1.0, 0.0)
        assert (s.vx, s.vy) == (0.5, 0.0)
        assert s.wz == 0.0 and not s.corner

    def test_square_mid_edge(self):
        spec = gf.TrajectorySpec.square(side=2.0, speed=1.0, duration=10.0)
        s = gf.trajectory_state(spec, 1.0)
        assert math.hypot(s.vx, s.vy) == pytest.approx(1.0)
        assert s.wz == 0.0 and not s.corner
        assert (s.pose.x, s.pose.y) == pytest.approx((1.0, 0.0))

    def test_square_corner_flagging(self):
        spec = gf.TrajectorySpec.square(side=2.0, speed=1.0, duration=10.0)
        window = 1 / 30
        assert gf.trajectory_state(spec, 2.0, corner_window=window).corner
        assert gf.trajectory_state(spec, 2.0 + 0.9 * window, corner_window=window).corner
        assert not gf.trajectory_state(spec, 1.0, corner_window=window).corner

    def test_square_wraps_into_closed_loop(self):
        spec = gf.TrajectorySpec.square(side=2.0, speed=1.0, duration=10.0)
        s = gf.trajectory_state(spec, 8.0)
        assert (s.pose.x, s.pose.y) == pytest.approx((0.0, 0.0))

    @pytest.mark.parametrize(
        "spec",
        [
            gf.TrajectorySpec.circle(radius=0.8, period=7.0, duration=5.0),
            gf.TrajectorySpec.circle(radius=1.5, period=9.0, duration=5.0, yaw_mode="fixed"),
            gf.TrajectorySpec.line(0.3, -0.2, duration=5.0),
            gf.TrajectorySpec.square(side=1.0, speed=0.5, duration=5.0),
        ],
    )
    def test_velocity_matches_position_derivative(self, spec):
        eps = 1e-6
        for t in [0.5, 1.3, 2.7, 4.1]:
            if spec.kind == "square":
                leg_time = spec.side / spec.speed
                if min((t / leg_time) % 1.0, 1.0 - (t / leg_time) % 1.0) * leg_time < 10 * eps:
                    continue
            before = gf.trajectory_state(spec, t - eps)
            after = gf.trajectory_state(spec, t + eps)
            num_vx = (after.pose.x - before.pose.x) / (2 * eps)
            num_vy = (after.pose.y - before.pose.y) / (2 * eps)
            s = gf.trajectory_state(spec, t)
            c, sn = math.cos(s.pose.heading), math.sin(s.pose.heading)
            world_vx = c * s.vx - sn * s.vy
            world_vy = sn * s.vx + c * s.vy
            speed = math.hypot(world_vx, world_vy)
            assert abs(num_vx - world_vx) <= max(1e-6 * speed, 1e-9)
            assert abs(num_vy - world_vy) <= max(1e-6 * speed, 1e-9)

    def test_time_domain_enforced(self):
        spec = gf.TrajectorySpec.line(0.1, 0.0, duration=1.0)
        with pytest.raises(ValueError):
            gf.trajectory_state(spec, -0.1)
        with pytest.raises(ValueError):
            gf.trajectory_state(spec, 1.1)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            gf.TrajectorySpec(kind="spiral", duration=1.0)
        with pytest.raises(ValueError):
            gf.TrajectorySpec.circle(radius=0.0, period=1.0, duration=1.0)
        with pytest.raises(ValueError):
            gf.TrajectorySpec.line(0.1, 0.0, duration=0.0)


def small_cfg(**kwargs):
    cam = gf.CameraIntrinsics(640.0, 80.0, 80.0, 160, 160)
    spec = kwargs.pop("trajectory", gf.TrajectorySpec.line(0.1, 0.0, duration=2.0))
    return gf.SimConfig(trajectory=spec, cam=cam, **kwargs)


class TestSimulateSequence:
    def test_frame_and_log_counts(self):
        seq = gf.simulate_sequence(small_cfg())
        assert len(seq.frames) == 60
        assert len(seq.truth) == 60
        assert len(seq.range_log) == 60
        assert len(seq.gyro) == 400

    def test_zero_noise_gyro_matches_truth(self):
        spec = gf.TrajectorySpec.circle(radius=1.0, period=8.0, duration=1.0)
        seq = gf.simulate_sequence(small_cfg(trajectory=spec))
        omega = 2 * math.pi / 8.0
        for g in seq.gyro:
            assert g.wx == 0.0 and g.wy == 0.0
            assert g.wz == pytest.approx(omega, rel=1e-12)
        for r in seq.range_log:
            assert r.z == 1.0

    def test_bias_and_pulse_enter_the_log(self):
        cfg = small_cfg(
            gyro_bias=0.01,
            rotation_pulse_wy=0.25,
            rotation_pulse_start=0.5,
            rotation_pulse_stop=1.0,
        )
        seq = gf.simulate_sequence(cfg)
        for g in seq.gyro:
            assert g.wz == pytest.approx(0.01)
            expected_wy = 0.25 if 0.5 <= g.timestamp < 1.0 else 0.0
            assert g.wy == expected_wy

    def test_reproducible_from_seeds(self):
        cfg = small_cfg(gyro_noise_std=0.01, range_noise_std=0.01)
        a = gf.simulate_sequence(cfg)
        b = gf.simulate_sequence(cfg)
        assert a.truth == b.truth and a.gyro == b.gyro and a.range_log == b.range_log
        assert all(x == y for x, y in zip(a.frames, b.frames))

    def test_rendered_motion_recovered_by_matcher(self):
        # 0.28125 m/s at z=1, f=640, 30 fps moves exactly 6 px per frame
        spec = gf.TrajectorySpec.line(0.28125, 0.0, duration=0.1)
        cfg = gf.SimConfig(trajectory=spec)
        seq = gf.simulate_sequence(cfg)
        field = gf.compute_flow_field(seq.frames[0], seq.frames[1], 1 / 30, 1)
        exact = (field.du == -6.0) & (field.dv == 0.0)
        interior = np.zeros((30, 30), dtype=bool)
        interior[1:-1, 1:-1] = True
        assert exact[interior.ravel()].mean() >= 0.95

    def test_config_validation(self):
        with pytest.raises(ValueError):
            small_cfg(altitude=0.0)
        with pytest.raises(ValueError):
            small_cfg(gyro_noise_std=-1.0)
