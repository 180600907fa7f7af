import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mission_eval.pose import (
    CANONICAL_HEAD_POINTS,
    DegenerateInputError,
    PoseAngles,
    kabsch_umeyama,
    pose_angles,
    rotation_from_angles,
)


def random_points(rng, n=10):
    return rng.normal(size=(n, 3))


def rotation_angle_rad(r_est, r_true):
    r = r_est @ r_true.T
    cos = (np.trace(r) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, cos)))


class TestKabschUmeyama:
    def test_identity_on_equal_inputs(self):
        src = random_points(np.random.default_rng(0))
        tf = kabsch_umeyama(src, src)
        assert np.allclose(tf.rotation, np.eye(3), atol=1e-12)
        assert np.allclose(tf.translation, 0.0, atol=1e-12)
        assert tf.scale == 1.0

    def test_recovers_yaw_30(self):
        src = random_points(np.random.default_rng(1))
        rot = rotation_from_angles(30.0, 0.0, 0.0)
        tgt = src @ rot.T
        tf = kabsch_umeyama(src, tgt)
        angles = pose_angles(tf)
        assert abs(angles.yaw_deg - 30.0) < 1e-6
        assert abs(angles.pitch_deg) < 1e-6

    def test_recovers_translation_and_scale(self):
        rng = np.random.default_rng(2)
        src = random_points(rng, 12)
        rot = rotation_from_angles(40.0, -15.0, 8.0)
        tgt = 2.5 * (src @ rot.T) + np.array([1.0, -2.0, 0.5])
        tf = kabsch_umeyama(src, tgt, with_scale=True)
        assert abs(tf.scale - 2.5) < 1e-9
        assert np.allclose(tf.translation, [1.0, -2.0, 0.5], atol=1e-9)
        assert tf.residual(src, tgt) < 1e-18

    def test_reflection_yields_proper_rotation(self):
        rng = np.random.default_rng(3)
        src = random_points(rng, 8)
        tgt = src.copy()
        tgt[:, 0] = -tgt[:, 0]  # mirror: optimum over proper rotations is inexact
        tf = kabsch_umeyama(src, tgt)
        assert np.linalg.det(tf.rotation) == pytest.approx(1.0, abs=1e-9)
        assert tf.residual(src, tgt) > 1e-3

    def test_reflection_beats_rotation_grid(self):
        rng = np.random.default_rng(4)
        src = random_points(rng, 8)
        tgt = src.copy()
        tgt[:, 0] = -tgt[:, 0]
        tf = kabsch_umeyama(src, tgt)
        best = min(self._grid_residual(src, tgt, yaw, pitch, roll)
                   for yaw in range(-180, 180, 15)
                   for pitch in range(-90, 91, 15)
                   for roll in range(-180, 180, 15))
        assert tf.residual(src, tgt) <= best + 1e-7

    @staticmethod
    def _grid_residual(src, tgt, yaw, pitch, roll):
        rot = rotation_from_angles(yaw, pitch, roll)
        t = tgt.mean(axis=0) - rot @ src.mean(axis=0)
        diff = tgt - (src @ rot.T + t)
        return float(np.sum(diff * diff))

    def test_too_few_points(self):
        with pytest.raises(DegenerateInputError):
            kabsch_umeyama(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_collinear_source(self):
        src = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
        with pytest.raises(DegenerateInputError):
            kabsch_umeyama(src, src)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            kabsch_umeyama(np.zeros((4, 3)), np.zeros((5, 3)))

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=30, deadline=None)
    def test_random_rigid_recovery(self, case):
        rng = np.random.default_rng(case)
        n = int(rng.integers(5, 51))
        src = rng.normal(size=(n, 3))
        yaw, roll = rng.uniform(-179, 179, 2)
        pitch = rng.uniform(-89, 89)
        rot = rotation_from_angles(yaw, pitch, roll)
        t = rng.normal(size=3)
        s = rng.uniform(0.3, 3.0)
        tgt = s * (src @ rot.T) + t
        tf = kabsch_umeyama(src, tgt, with_scale=True)
        assert rotation_angle_rad(tf.rotation, rot) < 1e-6
        assert abs(tf.scale - s) < 1e-9 * max(1.0, s)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=15, deadline=None)
    def test_grid_optimality_on_noisy_instances(self, case):
        # global-minimum property: no grid rotation beats the closed form
        rng = np.random.default_rng(case + 77)
        src = rng.normal(size=(6, 3))
        tgt = rng.normal(size=(6, 3))
        tf = kabsch_umeyama(src, tgt)
        best = min(self._grid_residual(src, tgt, yaw, pitch, roll)
                   for yaw in range(-180, 180, 20)
                   for pitch in range(-80, 81, 20)
                   for roll in range(-180, 180, 20))
        assert tf.residual(src, tgt) <= best + 1e-7


class TestPoseAngles:
    def test_identity(self):
        angles = pose_angles(np.eye(3))
        assert angles == PoseAngles(0.0, 0.0, 0.0)

    def test_yaw_45(self):
        angles = pose_angles(rotation_from_angles(45.0, 0.0, 0.0))
        assert abs(angles.yaw_deg - 45.0) < 1e-9
        assert abs(angles.pitch_deg) < 1e-9
        assert abs(angles.roll_deg) < 1e-9

    def test_composed_rotation_round_trips_matrix(self):
        rot = rotation_from_angles(0.0, -10.0, 0.0) @ rotation_from_angles(100.0, 0.0, 0.0)
        angles = pose_angles(rot)
        rebuilt = rotation_from_angles(angles.yaw_deg, angles.pitch_deg, angles.roll_deg)
        assert np.max(np.abs(rebuilt - rot)) < 1e-6

    def test_gimbal_pitch_reports_zero_roll(self):
        rot = rotation_from_angles(0.0, 90.0, 33.0)
        angles = pose_angles(rot)
        assert angles.roll_deg == 0.0
        assert abs(angles.pitch_deg - 90.0) < 1e-6

    def test_yaw_range_half_open(self):
        angles = pose_angles(rotation_from_angles(180.0, 0.0, 0.0))
        assert angles.yaw_deg == 180.0
        angles = pose_angles(rotation_from_angles(-180.0, 0.0, 0.0))
        assert angles.yaw_deg == 180.0

    @given(
        st.floats(min_value=-179.9, max_value=180.0),
        st.floats(min_value=-88.9, max_value=88.9),
        st.floats(min_value=-179.9, max_value=180.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_angle_round_trip(self, yaw, pitch, roll):
        rot = rotation_from_angles(yaw, pitch, roll)
        angles = pose_angles(rot)
        assert abs(angles.yaw_deg - yaw) < 1e-6 or abs(abs(angles.yaw_deg - yaw) - 360.0) < 1e-6
        assert abs(angles.pitch_deg - pitch) < 1e-6
        assert abs(angles.roll_deg - roll) < 1e-6 or abs(abs(angles.roll_deg - roll) - 360.0) < 1e-6


def test_canonical_head_points_not_coplanar():
    centered = CANONICAL_HEAD_POINTS - CANONICAL_HEAD_POINTS.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    assert sv[2] > 1e-3
