"""Rigid point-set alignment and head pose angles.

The corpus stores per-frame 3D head keypoints as a canonical reference point
set rotated into the camera frame.  Pose recovery aligns the reference set to
the observed set with a least-squares rigid (optionally scaled) transform and
converts the rotation to yaw/pitch/roll.

Angle convention (degrees at every interface, radians internally):
    forward f = R @ [0, 0, 1]
    yaw   = atan2(f_x, f_z)          in (-180, 180]
    pitch = atan2(-f_y, hypot(f_x, f_z))
    roll  = residual rotation about the forward axis after yaw and pitch
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DegenerateInputError",
    "RigidTransform",
    "PoseAngles",
    "kabsch_umeyama",
    "pose_angles",
    "rotation_from_angles",
    "CANONICAL_HEAD_POINTS",
]

# Canonical head landmark set, meters, head-centered: +z out of the face,
# +x toward the subject's left, +y downward.  Non-coplanar by construction.
CANONICAL_HEAD_POINTS = np.array(
    [
        [0.000, 0.020, 0.110],   # nose tip
        [0.000, 0.110, 0.030],   # chin
        [-0.035, -0.030, 0.080],  # left eye
        [0.035, -0.030, 0.080],  # right eye
        [-0.075, 0.010, -0.010],  # left ear
        [0.075, 0.010, -0.010],  # right ear
        [0.000, -0.115, -0.020],  # crown
    ]
)


class DegenerateInputError(ValueError):
    """Point configuration does not determine a rotation."""


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray   # 3x3, orthonormal, det = +1
    translation: np.ndarray  # 3-vector
    scale: float = 1.0

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * (points @ self.rotation.T) + self.translation

    def residual(self, source: np.ndarray, target: np.ndarray) -> float:
        """Sum of squared distances after applying the transform to source."""
        diff = target - self.apply(source)
        return float(np.sum(diff * diff))


@dataclass(frozen=True)
class PoseAngles:
    yaw_deg: float
    pitch_deg: float
    roll_deg: float


def kabsch_umeyama(
    source: np.ndarray, target: np.ndarray, with_scale: bool = False
) -> RigidTransform:
    """Least-squares rigid alignment of source onto target.

    Minimizes sum ||target_i - (s * R @ source_i + t)||^2 over proper
    rotations R (det = +1), translation t, and optionally scale s.

    Raises DegenerateInputError for fewer than 3 points or a collinear
    source configuration, where the rotation is ambiguous.
    """
    src = np.asarray(source, dtype=float)
    tgt = np.asarray(target, dtype=float)
    if src.ndim != 2 or src.shape[1] != 3 or src.shape != tgt.shape:
        raise ValueError("expected matching (n, 3) point arrays")
    n = src.shape[0]
    if n < 3:
        raise DegenerateInputError("need at least 3 point correspondences")

    src_centroid = src.mean(axis=0)
    tgt_centroid = tgt.mean(axis=0)
    src_c = src - src_centroid
    tgt_c = tgt - tgt_centroid

    # Collinear source points leave a free rotation about the line.
    src_sv = np.linalg.svd(src_c, compute_uv=False)
    if src_sv[1] <= 1e-12 * max(src_sv[0], 1e-30):
        raise DegenerateInputError("source points are collinear")

    cov = src_c.T @ tgt_c
    u, s, vt = np.linalg.svd(cov)
    v = vt.T
    d = np.sign(np.linalg.det(v @ u.T))
    if d == 0:
        d = 1.0
    correction = np.array([1.0, 1.0, d])
    rotation = v @ np.diag(correction) @ u.T

    if with_scale:
        src_var = float(np.sum(src_c * src_c))
        if src_var <= 0.0:
            raise DegenerateInputError("source points are coincident")
        scale = float(np.sum(s * correction)) / src_var
    else:
        scale = 1.0

    translation = tgt_centroid - scale * rotation @ src_centroid
    return RigidTransform(rotation=rotation, translation=translation, scale=scale)


def rotation_from_angles(yaw_deg: float, pitch_deg: float, roll_deg: float) -> np.ndarray:
    """Rotation matrix with the stated forward-vector convention.

    Composition is yaw about +y, then pitch about +x, then roll about +z:
    R = Ry(yaw) @ Rx(pitch) @ Rz(roll).
    """
    ya, pa, ra = (math.radians(a) for a in (yaw_deg, pitch_deg, roll_deg))
    cy, sy = math.cos(ya), math.sin(ya)
    cp, sp = math.cos(pa), math.sin(pa)
    cr, sr = math.cos(ra), math.sin(ra)
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    rz = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    return ry @ rx @ rz


def _wrap_half_open(deg: float) -> float:
    """Map to (-180, 180]."""
    wrapped = math.fmod(deg + 180.0, 360.0)
    if wrapped <= 0.0:
        wrapped += 360.0
    return wrapped - 180.0


def pose_angles(transform: RigidTransform | np.ndarray) -> PoseAngles:
    """Decompose a proper rotation into yaw, pitch, roll (degrees)."""
    rot = transform.rotation if isinstance(transform, RigidTransform) else np.asarray(transform, dtype=float)
    forward = rot @ np.array([0.0, 0.0, 1.0])
    fx, fy, fz = forward
    yaw = math.atan2(fx, fz)
    pitch = math.atan2(-fy, math.hypot(fx, fz))

    if abs(fy) > 1.0 - 1e-9:
        # Gimbal region: yaw and roll are not separable; report roll as 0.
        roll = 0.0
    else:
        base = rotation_from_angles(math.degrees(yaw), math.degrees(pitch), 0.0)
        residual = base.T @ rot
        roll = math.atan2(residual[1, 0], residual[0, 0])

    return PoseAngles(
        yaw_deg=_wrap_half_open(math.degrees(yaw)),
        pitch_deg=math.degrees(pitch),
        roll_deg=_wrap_half_open(math.degrees(roll)),
    )
