"""Rigid-transform algebra on SE(3).

Poses are stored as a 3x3 rotation matrix plus a translation vector in
meters.  File I/O uses extrinsic XYZ fixed-angle degrees (roll about world
x, then pitch about world y, then yaw about world z); everything internal
is matrices and radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class Pose:
    """A rigid transform: orthonormal rotation + translation in meters."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=float).reshape(3, 3)
        trans = np.array(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)
        err = np.abs(rot.T @ rot - np.eye(3)).max()
        if err > _ORTHO_TOL:
            raise ValueError(f"rotation is not orthonormal (deviation {err:.2e})")
        if abs(float(np.linalg.det(rot)) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation determinant is not +1")

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_matrix(mat: np.ndarray) -> "Pose":
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (4, 4):
            raise ValueError("expected a 4x4 homogeneous matrix")
        return Pose(mat[:3, :3], mat[:3, 3])

    def matrix(self) -> np.ndarray:
        """Homogeneous 4x4 form."""
        mat = np.eye(4)
        mat[:3, :3] = self.rotation
        mat[:3, 3] = self.translation
        return mat

    def apply(self, point: np.ndarray) -> np.ndarray:
        """Map a point (or an (n,3) stack of points) through this transform."""
        pts = np.asarray(point, dtype=float)
        return pts @ self.rotation.T + self.translation

    def almost_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        """Elementwise comparison (the angle metric loses precision near 0)."""
        return bool(
            np.abs(self.rotation - other.rotation).max() <= tol
            and np.abs(self.translation - other.translation).max() <= tol
        )


def compose(a: Pose, b: Pose) -> Pose:
    """Chain two frames: the pose of b's child expressed in a's parent."""
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def compose_all(*poses: Pose) -> Pose:
    out = poses[0]
    for p in poses[1:]:
        out = compose(out, p)
    return out


def inverse(a: Pose) -> Pose:
    rot = a.rotation.T
    return Pose(rot, -(rot @ a.translation))


def interpolate(a: Pose, b: Pose, s: float) -> Pose:
    """Geodesic interpolation: linear translation, shortest-arc rotation.

    s must lie in [0, 1]; endpoints are returned exactly.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"interpolation parameter {s} outside [0, 1]")
    if s == 0.0:
        return a
    if s == 1.0:
        return b
    trans = (1.0 - s) * a.translation + s * b.translation
    qa = quat_from_matrix(a.rotation)
    qb = quat_from_matrix(b.rotation)
    return Pose(matrix_from_quat(quat_slerp(qa, qb, s)), trans)


def pose_distance(a: Pose, b: Pose) -> tuple[float, float]:
    """(translational meters, rotational radians in [0, pi]) between poses."""
    dt = float(np.linalg.norm(a.translation - b.translation))
    rel = a.rotation.T @ b.rotation
    cos_ang = (np.trace(rel) - 1.0) / 2.0
    # atan2 form stays accurate near zero where acos loses ~8 digits
    sin_ang = 0.5 * math.sqrt(
        (rel[2, 1] - rel[1, 2]) ** 2
        + (rel[0, 2] - rel[2, 0]) ** 2
        + (rel[1, 0] - rel[0, 1]) ** 2
    )
    dr = math.atan2(sin_ang, cos_ang)
    return dt, dr


# -- rotation constructors ---------------------------------------------------

def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    ax = np.asarray(axis, dtype=float)
    ax = ax / np.linalg.norm(ax)
    k = np.array(
        [[0.0, -ax[2], ax[1]], [ax[2], 0.0, -ax[0]], [-ax[1], ax[0], 0.0]]
    )
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def rotvec_from_matrix(rot: np.ndarray) -> np.ndarray:
    """Axis-angle vector (radians) of a rotation matrix, angle in [0, pi]."""
    cos_ang = (np.trace(rot) - 1.0) / 2.0
    angle = math.acos(min(1.0, max(-1.0, cos_ang)))
    if angle < 1e-10:
        # first-order: skew part
        return 0.5 * np.array(
            [rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]]
        )
    if math.pi - angle < 1e-6:
        # near pi the skew part vanishes; recover axis from the symmetric part
        sym = 0.5 * (rot + np.eye(3))
        axis = np.sqrt(np.maximum(np.diag(sym), 0.0))
        idx = int(np.argmax(axis))
        if axis[idx] > 0.0:
            for j in range(3):
                if j != idx:
                    axis[j] = sym[idx, j] / axis[idx]
        norm = np.linalg.norm(axis)
        if norm > 0.0:
            axis = axis / norm
        # fix the sign using the skew part (may be tiny but unambiguous)
        skew = np.array(
            [rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]]
        )
        if np.dot(axis, skew) < 0.0:
            axis = -axis
        return axis * angle
    scale = angle / (2.0 * math.sin(angle))
    return scale * np.array(
        [rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]]
    )


# -- quaternions (w, x, y, z), used internally for slerp ---------------------

def quat_from_matrix(rot: np.ndarray) -> np.ndarray:
    m = rot
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    return q / np.linalg.norm(q)


def matrix_from_quat(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_slerp(qa: np.ndarray, qb: np.ndarray, s: float) -> np.ndarray:
    """Shortest-arc spherical interpolation between unit quaternions."""
    dot = float(np.dot(qa, qb))
    if dot < 0.0:
        qb = -qb
        dot = -dot
    if dot > 1.0 - 1e-12:
        out = (1.0 - s) * qa + s * qb
        return out / np.linalg.norm(out)
    theta = math.acos(min(1.0, dot))
    sin_theta = math.sin(theta)
    wa = math.sin((1.0 - s) * theta) / sin_theta
    wb = math.sin(s * theta) / sin_theta
    out = wa * qa + wb * qb
    return out / np.linalg.norm(out)


# -- file conventions: extrinsic XYZ fixed angles in degrees -----------------

def matrix_from_rpy_deg(rpy: np.ndarray) -> np.ndarray:
    """Rotation from (roll, pitch, yaw) degrees, extrinsic XYZ order."""
    r, p, y = np.radians(np.asarray(rpy, dtype=float).reshape(3))
    return rot_z(y) @ rot_y(p) @ rot_x(r)


def rpy_deg_from_matrix(rot: np.ndarray) -> np.ndarray:
    """Recover extrinsic XYZ (roll, pitch, yaw) degrees from a rotation."""
    pitch = math.asin(min(1.0, max(-1.0, -rot[2, 0])))
    if abs(rot[2, 0]) < 1.0 - 1e-10:
        roll = math.atan2(rot[2, 1], rot[2, 2])
        yaw = math.atan2(rot[1, 0], rot[0, 0])
    else:
        # gimbal lock: pitch = +-90 deg, fold everything into roll
        roll = math.atan2(-rot[1, 2], rot[1, 1])
        yaw = 0.0
    return np.degrees(np.array([roll, pitch, yaw]))


def pose_from_xyz_rpy(xyz, rpy_deg) -> Pose:
    return Pose(matrix_from_rpy_deg(rpy_deg), np.asarray(xyz, dtype=float))
