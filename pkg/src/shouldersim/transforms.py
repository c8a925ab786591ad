"""Rigid transforms stored as position plus unit quaternion.

Quaternions use (w, x, y, z) ordering and are kept canonical: unit norm
with a non-negative scalar part, so that equal rotations serialize to
identical numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Pose",
    "quat_normalize",
    "quat_multiply",
    "quat_conjugate",
    "quat_rotate",
    "quat_to_matrix",
    "quat_from_matrix",
    "quat_from_axis_angle",
    "quat_to_rotvec",
    "quat_from_rpy",
    "quat_angle",
]


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Return ``q`` scaled to unit norm with the scalar part >= 0."""
    q = np.asarray(q, dtype=float)
    norm = float(np.linalg.norm(q))
    if not np.isfinite(norm) or norm == 0.0:
        raise ValueError("quaternion has zero or non-finite norm")
    q = q / norm
    if q[0] < 0.0:
        q = -q
    return q


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate one vector (3,) or a stack of vectors (N, 3) by ``q``."""
    v = np.asarray(v, dtype=float)
    w, x, y, z = q
    u = np.array([x, y, z])
    uv = np.cross(u, v)
    return v + 2.0 * (w * uv + np.cross(u, uv))


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Convert a proper rotation matrix to a canonical unit quaternion."""
    m = np.asarray(m, dtype=float)
    t = np.trace(m)
    if t > 0.0:
        s = np.sqrt(t + 1.0)
        w = 0.5 * s
        s = 0.5 / s
        q = np.array(
            [w, (m[2, 1] - m[1, 2]) * s, (m[0, 2] - m[2, 0]) * s, (m[1, 0] - m[0, 1]) * s]
        )
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(m[i, i] - m[j, j] - m[k, k] + 1.0)
        xyz = np.empty(3)
        xyz[i] = 0.5 * s
        s = 0.5 / s
        xyz[j] = (m[j, i] + m[i, j]) * s
        xyz[k] = (m[k, i] + m[i, k]) * s
        q = np.concatenate([[(m[k, j] - m[j, k]) * s], xyz])
    return quat_normalize(q)


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = float(np.linalg.norm(axis))
    if n == 0.0:
        raise ValueError("rotation axis must be nonzero")
    half = 0.5 * float(angle)
    return quat_normalize(
        np.concatenate([[np.cos(half)], np.sin(half) * axis / n])
    )


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    """Axis-angle 3-vector of ``q`` (angle in [0, pi] after canonicalization)."""
    w = float(np.clip(q[0], -1.0, 1.0))
    xyz = np.asarray(q[1:], dtype=float)
    s = float(np.linalg.norm(xyz))
    if s < 1e-12:
        return 2.0 * xyz  # small-angle limit: q ~ (1, v/2)
    angle = 2.0 * np.arctan2(s, w)
    return xyz * (angle / s)


def quat_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Intrinsic z-y-x Euler angles (yaw about z, then pitch, then roll)."""
    qz = quat_from_axis_angle([0.0, 0.0, 1.0], yaw)
    qy = quat_from_axis_angle([0.0, 1.0, 0.0], pitch)
    qx = quat_from_axis_angle([1.0, 0.0, 0.0], roll)
    return quat_normalize(quat_multiply(quat_multiply(qz, qy), qx))


def quat_angle(q: np.ndarray) -> float:
    """Magnitude of the rotation encoded by ``q``, in radians."""
    return float(np.linalg.norm(quat_to_rotvec(q)))


@dataclass(frozen=True)
class Pose:
    """Rigid transform: rotate by ``quaternion`` then translate by ``position``."""

    position: np.ndarray
    quaternion: np.ndarray

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def from_parts(cls, position, quaternion) -> "Pose":
        return cls(
            np.array(position, dtype=float).reshape(3),
            quat_normalize(quaternion),
        )

    @classmethod
    def from_axis_angle(cls, position, axis, angle: float) -> "Pose":
        return cls(
            np.array(position, dtype=float).reshape(3),
            quat_from_axis_angle(axis, angle),
        )

    @classmethod
    def from_rpy(cls, position, roll: float, pitch: float, yaw: float) -> "Pose":
        return cls(np.array(position, dtype=float).reshape(3), quat_from_rpy(roll, pitch, yaw))

    @classmethod
    def from_matrix(cls, rotation: np.ndarray, position) -> "Pose":
        return cls(np.array(position, dtype=float).reshape(3), quat_from_matrix(rotation))

    def compose(self, other: "Pose") -> "Pose":
        """Rigid composition self∘other (apply ``other`` first in self's frame)."""
        return Pose(
            self.position + quat_rotate(self.quaternion, other.position),
            quat_normalize(quat_multiply(self.quaternion, other.quaternion)),
        )

    def inverse(self) -> "Pose":
        qinv = quat_conjugate(self.quaternion)
        return Pose(-quat_rotate(qinv, self.position), quat_normalize(qinv))

    def transform_point(self, point: np.ndarray) -> np.ndarray:
        return quat_rotate(self.quaternion, point) + self.position

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.quaternion)

    def position_distance(self, other: "Pose") -> float:
        return float(np.linalg.norm(self.position - other.position))

    def rotation_distance(self, other: "Pose") -> float:
        """Relative rotation angle between the two orientations, radians."""
        return quat_angle(quat_multiply(quat_conjugate(self.quaternion), other.quaternion))

    def as_array(self) -> np.ndarray:
        """7-vector (x, y, z, qw, qx, qy, qz), handy for logging."""
        return np.concatenate([self.position, self.quaternion])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.quaternion)))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        p = np.array2string(self.position, precision=4, suppress_small=True)
        q = np.array2string(self.quaternion, precision=4, suppress_small=True)
        return f"Pose(p={p}, q={q})"
