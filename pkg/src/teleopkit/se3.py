"""Quaternion / SE(3) algebra and the operator-to-robot frame mapping.

Conventions used throughout the package:

* Quaternions are Hamilton, scalar-first ``(w, x, y, z)``, and describe
  active rotations: ``R(q) v`` rotates the vector ``v``.
* Poses pair a position in meters with a unit quaternion.
* ``canonicalize`` resolves the double cover by forcing ``w >= 0``.

Everything here is a pure value type; nothing mutates its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_UNIT_TOL = 1e-9


class DegenerateRotationError(ValueError):
    """Raised when a matrix claimed to be a rotation is not one."""


@dataclass(frozen=True)
class Quat:
    """Unit quaternion, scalar-first Hamilton convention."""

    w: float
    x: float
    y: float
    z: float

    @staticmethod
    def identity() -> "Quat":
        return Quat(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_wxyz(a) -> "Quat":
        w, x, y, z = (float(v) for v in a)
        return Quat(w, x, y, z)

    @staticmethod
    def from_axis_angle(axis, angle: float) -> "Quat":
        axis = np.asarray(axis, dtype=float)
        n = float(np.linalg.norm(axis))
        if n == 0.0:
            return Quat.identity()
        half = 0.5 * float(angle)
        s = math.sin(half) / n
        return Quat(math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s)

    def wxyz(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self) -> "Quat":
        n = self.norm()
        if n < 1e-12:
            raise ValueError("cannot normalize a near-zero quaternion")
        return Quat(self.w / n, self.x / n, self.y / n, self.z / n)

    def canonicalize(self) -> "Quat":
        """Unit-normalize and pick the double-cover representative with w >= 0."""
        q = self.normalized()
        if q.w < 0.0:
            return Quat(-q.w, -q.x, -q.y, -q.z)
        return q

    def conjugate(self) -> "Quat":
        return Quat(self.w, -self.x, -self.y, -self.z)

    def inverse(self) -> "Quat":
        # unit quaternion: inverse == conjugate (renormalized for safety)
        return self.conjugate().normalized()

    def rotate(self, v) -> np.ndarray:
        """Rotate a 3-vector by this quaternion."""
        return self.to_matrix() @ np.asarray(v, dtype=float)

    def angle(self) -> float:
        """Geodesic rotation angle in [0, pi]."""
        w = min(1.0, abs(self.normalized().w))
        return 2.0 * math.acos(w)

    def axis(self) -> np.ndarray:
        """Rotation axis (unit); arbitrary x-axis for the identity rotation."""
        q = self.normalized()
        s = math.sqrt(max(0.0, 1.0 - q.w * q.w))
        if s < 1e-12:
            return np.array([1.0, 0.0, 0.0])
        sign = 1.0 if q.w >= 0.0 else -1.0
        return sign * np.array([q.x, q.y, q.z]) / s

    def to_matrix(self) -> np.ndarray:
        q = self.normalized()
        w, x, y, z = q.w, q.x, q.y, q.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    @staticmethod
    def from_matrix(R) -> "Quat":
        """Nearest unit quaternion for a rotation matrix.

        Shepperd-style branch selection: pick the largest of the four
        candidate denominators so the extraction stays well conditioned for
        any rotation angle. Output is canonicalized (w >= 0).
        """
        R = np.asarray(R, dtype=float)
        t = float(np.trace(R))
        if t > max(R[0, 0], R[1, 1], R[2, 2]):
            s = math.sqrt(1.0 + t) * 2.0
            q = Quat(
                0.25 * s,
                (R[2, 1] - R[1, 2]) / s,
                (R[0, 2] - R[2, 0]) / s,
                (R[1, 0] - R[0, 1]) / s,
            )
        elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
            s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
            q = Quat(
                (R[2, 1] - R[1, 2]) / s,
                0.25 * s,
                (R[0, 1] + R[1, 0]) / s,
                (R[0, 2] + R[2, 0]) / s,
            )
        elif R[1, 1] >= R[2, 2]:
            s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
            q = Quat(
                (R[0, 2] - R[2, 0]) / s,
                (R[0, 1] + R[1, 0]) / s,
                0.25 * s,
                (R[1, 2] + R[2, 1]) / s,
            )
        else:
            s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
            q = Quat(
                (R[1, 0] - R[0, 1]) / s,
                (R[0, 2] + R[2, 0]) / s,
                (R[1, 2] + R[2, 1]) / s,
                0.25 * s,
            )
        return q.canonicalize()

    def is_unit(self, tol: float = _UNIT_TOL) -> bool:
        return abs(self.norm() - 1.0) <= tol


def quat_mul(a: Quat, b: Quat) -> Quat:
    """Hamilton product a * b, renormalized."""
    w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z
    x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y
    y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x
    z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w
    return Quat(w, x, y, z).normalized()


@dataclass(frozen=True)
class Pose:
    """Rigid transform: position (meters) plus unit quaternion orientation."""

    p: np.ndarray
    q: Quat

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).reshape(3))
        if not self.q.is_unit(1e-6):
            raise ValueError(f"pose orientation is not unit (norm={self.q.norm():.9f})")
        object.__setattr__(self, "q", self.q.normalized())

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), Quat.identity())

    def to_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.q.to_matrix()
        T[:3, 3] = self.p
        return T

    @staticmethod
    def from_matrix(T) -> "Pose":
        T = np.asarray(T, dtype=float)
        return Pose(T[:3, 3].copy(), Quat.from_matrix(T[:3, :3]))

    def compose(self, other: "Pose") -> "Pose":
        """self * other (apply other first, then self)."""
        return Pose(self.p + self.q.rotate(other.p), quat_mul(self.q, other.q))

    def inverse(self) -> "Pose":
        qi = self.q.inverse()
        return Pose(-qi.rotate(self.p), qi)

    def apply(self, v) -> np.ndarray:
        return self.p + self.q.rotate(v)


# Rotation taking operator/VR coordinates into robot-base coordinates.
# VR x -> robot -y, VR y -> robot +z, VR z -> robot +x.
DEFAULT_FRAME_MAP_MATRIX = np.array(
    [
        [0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
    ]
)


@dataclass(frozen=True)
class FrameMap:
    """Orthonormal change of coordinates between operator and robot frames.

    The default mapping is a handedness flip (determinant -1), so the map is
    validated as orthogonal with |det| = 1 rather than as a proper rotation.
    Conjugating an orientation increment by any orthogonal matrix still
    produces a proper rotation, and both the rotation angle and translation
    magnitudes are preserved.
    """

    R: np.ndarray = field(default_factory=lambda: DEFAULT_FRAME_MAP_MATRIX.copy())

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float).reshape(3, 3)
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-12):
            raise DegenerateRotationError("frame map is not orthonormal")
        if abs(abs(np.linalg.det(R)) - 1.0) > 1e-12:
            raise DegenerateRotationError("frame map determinant is not +/-1")
        object.__setattr__(self, "R", R)

    @property
    def is_proper(self) -> bool:
        return float(np.linalg.det(self.R)) > 0.0

    @staticmethod
    def default() -> "FrameMap":
        return FrameMap(DEFAULT_FRAME_MAP_MATRIX.copy())

    @staticmethod
    def named(name: str) -> "FrameMap":
        try:
            return FrameMap(np.asarray(_NAMED_FRAME_MAPS[name], dtype=float))
        except KeyError:
            raise KeyError(
                f"unknown frame map {name!r}; known: {sorted(_NAMED_FRAME_MAPS)}"
            ) from None


_NAMED_FRAME_MAPS = {
    "vr-to-robot-default": DEFAULT_FRAME_MAP_MATRIX,
    "identity": np.eye(3),
}


@dataclass(frozen=True)
class DifferentialIntent:
    """Relative wrist motion since the engage instant: dp meters, dq unit."""

    dp: np.ndarray
    dq: Quat

    def __post_init__(self):
        object.__setattr__(self, "dp", np.asarray(self.dp, dtype=float).reshape(3))
        object.__setattr__(self, "dq", self.dq.normalized())


def compute_intent(wrist_0: Pose, wrist_t: Pose) -> DifferentialIntent:
    """Differential intent from the engage wrist pose to the current one.

    dp = p_t - p_0 and dq = q_t * q_0^-1 (world-frame orientation increment).
    """
    dp = wrist_t.p - wrist_0.p
    dq = quat_mul(wrist_t.q, wrist_0.q.inverse())
    return DifferentialIntent(dp, dq)


def map_intent(intent: DifferentialIntent, fm: FrameMap) -> DifferentialIntent:
    """Express an operator-frame intent in robot-base coordinates.

    Translation maps directly through R; the rotation increment maps by the
    similarity transform R * R(dq) * R^T and is re-extracted as a quaternion.
    """
    dp = fm.R @ intent.dp
    Rdq = fm.R @ intent.dq.to_matrix() @ fm.R.T
    return DifferentialIntent(dp, Quat.from_matrix(Rdq))


def compose_target(ee_0: Pose, mapped: DifferentialIntent) -> Pose:
    """Target end-effector pose: displace the engage pose by the mapped intent."""
    return Pose(ee_0.p + mapped.dp, quat_mul(mapped.dq, ee_0.q))
