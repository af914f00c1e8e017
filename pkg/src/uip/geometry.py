"""Geometry primitives: 3-vectors, unit quaternions, rotation helpers.

Conventions, used everywhere in the package:

- the world frame is right-handed with z up; gravity is (0, 0, -9.81)
- quaternions are scalar-first (w, x, y, z) in the Hamilton convention
- normalized quaternions are canonicalized to w >= 0, so q and -q
  collapse to one representative
- a stationary accelerometer measures the +g reaction, i.e. rotating
  (0, 0, +9.81) into the sensor frame

Vec3 and Quaternion are plain immutable float records rather than numpy
arrays: the hot loops here do a handful of scalar ops per call and the
array wrapper overhead would dominate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError

GRAVITY_MAGNITUDE = 9.81
_UNIT_NORM_TOL = 1e-6


@dataclass(frozen=True, slots=True)
class Vec3:
    x: float
    y: float
    z: float

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def scaled(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: "Vec3") -> "Vec3":
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def norm2(self) -> float:
        return self.x * self.x + self.y * self.y + self.z * self.z

    def normalized(self) -> "Vec3":
        n = self.norm()
        if n == 0.0:
            raise ContractViolationError("cannot normalize a zero vector")
        return Vec3(self.x / n, self.y / n, self.z / n)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @staticmethod
    def from_array(a) -> "Vec3":
        return Vec3(float(a[0]), float(a[1]), float(a[2]))

    @staticmethod
    def zero() -> "Vec3":
        return Vec3(0.0, 0.0, 0.0)


WORLD_GRAVITY = Vec3(0.0, 0.0, -GRAVITY_MAGNITUDE)
GRAVITY_REACTION = Vec3(0.0, 0.0, GRAVITY_MAGNITUDE)


@dataclass(frozen=True, slots=True)
class Quaternion:
    w: float
    x: float
    y: float
    z: float

    @staticmethod
    def identity() -> "Quaternion":
        return Quaternion(1.0, 0.0, 0.0, 0.0)

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self) -> "Quaternion":
        """Unit-norm, canonicalized so that w >= 0."""
        n = self.norm()
        if n == 0.0 or not math.isfinite(n):
            raise ContractViolationError(f"cannot normalize quaternion with norm {n}")
        s = 1.0 / n
        if self.w < 0.0:
            s = -s
        return Quaternion(self.w * s, self.x * s, self.y * s, self.z * s)

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def inverse(self) -> "Quaternion":
        """Inverse of a unit quaternion (the conjugate)."""
        return self.conjugate()

    def dot(self, other: "Quaternion") -> float:
        return self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        """Hamilton product. Not normalized; compose and re-normalize as needed."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Quaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def rotation_angle(self) -> float:
        """Angle of the rotation this (unit) quaternion encodes, in [0, pi]."""
        v = math.sqrt(self.x**2 + self.y**2 + self.z**2)
        return 2.0 * math.atan2(v, abs(self.w))

    def to_rotvec(self) -> Vec3:
        """Rotation vector (axis * angle), angle in [0, pi]. Inverse of from_rotvec."""
        w, x, y, z = self.w, self.x, self.y, self.z
        if w < 0.0:  # q and -q encode the same rotation; take the short arc
            w, x, y, z = -w, -x, -y, -z
        v = math.sqrt(x * x + y * y + z * z)
        if v < 1e-12:
            # small-angle: sin(a/2) ~ a/2, so vector part ~ axis * a/2
            return Vec3(2.0 * x, 2.0 * y, 2.0 * z)
        s = 2.0 * math.atan2(v, w) / v
        return Vec3(x * s, y * s, z * s)

    @staticmethod
    def from_rotvec(r: Vec3) -> "Quaternion":
        angle = r.norm()
        if angle < 1e-12:
            # first-order expansion keeps this smooth through zero
            return Quaternion(1.0, 0.5 * r.x, 0.5 * r.y, 0.5 * r.z).normalized()
        s = math.sin(0.5 * angle) / angle
        return Quaternion(math.cos(0.5 * angle), r.x * s, r.y * s, r.z * s)

    @staticmethod
    def from_axis_angle(axis: Vec3, angle: float) -> "Quaternion":
        u = axis.normalized()
        half = 0.5 * angle
        s = math.sin(half)
        return Quaternion(math.cos(half), u.x * s, u.y * s, u.z * s)

    def to_matrix(self) -> np.ndarray:
        """3x3 rotation matrix of a unit quaternion."""
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Quaternion":
        """Unit quaternion from a rotation matrix (Shepperd's method)."""
        m = np.asarray(m, dtype=float)
        t = m[0, 0] + m[1, 1] + m[2, 2]
        if t > 0.0:
            s = math.sqrt(t + 1.0) * 2.0
            q = Quaternion(
                0.25 * s,
                (m[2, 1] - m[1, 2]) / s,
                (m[0, 2] - m[2, 0]) / s,
                (m[1, 0] - m[0, 1]) / s,
            )
        elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
            s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
            q = Quaternion(
                (m[2, 1] - m[1, 2]) / s,
                0.25 * s,
                (m[0, 1] + m[1, 0]) / s,
                (m[0, 2] + m[2, 0]) / s,
            )
        elif m[1, 1] >= m[2, 2]:
            s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
            q = Quaternion(
                (m[0, 2] - m[2, 0]) / s,
                (m[0, 1] + m[1, 0]) / s,
                0.25 * s,
                (m[1, 2] + m[2, 1]) / s,
            )
        else:
            s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
            q = Quaternion(
                (m[1, 0] - m[0, 1]) / s,
                (m[0, 2] + m[2, 0]) / s,
                (m[1, 2] + m[2, 1]) / s,
                0.25 * s,
            )
        return q.normalized()

    def to_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    @staticmethod
    def from_array(a) -> "Quaternion":
        return Quaternion(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    def is_finite(self) -> bool:
        return (
            math.isfinite(self.w)
            and math.isfinite(self.x)
            and math.isfinite(self.y)
            and math.isfinite(self.z)
        )


def quat_rotate(q: Quaternion, v: Vec3) -> Vec3:
    """Rotate v by unit quaternion q (sensor->world if q is the sensor orientation)."""
    n2 = q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z
    if abs(n2 - 1.0) > 3.0 * _UNIT_NORM_TOL:
        raise ContractViolationError(f"quat_rotate requires a unit quaternion, |q|^2 = {n2}")
    # v' = v + 2 w (u x v) + 2 u x (u x v), u = quaternion vector part
    tx = 2.0 * (q.y * v.z - q.z * v.y)
    ty = 2.0 * (q.z * v.x - q.x * v.z)
    tz = 2.0 * (q.x * v.y - q.y * v.x)
    return Vec3(
        v.x + q.w * tx + (q.y * tz - q.z * ty),
        v.y + q.w * ty + (q.z * tx - q.x * tz),
        v.z + q.w * tz + (q.x * ty - q.y * tx),
    )


def quat_relative(q_i: Quaternion, q_j: Quaternion) -> Quaternion:
    """Relative rotation q_i^-1 * q_j, normalized and canonicalized."""
    return (q_i.conjugate() * q_j).normalized()


def quat_angle_between(q_a: Quaternion, q_b: Quaternion) -> float:
    """Geodesic angle between two unit quaternions, radians in [0, pi]."""
    return (q_a.conjugate() * q_b).rotation_angle()


def rot6d_from_quat(q: Quaternion) -> np.ndarray:
    """6D rotation representation: the first two columns of the matrix."""
    m = q.to_matrix()
    return np.concatenate([m[:, 0], m[:, 1]])


def quat_from_rot6d(r6) -> Quaternion:
    """Orthonormalize a 6D representation (Gram-Schmidt) back to a quaternion.

    Degenerate inputs (zero or parallel columns) fall back to identity so
    that untrained network output still evaluates.
    """
    r6 = np.asarray(r6, dtype=float)
    a, b = r6[:3], r6[3:6]
    na = np.linalg.norm(a)
    if na < 1e-8:
        return Quaternion.identity()
    c0 = a / na
    b_orth = b - np.dot(b, c0) * c0
    nb = np.linalg.norm(b_orth)
    if nb < 1e-8:
        return Quaternion.identity()
    c1 = b_orth / nb
    c2 = np.cross(c0, c1)
    return Quaternion.from_matrix(np.column_stack([c0, c1, c2]))
