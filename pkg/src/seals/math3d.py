"""3-vector / quaternion / rigid-transform helpers.

World frame is East-North-Up (Z up), body frame is front-left-up. All
quaternions are (w, x, y, z) and kept unit-norm; all angles radians.
"""

import numpy as np

QUAT_TOL = 1e-9


def vec3(x=0.0, y=0.0, z=0.0) -> np.ndarray:
    return np.array([x, y, z], dtype=np.float64)


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(q)
    if n == 0.0 or not np.isfinite(n):
        raise ValueError("cannot normalize zero/non-finite quaternion")
    return q / n


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector v by unit quaternion q (body -> world for a pose quat)."""
    # q * (0,v) * q^-1 expanded; cheaper than building the matrix for one vector
    w, x, y, z = q
    uv = np.array([y * v[2] - z * v[1], z * v[0] - x * v[2], x * v[1] - y * v[0]])
    uuv = np.array([y * uv[2] - z * uv[1], z * uv[0] - x * uv[2], x * uv[1] - y * uv[0]])
    return v + 2.0 * (w * uv + uuv)


def quat_rotate_inv(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    return quat_rotate(quat_conjugate(q), v)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return quat_identity()
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * axis / n))


def quat_from_two_vectors(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Shortest-arc rotation taking direction a onto direction b."""
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    d = float(np.dot(a, b))
    if d > 1.0 - 1e-12:
        return quat_identity()
    if d < -1.0 + 1e-12:
        # 180 deg: pick any axis orthogonal to a
        axis = np.cross(a, vec3(1.0, 0.0, 0.0))
        if np.linalg.norm(axis) < 1e-8:
            axis = np.cross(a, vec3(0.0, 1.0, 0.0))
        return quat_from_axis_angle(axis, np.pi)
    axis = np.cross(a, b)
    q = np.concatenate(([1.0 + d], axis))
    return quat_normalize(q)


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of a unit quaternion, angle in [0, pi]."""
    q = q if q[0] >= 0.0 else -q  # canonical hemisphere
    s = np.linalg.norm(q[1:])
    if s < 1e-12:
        return 2.0 * q[1:]  # small-angle limit
    angle = 2.0 * np.arctan2(s, q[0])
    return q[1:] / s * angle


def quat_integrate(q: np.ndarray, omega_body: np.ndarray, dt: float) -> np.ndarray:
    """Advance orientation by body-frame angular velocity over dt; renormalizes."""
    dq = quat_multiply(q, np.concatenate(([0.0], omega_body)))
    return quat_normalize(q + 0.5 * dt * dq)


class Transform:
    """Rigid transform: rotation (unit quaternion) + translation (m)."""

    __slots__ = ("q", "t")

    def __init__(self, q=None, t=None):
        self.q = quat_identity() if q is None else np.asarray(q, dtype=np.float64)
        self.t = vec3() if t is None else np.asarray(t, dtype=np.float64)

    @staticmethod
    def identity() -> "Transform":
        return Transform()

    def apply(self, p: np.ndarray) -> np.ndarray:
        return quat_rotate(self.q, p) + self.t

    def compose(self, other: "Transform") -> "Transform":
        """self * other (apply other first, then self)."""
        return Transform(quat_normalize(quat_multiply(self.q, other.q)),
                         quat_rotate(self.q, other.t) + self.t)

    def inverse(self) -> "Transform":
        qi = quat_conjugate(self.q)
        return Transform(qi, -quat_rotate(qi, self.t))

    def __mul__(self, other: "Transform") -> "Transform":
        return self.compose(other)

    def __repr__(self):
        return f"Transform(q={self.q.tolist()}, t={self.t.tolist()})"
