"""3-DoF manipulator + 3-finger gripper: kinematics, Jacobian, IK, system CoG.

Chain (vehicle/body frame): yaw joint at the belly mount, then two pitch
joints; home configuration q = 0 hangs straight down. Positive q2/q3 swing
the links toward body +x. Link CoMs sit at segment midpoints; the gripper
mass is lumped into the last link.
"""

from dataclasses import dataclass, field

import numpy as np

from .math3d import Transform, quat_from_axis_angle, vec3


class IkError(RuntimeError):
    def __init__(self, msg, closest_distance):
        super().__init__(msg)
        self.closest_distance = closest_distance


@dataclass
class ArmModel:
    link_lengths: np.ndarray = field(default_factory=lambda: np.array([0.12, 0.12, 0.08]))
    link_masses: np.ndarray = field(default_factory=lambda: np.array([0.08, 0.08, 0.05]))
    joint_lo: np.ndarray = field(default_factory=lambda: np.array([-3.1, -2.0, -2.4]))
    joint_hi: np.ndarray = field(default_factory=lambda: np.array([3.1, 2.0, 2.4]))
    mount: np.ndarray = field(default_factory=lambda: vec3(0.0, 0.0, -0.04))
    gripper_open: float = 0.6     # finger joint angle, rad
    gripper_closed: float = 0.05

    def __post_init__(self):
        self.link_lengths = np.asarray(self.link_lengths, dtype=np.float64)
        self.link_masses = np.asarray(self.link_masses, dtype=np.float64)
        self.joint_lo = np.asarray(self.joint_lo, dtype=np.float64)
        self.joint_hi = np.asarray(self.joint_hi, dtype=np.float64)
        self.mount = np.asarray(self.mount, dtype=np.float64)
        if np.any(self.joint_lo >= self.joint_hi):
            raise ValueError("joint limits must satisfy lo < hi")
        if np.any(self.link_masses <= 0):
            raise ValueError("link masses must be > 0")

    @staticmethod
    def from_config(arm_cfg) -> "ArmModel":
        return ArmModel(np.array(arm_cfg.link_lengths), np.array(arm_cfg.link_masses),
                        np.array(arm_cfg.joint_lo), np.array(arm_cfg.joint_hi),
                        np.array(arm_cfg.mount))

    @property
    def reach(self) -> float:
        return float(self.link_lengths.sum())

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.joint_lo, self.joint_hi)


@dataclass
class ArmState:
    q: np.ndarray = field(default_factory=lambda: np.zeros(3))
    qdot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q_prev: np.ndarray = field(default_factory=lambda: np.zeros(3))
    aperture: float = 1.0          # 1 = open, 0 = closed
    finger_q: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def copy(self) -> "ArmState":
        return ArmState(self.q.copy(), self.qdot.copy(), self.q_prev.copy(),
                        self.aperture, self.finger_q.copy())


_AXES = np.array([[0.0, 0.0, 1.0],    # base yaw
                  [0.0, -1.0, 0.0],   # shoulder pitch (+q -> +x)
                  [0.0, -1.0, 0.0]])  # elbow pitch


def _frames(model: ArmModel, q) -> list:
    """Transforms of each joint frame (after its rotation), vehicle frame."""
    q = np.asarray(q, dtype=np.float64)
    l1, l2, l3 = model.link_lengths
    t = Transform(t=model.mount)
    frames = []
    offsets = [vec3(), vec3(0, 0, -l1), vec3(0, 0, -l2)]
    for k in range(3):
        t = t * Transform(t=offsets[k]) * Transform(q=quat_from_axis_angle(_AXES[k], q[k]))
        frames.append(t)
    return frames


def forward_kinematics(model: ArmModel, q) -> Transform:
    """End-effector transform in the vehicle frame."""
    if not np.all(np.isfinite(q)):
        raise ValueError("joint angles must be finite")
    frames = _frames(model, q)
    return frames[2] * Transform(t=vec3(0, 0, -model.link_lengths[2]))


def jacobian(model: ArmModel, q) -> np.ndarray:
    """Geometric Jacobian, 6x3: rows [linear; angular] ee velocity per q̇."""
    frames = _frames(model, q)
    p_ee = forward_kinematics(model, q).t
    J = np.zeros((6, 3))
    for k, frame in enumerate(frames):
        axis_world = frame.apply(_AXES[k]) - frame.t
        J[:3, k] = np.cross(axis_world, p_ee - frame.t)
        J[3:, k] = axis_world
    return J


def inverse_kinematics(model: ArmModel, target: Transform, q_init=None,
                       max_iters: int = 200, tol: float = 1e-5,
                       damping: float = 1e-3) -> np.ndarray:
    """Damped least-squares IK on position (3 DoF => position-only task).

    Raises IkError carrying the closest achieved distance when the target
    cannot be reached within joint limits.
    """
    target_p = np.asarray(target.t if isinstance(target, Transform) else target,
                          dtype=np.float64)
    q = np.zeros(3) if q_init is None else np.asarray(q_init, dtype=np.float64).copy()
    q = model.clamp(q)
    best_q, best_err = q.copy(), np.inf
    for _ in range(max_iters):
        err = target_p - forward_kinematics(model, q).t
        dist = float(np.linalg.norm(err))
        if dist < best_err:
            best_err, best_q = dist, q.copy()
        if dist < tol:
            return q
        Jp = jacobian(model, q)[:3, :]
        # (J J^T + lambda^2 I) y = err ; dq = J^T y
        A = Jp @ Jp.T + (damping ** 2) * np.eye(3)
        dq = Jp.T @ np.linalg.solve(A, err)
        step = np.linalg.norm(dq)
        if step > 0.5:
            dq *= 0.5 / step
        q = model.clamp(q + dq)
    raise IkError(f"IK failed to reach target (closest {best_err:.4g} m)", best_err)


def link_com_positions(model: ArmModel, q) -> np.ndarray:
    """Per-link center-of-mass positions (3x3), vehicle frame."""
    frames = _frames(model, q)
    coms = np.zeros((3, 3))
    for k in range(3):
        coms[k] = frames[k].apply(vec3(0, 0, -0.5 * model.link_lengths[k]))
    return coms


def system_cog(vehicle_mass: float, model: ArmModel, q,
               vehicle_cog=None) -> np.ndarray:
    """Mass-weighted CoG of vehicle + arm links, body frame (x, y, z)."""
    if vehicle_mass <= 0:
        raise ValueError("vehicle mass must be > 0")
    v_cog = vec3() if vehicle_cog is None else np.asarray(vehicle_cog, dtype=np.float64)
    coms = link_com_positions(model, q)
    total = vehicle_mass * v_cog + (model.link_masses[:, None] * coms).sum(axis=0)
    return total / (vehicle_mass + model.link_masses.sum())


def fingertip_offsets(model: ArmModel, aperture: float) -> np.ndarray:
    """Fingertip positions relative to the ee frame for a given aperture."""
    angle = model.gripper_closed + aperture * (model.gripper_open - model.gripper_closed)
    tips = np.zeros((3, 3))
    finger_len = 0.04
    for i, ang in enumerate([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0]):
        radial = np.array([np.cos(ang), np.sin(ang), 0.0])
        tips[i] = finger_len * np.sin(angle) * radial + vec3(0, 0, -finger_len * np.cos(angle))
    return tips
