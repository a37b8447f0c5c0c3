"""Velocity PID, joint PD, attitude stabilizer, and the per-step control pipeline.

The velocity loop computes a desired 3-axis force with gravity and
reference-acceleration feedforward:

    F = K_p E_p + K_d E_d + K_i E_i + [0, 0, m g] + m a_ref

with E_p = v_ref - v (stabilizing sign), E_d = a_ref - (v - v_prev)/dt and
E_i the clamped running sum of E_p. The force direction defines a tilt
setpoint; a quaternion-error PD supplies body torques for the allocator
(the hovering wrench needs attitude torques that the force law alone does
not provide).
"""

from dataclasses import dataclass, field

import numpy as np

from .arm import ArmModel, ArmState, system_cog
from .math3d import (quat_conjugate, quat_from_axis_angle, quat_from_two_vectors,
                     quat_multiply, quat_rotate, quat_rotate_inv, quat_to_rotvec, vec3)
from .vehicle import AllocationError, RotorLayout, allocate, build_allocation


@dataclass
class PidGains:
    kp: np.ndarray
    kd: np.ndarray
    ki: np.ndarray
    integral_clamp: float = 8.0

    def __post_init__(self):
        self.kp = np.asarray(self.kp, dtype=np.float64)
        self.kd = np.asarray(self.kd, dtype=np.float64)
        self.ki = np.asarray(self.ki, dtype=np.float64)


@dataclass
class PidState:
    e_integral: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v_prev: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def copy(self) -> "PidState":
        return PidState(self.e_integral.copy(), self.v_prev.copy())


def pid_force(gains: PidGains, state: PidState, v, v_ref, a_ref,
              mass: float, g: float, dt: float):
    """One velocity-PID evaluation; returns (force N, updated PidState)."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    v = np.asarray(v, dtype=np.float64)
    v_ref = np.asarray(v_ref, dtype=np.float64)
    a_ref = np.asarray(a_ref, dtype=np.float64)
    e_p = v_ref - v
    e_d = a_ref - (v - state.v_prev) / dt
    new = state.copy()
    new.e_integral = np.clip(state.e_integral + e_p,
                             -gains.integral_clamp, gains.integral_clamp)
    new.v_prev = v.copy()
    force = (gains.kp * e_p + gains.kd * e_d + gains.ki * new.e_integral
             + vec3(0.0, 0.0, mass * g) + mass * a_ref)
    return force, new


@dataclass
class PdGains:
    kp: np.ndarray
    kd: np.ndarray

    def __post_init__(self):
        self.kp = np.asarray(self.kp, dtype=np.float64)
        self.kd = np.asarray(self.kd, dtype=np.float64)
        if np.any(self.kp < 0) or np.any(self.kd < 0):
            raise ValueError("PD gains must be >= 0")


def pd_joint_force(gains: PdGains, x, x_ref, x_prev, dt: float) -> np.ndarray:
    """Joint torques K_p (x_ref - x) - K_d (x - x_prev)/dt (derivative damps)."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    x = np.asarray(x, dtype=np.float64)
    return gains.kp * (np.asarray(x_ref) - x) - gains.kd * (x - np.asarray(x_prev)) / dt


@dataclass
class AttitudeGains:
    kp: float = 0.9
    kd: float = 0.18
    max_tilt: float = 0.5  # rad


def attitude_setpoint(force_des: np.ndarray, yaw: float, max_tilt: float) -> np.ndarray:
    """Quaternion whose body +Z aligns with the desired force direction,
    tilt clamped, yaw held."""
    f = np.asarray(force_des, dtype=np.float64)
    norm = np.linalg.norm(f)
    if norm < 1e-9 or f[2] <= 0.0:
        return quat_from_axis_angle(vec3(0, 0, 1), yaw)
    z_des = f / norm
    tilt = np.arccos(np.clip(z_des[2], -1.0, 1.0))
    if tilt > max_tilt:
        # pull the setpoint toward vertical, keeping the tilt plane
        axis = np.cross(vec3(0, 0, 1), z_des)
        n = np.linalg.norm(axis)
        if n < 1e-12:
            return quat_from_axis_angle(vec3(0, 0, 1), yaw)
        z_des = quat_rotate(quat_from_axis_angle(axis / n, max_tilt), vec3(0, 0, 1))
    q_tilt = quat_from_two_vectors(vec3(0, 0, 1), z_des)
    return quat_multiply(q_tilt, quat_from_axis_angle(vec3(0, 0, 1), yaw))


def attitude_torque(gains: AttitudeGains, q, q_des, omega_body) -> np.ndarray:
    """Quaternion-error PD: torque = kp * rotvec(q^-1 q_des) - kd * omega."""
    q_err = quat_multiply(quat_conjugate(q), q_des)
    e_rot = quat_to_rotvec(q_err)  # body frame
    return gains.kp * e_rot - gains.kd * np.asarray(omega_body)


@dataclass
class ControllerCommand:
    v_ref: np.ndarray = field(default_factory=lambda: np.zeros(3))
    a_ref: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q_ref: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gripper: str = "hold"          # open | close | hold
    yaw_ref: float = 0.0


@dataclass
class ControllerOutput:
    rotor_speeds: np.ndarray
    joint_torques: np.ndarray
    finger_setpoint: float
    force_des: np.ndarray
    torque_des: np.ndarray
    cog: np.ndarray
    allocation_warning: bool = False


class Controller:
    """Command -> actuator pipeline, stepped once per physics step."""

    def __init__(self, layout: RotorLayout, arm_model: ArmModel, cfg,
                 total_mass: float, g: float = 9.81):
        gains = cfg.gains
        self.layout = layout
        self.arm_model = arm_model
        self.pid_gains = PidGains(gains.vel_kp, gains.vel_kd, gains.vel_ki,
                                  gains.integral_clamp)
        self.pd_gains = PdGains(cfg.arm.kp, cfg.arm.kd)
        self.att_gains = AttitudeGains(gains.att_kp, gains.att_kd, gains.max_tilt)
        self.total_mass = total_mass
        self.g = g
        self.cog_update = True
        self.pid_state = PidState()
        self._last_speeds = np.zeros(4)
        self._finger_setpoint = 1.0

    def reset(self):
        self.pid_state = PidState()
        self._last_speeds = np.zeros(4)
        self._finger_setpoint = 1.0

    def step(self, cmd: ControllerCommand, body, arm: ArmState,
             dt: float) -> ControllerOutput:
        force, self.pid_state = pid_force(
            self.pid_gains, self.pid_state, body.velocity, cmd.v_ref, cmd.a_ref,
            self.total_mass, self.g, dt)

        q_des = attitude_setpoint(force, cmd.yaw_ref, self.att_gains.max_tilt)
        tau = attitude_torque(self.att_gains, body.orientation, q_des, body.omega)

        # thrust magnitude: desired force projected on the current body z axis
        z_body = quat_rotate(body.orientation, vec3(0, 0, 1))
        thrust = max(float(force @ z_body), 0.0)

        cog3 = system_cog(self.total_mass - self.arm_model.link_masses.sum(),
                          self.arm_model, arm.q)
        cog_xy = cog3[:2] if self.cog_update else np.zeros(2)

        warning = False
        try:
            alloc = build_allocation(self.layout, cog_xy)
            speeds = allocate(alloc, [thrust, tau[0], tau[1], tau[2]],
                              self.layout.max_speed)
            self._last_speeds = speeds
        except AllocationError:
            speeds = self._last_speeds  # hold last command
            warning = True

        joint_tau = pd_joint_force(self.pd_gains, arm.q, cmd.q_ref, arm.q_prev, dt)

        if cmd.gripper == "open":
            self._finger_setpoint = 1.0
        elif cmd.gripper == "close":
            self._finger_setpoint = 0.0

        return ControllerOutput(speeds, joint_tau, self._finger_setpoint,
                                force, tau, cog3, warning)
