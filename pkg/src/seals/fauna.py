"""Articulated aquatic animals: a crab (8 two-joint legs + 2 claw joints,
18 DoF total) with per-joint position controllers and a scripted
sideways-walking gait; the capture-task target.

Legs are kinematic chains on a 6-DoF base body; locomotion arises from
foot-ground friction. Joint targets come either from the built-in gait or
from external commands (same controller path either way).
"""

from dataclasses import dataclass, field

import numpy as np

from .math3d import quat_rotate, vec3
from .rigidbody import RigidBodyState

N_LEGS = 8
N_JOINTS = 18     # 8 legs x 2 + 2 claw joints


def joint_force(k_d: float, k_s: float, v_d: float, current_v: float,
                p_d: float, current_p: float) -> float:
    """Position-based joint controller: F = K_d (V_d - V) + K_s (P_d - P)."""
    return k_d * (v_d - current_v) + k_s * (p_d - current_p)


@dataclass
class AnimalModel:
    body_extent: np.ndarray = field(default_factory=lambda: np.array([0.12, 0.10, 0.04]))
    body_mass: float = 0.3
    coxa_length: float = 0.06
    tibia_length: float = 0.05
    stiffness: float = 6.0       # K_s per joint
    damping: float = 0.4         # K_d per joint
    joint_inertia: float = 2e-4
    joint_lo: float = -1.2
    joint_hi: float = 1.2
    gait_amplitude: float = 0.35
    gait_lift: float = 0.35
    gait_period: float = 2.0

    def __post_init__(self):
        self.body_extent = np.asarray(self.body_extent, dtype=np.float64)
        # hips along both long sides, legs pointing outward (+/- y)
        xs = np.linspace(-0.4, 0.4, 4) * self.body_extent[0] * 2.0
        hips = []
        for side in (1.0, -1.0):
            for x in xs:
                hips.append([x, side * self.body_extent[1] / 2, 0.0])
        self.hip_positions = np.array(hips)
        self.hip_sides = np.array([1.0] * 4 + [-1.0] * 4)
        # tripod-style alternation along each side
        self.phase_offsets = np.array([0.0, np.pi, 0.0, np.pi,
                                       np.pi, 0.0, np.pi, 0.0])

    @staticmethod
    def from_config(fauna_cfg) -> "AnimalModel":
        return AnimalModel(stiffness=fauna_cfg.stiffness, damping=fauna_cfg.damping,
                           gait_amplitude=fauna_cfg.gait_amplitude,
                           gait_period=fauna_cfg.gait_period)


def step_gait(model: AnimalModel, t: float) -> np.ndarray:
    """Joint targets for time t: 16 leg joints (swing, lift per leg) + 2 claws.

    Per leg: swing = A sin(phi), lift = A_lift max(0, cos(phi)), so the foot
    lifts while swinging forward and drags on the ground while sweeping back.
    A half-period ramp starts the gait from the neutral stance (all zeros)
    without joint snap.
    """
    targets = np.zeros(N_JOINTS)
    if t < 0.0:
        return targets
    w = 2.0 * np.pi / model.gait_period
    ramp = min(1.0, t / (0.5 * model.gait_period))
    for leg in range(N_LEGS):
        phi = w * t + model.phase_offsets[leg]
        targets[2 * leg] = ramp * model.gait_amplitude * np.sin(phi)
        targets[2 * leg + 1] = ramp * model.gait_lift * max(0.0, np.cos(phi))
    targets[16] = ramp * 0.2 * np.sin(w * t)   # claws wave slowly
    targets[17] = ramp * 0.2 * np.sin(w * t + np.pi)
    return np.clip(targets, model.joint_lo, model.joint_hi)


def foot_positions_local(model: AnimalModel, q: np.ndarray) -> np.ndarray:
    """Foot points in the crab body frame for leg joints q (16 entries used)."""
    feet = np.zeros((N_LEGS, 3))
    for leg in range(N_LEGS):
        swing = q[2 * leg]
        lift = q[2 * leg + 1]
        hip = model.hip_positions[leg]
        # swing mirrors with the side so stance sweeps on both sides move the
        # same world direction (otherwise left/right propulsion cancels)
        az = model.hip_sides[leg] * (np.pi / 2 + swing)
        d = np.array([np.cos(az) * np.cos(lift), np.sin(az) * np.cos(lift),
                      np.sin(lift)])
        feet[leg] = hip + model.coxa_length * d + vec3(0, 0, -model.tibia_length)
    return feet


class Crab:
    """Crab instance: base rigid body + 18 articulated joints."""

    def __init__(self, model: AnimalModel, position, g: float = 9.81):
        self.model = model
        inertia = np.diag(model.body_mass / 12.0 * np.array([
            model.body_extent[1] ** 2 + model.body_extent[2] ** 2,
            model.body_extent[0] ** 2 + model.body_extent[2] ** 2,
            model.body_extent[0] ** 2 + model.body_extent[1] ** 2]))
        self.body = RigidBodyState(position=np.asarray(position, dtype=np.float64),
                                   mass=model.body_mass, inertia=inertia,
                                   name="crab")
        self.q = np.zeros(N_JOINTS)
        self.qdot = np.zeros(N_JOINTS)
        self.g = g
        self.external_targets = None   # env-commanded joint targets when set

    def joint_targets(self, t: float) -> np.ndarray:
        if self.external_targets is not None:
            return np.clip(self.external_targets, self.model.joint_lo,
                           self.model.joint_hi)
        return step_gait(self.model, t)

    def step_joints(self, targets: np.ndarray, dt: float):
        # damping handled implicitly (evaluated at the updated velocity):
        # the explicit form K_d/I * dt can exceed the stability bound for
        # stiff, light joints
        m = self.model
        stiff = m.stiffness * (targets - self.q) / m.joint_inertia
        self.qdot = (self.qdot + stiff * dt) / (1.0 + m.damping / m.joint_inertia * dt)
        self.q = np.clip(self.q + self.qdot * dt, m.joint_lo, m.joint_hi)

    def feet_world(self) -> np.ndarray:
        local = foot_positions_local(self.model, self.q)
        return np.array([self.body.position + quat_rotate(self.body.orientation, p)
                         for p in local])

    def foot_velocities_world(self, feet_w: np.ndarray, dt: float,
                              prev_feet: np.ndarray) -> np.ndarray:
        return (feet_w - prev_feet) / dt
