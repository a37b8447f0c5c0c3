"""Quadrotor rotor model and CoG-adaptive control allocation.

The 4x4 allocation matrix maps squared rotor speeds to
[total thrust, tau_x, tau_y, tau_z] and is rebuilt every control step
around the current center of gravity, so arm motion is compensated at
the mixer rather than fought by the attitude loop.
"""

from dataclasses import dataclass, field

import numpy as np


class AllocationError(RuntimeError):
    pass


@dataclass
class RotorLayout:
    """Four rotors: body-frame xy positions, coefficients, spin directions."""

    positions: np.ndarray          # (4, 2) x,y in body frame, m
    k_t: np.ndarray                # thrust coeff, N/(rad/s)^2
    k_r: np.ndarray                # rolling-moment coeff, N m/(rad/s)^2
    spin: np.ndarray               # +1 CCW / -1 CW, two of each
    max_speed: float = 1100.0      # rad/s

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(4, 2)
        self.k_t = np.asarray(self.k_t, dtype=np.float64).reshape(4)
        self.k_r = np.asarray(self.k_r, dtype=np.float64).reshape(4)
        self.spin = np.asarray(self.spin, dtype=np.float64).reshape(4)
        if np.any(self.k_t <= 0) or np.any(self.k_r <= 0):
            raise ValueError("rotor coefficients must be > 0")
        if sorted(self.spin.tolist()) != [-1.0, -1.0, 1.0, 1.0]:
            raise ValueError("spin directions must be two +1 and two -1")

    @staticmethod
    def symmetric_x(arm: float, k_t: float, k_r: float,
                    max_speed: float = 1100.0) -> "RotorLayout":
        """Standard X quad: front-left, rear-left, rear-right, front-right."""
        a = arm / np.sqrt(2.0)
        pos = np.array([[a, a], [-a, a], [-a, -a], [a, -a]])
        spin = np.array([1.0, -1.0, 1.0, -1.0])
        return RotorLayout(pos, np.full(4, k_t), np.full(4, k_r), spin, max_speed)

    @staticmethod
    def from_config(robot_cfg) -> "RotorLayout":
        return RotorLayout.symmetric_x(robot_cfg.rotor_arm, robot_cfg.k_t,
                                       robot_cfg.k_r, robot_cfg.max_rotor_speed)


@dataclass
class AllocationMatrix:
    matrix: np.ndarray             # 4x4
    cog: np.ndarray                # (x, y) used to build it
    condition_number: float
    cog_outside_hull: bool = False


def _cog_in_hull(positions: np.ndarray, cog: np.ndarray) -> bool:
    """Point-in-convex-polygon test on the rotor quadrilateral."""
    center = positions.mean(axis=0)
    order = np.argsort(np.arctan2(positions[:, 1] - center[1],
                                  positions[:, 0] - center[0]))
    poly = positions[order]
    sign = 0.0
    for i in range(4):
        a, b = poly[i], poly[(i + 1) % 4]
        cross = (b[0] - a[0]) * (cog[1] - a[1]) - (b[1] - a[1]) * (cog[0] - a[0])
        if cross != 0.0:
            if sign != 0.0 and np.sign(cross) != sign:
                return False
            sign = np.sign(cross)
    return True


def build_allocation(layout: RotorLayout, cog) -> AllocationMatrix:
    """Mixer rows: [k_Ti], [(y_i - y_cog) k_Ti], [-(x_i - x_cog) k_Ti], [k_Ri d_i]."""
    cog = np.asarray(cog, dtype=np.float64).reshape(2)
    if not np.all(np.isfinite(cog)):
        raise ValueError("CoG must be finite")
    x, y = layout.positions[:, 0], layout.positions[:, 1]
    a = np.vstack([
        layout.k_t,
        (y - cog[1]) * layout.k_t,
        -(x - cog[0]) * layout.k_t,
        layout.k_r * layout.spin,
    ])
    return AllocationMatrix(a, cog, float(np.linalg.cond(a)),
                            cog_outside_hull=not _cog_in_hull(layout.positions, cog))


def allocate(alloc: AllocationMatrix, wrench, max_speed: float) -> np.ndarray:
    """Invert the mixer for a [F, tau_x, tau_y, tau_z] wrench -> rotor speeds.

    Negative squared speeds clamp to zero; if any squared speed exceeds the
    max it is scaled down uniformly before the square root.
    """
    wrench = np.asarray(wrench, dtype=np.float64).reshape(4)
    try:
        w2 = np.linalg.solve(alloc.matrix, wrench)
    except np.linalg.LinAlgError as exc:
        raise AllocationError(f"allocation matrix singular (cog={alloc.cog})") from exc
    w2 = np.maximum(w2, 0.0)
    max_w2 = max_speed * max_speed
    peak = w2.max()
    if peak > max_w2:
        w2 *= max_w2 / peak
    return np.sqrt(w2)


def rotor_forces(speeds, layout: RotorLayout, medium_factor: float = 1.0):
    """Per-rotor thrust (N, body +Z) and yaw moments (N m) for given speeds.

    medium_factor scales thrust and yaw drag; 0 models thrusters disabled
    (e.g. underwater for the drop scenarios).
    """
    speeds = np.asarray(speeds, dtype=np.float64).reshape(4)
    if np.any(speeds < 0):
        raise ValueError("rotor speeds must be >= 0")
    w2 = speeds * speeds
    thrust = layout.k_t * w2 * medium_factor
    yaw = layout.k_r * layout.spin * w2 * medium_factor
    return thrust, yaw


def wrench_from_speeds(speeds, layout: RotorLayout, cog,
                       medium_factor: float = 1.0) -> np.ndarray:
    """Independent wrench bookkeeping: thrust sum plus per-rotor moments about
    the CoG, for checking A @ w^2 without using the matrix."""
    thrust, yaw = rotor_forces(speeds, layout, medium_factor)
    cog = np.asarray(cog, dtype=np.float64).reshape(2)
    total = thrust.sum()
    tau = np.zeros(3)
    for i in range(4):
        r = np.array([layout.positions[i, 0] - cog[0],
                      layout.positions[i, 1] - cog[1], 0.0])
        tau += np.cross(r, np.array([0.0, 0.0, thrust[i]]))
    tau[2] += yaw.sum()
    return np.array([total, tau[0], tau[1], tau[2]])
