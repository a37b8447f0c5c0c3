"""Reference trajectories with exact analytic derivatives."""

from dataclasses import dataclass

import numpy as np


@dataclass
class TrajectorySample:
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray


class ReferenceTrajectory:
    def sample(self, t: float) -> TrajectorySample:
        raise NotImplementedError

    def check_derivatives(self, ts, eps: float = 1e-6, tol: float = 1e-6) -> bool:
        """Finite-difference audit of the analytic derivatives."""
        for t in ts:
            s = self.sample(t)
            p_plus = self.sample(t + eps).position
            p_minus = self.sample(t - eps).position
            v_fd = (p_plus - p_minus) / (2 * eps)
            if np.any(np.abs(v_fd - s.velocity) > tol * max(1.0, np.abs(s.velocity).max())):
                return False
            v_plus = self.sample(t + eps).velocity
            v_minus = self.sample(t - eps).velocity
            a_fd = (v_plus - v_minus) / (2 * eps)
            if np.any(np.abs(a_fd - s.acceleration) > tol * max(1.0, np.abs(s.acceleration).max())):
                return False
        return True


class HoldTrajectory(ReferenceTrajectory):
    """Constant setpoint (hover)."""

    def __init__(self, position):
        self.position = np.asarray(position, dtype=np.float64)

    def sample(self, t: float) -> TrajectorySample:
        return TrajectorySample(self.position.copy(), np.zeros(3), np.zeros(3))


class OvalTrajectory(ReferenceTrajectory):
    """Vertical-plane (x-z) oval centered at the water surface, so each lap
    crosses air->water and water->air once. Starts at the top (in air)."""

    def __init__(self, center, a: float, b: float, period: float):
        self.center = np.asarray(center, dtype=np.float64)
        self.a = float(a)
        self.b = float(b)
        self.period = float(period)

    def sample(self, t: float) -> TrajectorySample:
        w = 2.0 * np.pi / self.period
        ph = w * t + np.pi / 2.0
        pos = self.center + np.array([self.a * np.cos(ph), 0.0,
                                      self.b * np.sin(ph)])
        vel = np.array([-self.a * w * np.sin(ph), 0.0, self.b * w * np.cos(ph)])
        acc = np.array([-self.a * w * w * np.cos(ph), 0.0,
                        -self.b * w * w * np.sin(ph)])
        return TrajectorySample(pos, vel, acc)

    def surface_crossing_times(self) -> list:
        """Times within one period at which the loop crosses z = center z."""
        # sin(w t + pi/2) = 0  =>  w t = pi/2 + k pi
        w = 2.0 * np.pi / self.period
        return [(np.pi / 2.0) / w, (3.0 * np.pi / 2.0) / w]
