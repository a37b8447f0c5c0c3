"""IMU and fingertip contact sensing.

Two acceleration channels are kept: the kinematic world acceleration
(v_t - v_{t-dt})/dt used for the drop-test comparisons, and the specific
force (kinematic minus gravity, body frame) a real IMU would report.
"""

from dataclasses import dataclass, field

import numpy as np

from .math3d import quat_rotate_inv


@dataclass
class ImuSample:
    t: float
    specific_force: np.ndarray    # m/s^2, body frame
    angular_rate: np.ndarray      # rad/s, body frame
    accel_world: np.ndarray       # kinematic, world frame


@dataclass
class ContactEvent:
    finger_id: int
    force: float
    body: str
    t: float


class Imu:
    """Fixed-rate IMU decimated off the physics clock (default 50 Hz)."""

    def __init__(self, rate_hz: float, dt: float, g: float = 9.81,
                 noise_std: float = 0.0, seed: int = 0):
        if rate_hz <= 0:
            raise ValueError("imu rate must be > 0")
        self.decimation = max(1, int(round(1.0 / (rate_hz * dt))))
        self.dt = dt
        self.g_vec = np.array([0.0, 0.0, -g])
        self.noise_std = noise_std
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.samples: list[ImuSample] = []

    def due(self, step_index: int) -> bool:
        return step_index % self.decimation == 0

    def sample(self, t: float, body, v_prev: np.ndarray) -> ImuSample:
        accel_world = (body.velocity - v_prev) / self.dt
        specific = quat_rotate_inv(body.orientation, accel_world - self.g_vec)
        rate = body.omega.copy()
        if self.noise_std > 0.0:
            specific = specific + self.rng.normal(0.0, self.noise_std, 3)
            rate = rate + self.rng.normal(0.0, self.noise_std, 3)
        s = ImuSample(t, specific, rate, accel_world)
        self.samples.append(s)
        return s

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,ax_w,ay_w,az_w,fx_b,fy_b,fz_b,wx,wy,wz\n")
            for s in self.samples:
                row = [s.t, *s.accel_world, *s.specific_force, *s.angular_rate]
                fh.write(",".join(f"{x:.9g}" for x in row) + "\n")


def sample_imu(imu: Imu, t: float, body, v_prev) -> ImuSample:
    return imu.sample(t, body, np.asarray(v_prev, dtype=np.float64))


def poll_contacts(finger_forces, threshold: float, t: float,
                  body_names=None) -> list[ContactEvent]:
    """One event per fingertip whose net contact force reaches the threshold."""
    if threshold <= 0:
        raise ValueError("contact threshold must be > 0")
    events = []
    for i, f in enumerate(finger_forces):
        mag = float(np.linalg.norm(f))
        if mag >= threshold:
            name = body_names[i] if body_names else "environment"
            events.append(ContactEvent(i, mag, name, t))
    return events
