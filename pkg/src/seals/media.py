"""Medium detection and medium-dependent forces.

Air drag is the linear per-axis model F_d = -c * v (coefficients in [0,1)),
faded out by submerged fraction: underwater resistance comes entirely from
particle coupling, not a drag term. Submersion is measured by counting a
body's boundary particles that have enough fluid neighbors.
"""

from dataclasses import dataclass, field

import numpy as np

WET_NEIGHBOR_COUNT = 3       # fluid neighbors within the wet radius mark a sample "wet"
CROSSING_LEVEL = 0.5
CROSSING_HYSTERESIS = 0.1


@dataclass
class DragModel:
    c: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64)
        if np.any(self.c < 0.0) or np.any(self.c >= 1.0):
            raise ValueError("drag coefficients must lie in [0, 1)")


def air_drag(drag: DragModel, v, submerged_fraction: float = 0.0) -> np.ndarray:
    """Dissipative linear drag, scaled by the dry fraction (1 - phi)."""
    v = np.asarray(v, dtype=np.float64)
    phi = float(np.clip(submerged_fraction, 0.0, 1.0))
    return -drag.c * v * (1.0 - phi)


@dataclass
class CouplingResult:
    force: np.ndarray
    torque: np.ndarray           # about the body CoG, world frame
    momentum: np.ndarray         # total impulse delivered this substep


def apply_coupling(impulses: np.ndarray, points: np.ndarray,
                   cog_world: np.ndarray, dt: float) -> CouplingResult:
    """Aggregate per-particle fluid impulses into a body force and torque.

    impulses: (n,3) momentum transfers, points: (n,3) application points.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    impulses = np.asarray(impulses, dtype=np.float64).reshape(-1, 3)
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if impulses.shape[0] == 0:
        z = np.zeros(3)
        return CouplingResult(z, z.copy(), z.copy())
    force = impulses.sum(axis=0) / dt
    torque = np.cross(points - np.asarray(cog_world), impulses).sum(axis=0) / dt
    return CouplingResult(force, torque, impulses.sum(axis=0))


@dataclass
class MediumState:
    submerged_fraction: float = 0.0
    is_submerged: bool = False    # latched at 0.5 with hysteresis
    crossing_events: list = field(default_factory=list)  # (time, "enter"/"exit")

    def update(self, fraction: float, t: float) -> "MediumState":
        fraction = float(np.clip(fraction, 0.0, 1.0))
        events = []
        submerged = self.is_submerged
        if not submerged and fraction > CROSSING_LEVEL + CROSSING_HYSTERESIS / 2:
            submerged = True
            events.append((t, "enter"))
        elif submerged and fraction < CROSSING_LEVEL - CROSSING_HYSTERESIS / 2:
            submerged = False
            events.append((t, "exit"))
        return MediumState(fraction, submerged, events)


def submerged_fraction(wet_counts: np.ndarray) -> float:
    """Fraction of boundary samples with >= WET_NEIGHBOR_COUNT fluid neighbors."""
    wet_counts = np.asarray(wet_counts)
    if wet_counts.size == 0:
        return 0.0
    return float(np.count_nonzero(wet_counts >= WET_NEIGHBOR_COUNT) / wet_counts.size)


def thrust_medium_factor(fraction: float, air_factor: float,
                         water_factor: float) -> float:
    """Blend of the per-medium thrust multipliers by submerged fraction."""
    phi = float(np.clip(fraction, 0.0, 1.0))
    return air_factor * (1.0 - phi) + water_factor * phi
