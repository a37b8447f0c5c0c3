"""Scenario configuration: YAML key/value tree with full defaults.

Every key has a documented default (see scenarios/reference.yaml); unknown
keys are rejected and out-of-range values report their dotted field path.
A fixed seed makes a run bit-deterministic.
"""

import math
from types import SimpleNamespace

import numpy as np
import yaml


class ScenarioError(ValueError):
    """Raised for unparsable or out-of-range scenario files."""


def _positive(path, v):
    if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
        raise ScenarioError(f"{path}: must be a finite number > 0, got {v!r}")
    return float(v)


def _nonnegative(path, v):
    if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
        raise ScenarioError(f"{path}: must be a finite number >= 0, got {v!r}")
    return float(v)


def _number(path, v):
    if not (isinstance(v, (int, float)) and math.isfinite(v)):
        raise ScenarioError(f"{path}: must be a finite number, got {v!r}")
    return float(v)


def _pos_int(path, v):
    if not (isinstance(v, int) and v > 0):
        raise ScenarioError(f"{path}: must be an integer > 0, got {v!r}")
    return v


def _any_int(path, v):
    if not isinstance(v, int):
        raise ScenarioError(f"{path}: must be an integer, got {v!r}")
    return v


def _boolean(path, v):
    if not isinstance(v, bool):
        raise ScenarioError(f"{path}: must be true/false, got {v!r}")
    return v


def _string(path, v):
    if not isinstance(v, str):
        raise ScenarioError(f"{path}: must be a string, got {v!r}")
    return v


def _vec(n, check=_number):
    def validate(path, v):
        if not isinstance(v, (list, tuple)) or len(v) != n:
            raise ScenarioError(f"{path}: must be a list of {n} numbers, got {v!r}")
        return [check(f"{path}[{i}]", x) for i, x in enumerate(v)]
    return validate


def _unit_interval_open(path, v):
    v = _nonnegative(path, v)
    if v >= 1.0:
        raise ScenarioError(f"{path}: must lie in [0, 1), got {v!r}")
    return v


def _fraction(path, v):
    v = _nonnegative(path, v)
    if v > 1.0:
        raise ScenarioError(f"{path}: must lie in [0, 1], got {v!r}")
    return v


def _choice(*options):
    def validate(path, v):
        if v not in options:
            raise ScenarioError(f"{path}: must be one of {options}, got {v!r}")
        return v
    return validate


# (default, validator) leaves; nested dicts are sub-sections.
_SCHEMA = {
    "name": ("scenario", _string),
    "seed": (0, _any_int),
    "dt": (0.004, _positive),
    "substeps": (2, _pos_int),
    "duration": (5.0, _positive),
    "gravity": (9.81, _positive),
    "episode_length": (1000, _pos_int),
    "robot": {
        "mass": (1.5, _positive),
        "inertia": ([0.02, 0.02, 0.035], _vec(3, _positive)),
        "hull": ([0.10, 0.10, 0.04], _vec(3, _positive)),
        "start": ([0.0, 0.0, 1.5], _vec(3)),
        "rotor_arm": (0.15, _positive),
        "k_t": (1.0e-5, _positive),
        "k_r": (1.6e-7, _positive),
        "max_rotor_speed": (1100.0, _positive),
        "thrust_factor_air": (1.0, _nonnegative),
        "thrust_factor_water": (0.0, _nonnegative),
        "drag_c": ([0.3, 0.3, 0.35], _vec(3, _unit_interval_open)),
    },
    "arm": {
        "link_lengths": ([0.12, 0.12, 0.08], _vec(3, _positive)),
        "link_masses": ([0.08, 0.08, 0.05], _vec(3, _positive)),
        "joint_lo": ([-3.1, -2.0, -2.4], _vec(3)),
        "joint_hi": ([3.1, 2.0, 2.4], _vec(3)),
        "mount": ([0.0, 0.0, -0.04], _vec(3)),
        "kp": ([3.0, 3.0, 1.5], _vec(3, _nonnegative)),
        "kd": ([0.08, 0.08, 0.04], _vec(3, _nonnegative)),
        "joint_inertia": (0.002, _positive),
        "gripper_kp": (0.4, _nonnegative),
        "gripper_stall_torque": (0.3, _positive),
    },
    "gains": {
        "vel_kp": ([3.0, 3.0, 6.0], _vec(3, _nonnegative)),
        "vel_kd": ([0.08, 0.08, 0.1], _vec(3, _nonnegative)),
        "vel_ki": ([0.004, 0.004, 0.01], _vec(3, _nonnegative)),
        "integral_clamp": (8.0, _positive),
        "att_kp": (0.9, _nonnegative),
        "att_kd": (0.18, _nonnegative),
        "pos_kp": (1.2, _nonnegative),
        "max_tilt": (0.5, _positive),
    },
    "fluid": {
        "enabled": (True, _boolean),
        "rest_density": (1000.0, _positive),
        "spacing": (0.035, _positive),
        "h_factor": (2.0, _positive),
        "iterations": (4, _pos_int),
        "relaxation": (1.0e-5, _positive),
        "boundary_mass_weight": (1.0, _positive),
        "cohesion": (0.0, _nonnegative),
        "xsph": (0.2, _nonnegative),
    },
    "tank": {
        "extent": ([2.0, 1.0, 0.8], _vec(3, _positive)),
        "fill": (0.5, _nonnegative),
        "center": ([0.0, 0.0], _vec(2)),
    },
    "wavemaker": {
        "enabled": (False, _boolean),
        "amplitude": (0.1, _nonnegative),
        "frequency": (1.0, _positive),
    },
    "task": {
        "type": ("none", _choice("none", "splashdown", "hover", "oval",
                                 "capture", "reach")),
        "drop_height": (1.5, _nonnegative),
        "hover_height": (1.2, _positive),
        "arm_sweep_amplitude": (1.1, _nonnegative),
        "arm_sweep_period": (6.0, _positive),
        "cog_update": (True, _boolean),
        "oval_a": (1.0, _positive),
        "oval_b": (0.5, _positive),
        "oval_period": (40.0, _positive),
        "spawn_radius": (0.8, _positive),
        "settle_time": (1.2, _nonnegative),
    },
    "sensors": {
        "imu_rate": (50.0, _positive),
        "imu_noise": (0.0, _nonnegative),
        "contact_threshold": (0.1, _positive),
    },
    "env": {
        "velocity_limit": (2.0, _positive),
        "velocity_penalty_threshold": (2.0, _positive),
        "success_distance": (0.01, _positive),
        "grace_window": (50, _pos_int),
        "height_offset": (0.05, _nonnegative),
        "action_includes_arm": (False, _boolean),
    },
    "fauna": {
        "enabled": (False, _boolean),
        "position": ([0.3, 0.0], _vec(2)),
        "gait_amplitude": (0.35, _nonnegative),
        "gait_period": (2.0, _positive),
        "stiffness": (6.0, _nonnegative),
        "damping": (0.4, _nonnegative),
    },
    "logging": {
        "verbose": (False, _boolean),
        "particle_dump": (False, _boolean),
        "particle_dump_every": (10, _pos_int),
    },
}


class ConfigNode(SimpleNamespace):
    def as_dict(self) -> dict:
        out = {}
        for k, v in vars(self).items():
            out[k] = v.as_dict() if isinstance(v, ConfigNode) else v
        return out


def _build(schema: dict, data: dict, prefix: str) -> ConfigNode:
    node = ConfigNode()
    for key in data:
        if key not in schema:
            path = f"{prefix}{key}"
            raise ScenarioError(f"{path}: unknown key")
    for key, entry in schema.items():
        path = f"{prefix}{key}"
        if isinstance(entry, dict):
            sub = data.get(key, {})
            if sub is None:
                sub = {}
            if not isinstance(sub, dict):
                raise ScenarioError(f"{path}: must be a mapping")
            setattr(node, key, _build(entry, sub, path + "."))
        else:
            default, validate = entry
            value = data.get(key, default)
            setattr(node, key, validate(path, value))
    return node


def scenario_from_dict(data: dict) -> ConfigNode:
    """Validate a raw mapping against the schema, filling all defaults."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError("scenario root must be a mapping")
    cfg = _build(_SCHEMA, data, "")
    _cross_checks(cfg)
    return cfg


def _cross_checks(cfg: ConfigNode):
    if cfg.fluid.h_factor <= 1.0:
        raise ScenarioError("fluid.h_factor: smoothing length must exceed particle "
                            f"spacing (h_factor > 1), got {cfg.fluid.h_factor}")
    if cfg.tank.fill > cfg.tank.extent[2]:
        raise ScenarioError("tank.fill: water depth exceeds tank.extent[2]")
    for i in range(3):
        if cfg.arm.joint_lo[i] >= cfg.arm.joint_hi[i]:
            raise ScenarioError(f"arm.joint_lo[{i}]: must be < arm.joint_hi[{i}]")


def load_scenario(path) -> ConfigNode:
    """Load and validate a scenario file, returning a fully-populated config."""
    with open(path, "r") as fh:
        text = fh.read()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f" (line {mark.line + 1})" if mark is not None else ""
        raise ScenarioError(f"{path}: parse error{line}: {exc}") from exc
    return scenario_from_dict(data)


def default_scenario() -> ConfigNode:
    return scenario_from_dict({})


def make_rng(cfg: ConfigNode) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(cfg.seed))
