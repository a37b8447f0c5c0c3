"""Demonstration files: one JSON header line, then one JSON line per
transition. Round-trip lossless; versioned."""

import json
from dataclasses import dataclass, field

import numpy as np

DEMO_FORMAT = "seals-demo"
DEMO_VERSION = 1


class DemoFormatError(ValueError):
    pass


@dataclass
class EnvTransition:
    observation: np.ndarray
    action: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "obs": [float(x) for x in self.observation],
            "action": [float(x) for x in self.action],
            "reward": float(self.reward),
            "done": bool(self.done),
            "info": self.info,
        })

    @staticmethod
    def from_json(line: str) -> "EnvTransition":
        d = json.loads(line)
        return EnvTransition(np.array(d["obs"]), np.array(d["action"]),
                             float(d["reward"]), bool(d["done"]),
                             dict(d.get("info", {})))


def write_demo(path, transitions, scenario, seed: int, dt: float,
               scenario_config: dict | None = None):
    header = {"format": DEMO_FORMAT, "version": DEMO_VERSION,
              "scenario": scenario, "seed": int(seed), "dt": float(dt)}
    if scenario_config is not None:
        header["config"] = scenario_config
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for tr in transitions:
            fh.write(tr.to_json() + "\n")


def read_demo(path):
    """Returns (header dict, list of EnvTransition)."""
    with open(path, "r") as fh:
        header_line = fh.readline()
        if not header_line:
            raise DemoFormatError(f"{path}: empty demo file")
        header = json.loads(header_line)
        if header.get("format") != DEMO_FORMAT:
            raise DemoFormatError(f"{path}: not a {DEMO_FORMAT} file")
        if header.get("version") != DEMO_VERSION:
            raise DemoFormatError(
                f"{path}: demo version {header.get('version')} unsupported "
                f"(expected {DEMO_VERSION})")
        transitions = [EnvTransition.from_json(line)
                       for line in fh if line.strip()]
    return header, transitions


class DemoRecorder:
    def __init__(self, path, scenario, seed, dt, scenario_config=None):
        self.path = path
        self.transitions: list[EnvTransition] = []
        self.scenario = scenario
        self.seed = seed
        self.dt = dt
        self.scenario_config = scenario_config

    def record(self, transition: EnvTransition):
        self.transitions.append(transition)

    def close(self):
        write_demo(self.path, self.transitions, self.scenario, self.seed,
                   self.dt, self.scenario_config)
        return len(self.transitions)
