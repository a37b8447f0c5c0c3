"""seals: cross-medium robot dynamics simulator for an aerial-aquatic
manipulator (quadrotor + 3-DoF arm + 3-finger gripper).

Particle-based hydrodynamics (position-based dynamics), CoG-adaptive
control allocation, scenario experiments, and a network stepping protocol
for external learning agents.
"""

__version__ = "0.1.0"
