import numpy as np
import pytest

from seals.rigidbody import (IntegrationError, RigidBodyState, SimClock,
                             integrate_rigid_body)


def test_equilibrium_state_unchanged():
    s = RigidBodyState(mass=1.5, inertia=np.diag([0.02, 0.02, 0.035]))
    out = integrate_rigid_body(s, np.zeros(3), np.zeros(3), 0.004)
    assert np.allclose(out.position, s.position)
    assert np.allclose(out.velocity, 0.0)
    assert np.allclose(out.omega, 0.0)
    assert np.allclose(out.orientation, s.orientation)


def test_torque_step_from_rest():
    # direct evaluation: omega' = J^-1 tau * dt with zero gyroscopic term
    s = RigidBodyState(inertia=np.eye(3))
    out = integrate_rigid_body(s, np.zeros(3), np.array([0.1, 0.0, 0.0]), 0.004)
    assert np.allclose(out.omega, [0.0004, 0.0, 0.0], atol=1e-15)


def test_principal_axis_spin_is_steady():
    # brute-force cross product: omega x J omega = 0 on a principal axis
    J = np.diag([1.0, 2.0, 3.0])
    w = np.array([1.0, 0.0, 0.0])
    assert np.allclose(np.cross(w, J @ w), 0.0)
    s = RigidBodyState(omega=w.copy(), inertia=J)
    out = integrate_rigid_body(s, np.zeros(3), np.zeros(3), 0.004)
    assert np.allclose(out.omega, w, atol=1e-14)


def test_energy_conservation_torque_free():
    # tumbling body in vacuum: KE within 0.5% over 10 s at dt = 0.004
    s = RigidBodyState(omega=np.array([3.0, -2.0, 1.0]), mass=1.5,
                       inertia=np.diag([0.01, 0.05, 0.055]))
    e0 = s.kinetic_energy()
    for _ in range(2500):
        s = integrate_rigid_body(s, np.zeros(3), np.zeros(3), 0.004)
    assert abs(s.kinetic_energy() - e0) / e0 < 0.005


def test_nonfinite_force_raises_with_body_name():
    s = RigidBodyState(name="vehicle")
    with pytest.raises(IntegrationError, match="vehicle"):
        integrate_rigid_body(s, np.array([np.nan, 0, 0]), np.zeros(3), 0.004)


def test_invalid_mass_and_inertia_rejected():
    with pytest.raises(ValueError):
        RigidBodyState(mass=0.0)
    with pytest.raises(ValueError):
        RigidBodyState(inertia=np.diag([1.0, 1.0, -1.0]))
    bad = np.eye(3)
    bad[0, 1] = 0.5
    with pytest.raises(ValueError):
        RigidBodyState(inertia=bad)


def test_clock_time_exact():
    clock = SimClock(0.004, substeps=2)
    for _ in range(250):
        clock.tick()
    assert clock.time == 250 * 0.004
    assert clock.sub_dt == 0.002


def test_gravity_fall_velocity():
    s = RigidBodyState(mass=2.0)
    dt = 0.004
    for _ in range(250):
        s = integrate_rigid_body(s, np.array([0, 0, -2.0 * 9.81]), np.zeros(3), dt)
    assert np.isclose(s.velocity[2], -9.81 * 1.0, rtol=1e-12)
