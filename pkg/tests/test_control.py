import numpy as np

from seals.arm import ArmModel, ArmState
from seals.config import default_scenario
from seals.control import (AttitudeGains, Controller, ControllerCommand, PdGains,
                           PidGains, PidState, attitude_setpoint, attitude_torque,
                           pd_joint_force, pid_force)
from seals.math3d import quat_from_axis_angle, quat_identity, vec3
from seals.rigidbody import RigidBodyState
from seals.vehicle import RotorLayout, wrench_from_speeds


def gains(kp=0.0, kd=0.0, ki=0.0, clamp=40.0):
    return PidGains(np.full(3, kp), np.full(3, kd), np.full(3, ki), clamp)


def test_pure_feedforward_hover_force():
    g = gains()
    v = np.zeros(3)
    f, _ = pid_force(g, PidState(), v, v, np.zeros(3), 1.5, 9.81, 0.004)
    assert np.allclose(f, [0.0, 0.0, 14.715], atol=1e-12)


def test_proportional_term_adds_to_feedforward():
    # term-by-term: E_p = (0.1,0,0), K_p = 2, all other terms zero
    g = gains(kp=2.0)
    f, _ = pid_force(g, PidState(), v=np.zeros(3), v_ref=np.array([0.1, 0, 0]),
                     a_ref=np.zeros(3), mass=1.5, g=9.81, dt=0.004)
    assert np.allclose(f, [0.2, 0.0, 14.715], atol=1e-12)


def test_integral_accumulates_and_clamps():
    # accumulation oracle: constant E_p over k steps -> E_i = k E_p until clamp
    g = gains(ki=1.0, clamp=5.0)
    st = PidState()
    v_ref = np.array([0.5, 0.0, 0.0])
    for k in range(1, 9):
        _, st = pid_force(g, st, np.zeros(3), v_ref, np.zeros(3), 1.0, 9.81, 0.01)
        assert np.allclose(st.e_integral, [min(0.5 * k, 5.0), 0.0, 0.0])
    for _ in range(2500):  # 10 s of saturated error stays clamped
        _, st = pid_force(g, st, np.zeros(3), v_ref, np.zeros(3), 1.0, 9.81, 0.004)
        assert np.all(np.abs(st.e_integral) <= 5.0)


def test_gravity_feedforward_exact_at_tracking():
    g = gains(kp=3.0, kd=0.1, ki=0.02)
    st = PidState(v_prev=np.array([0.0, 0.0, 0.2]))
    a_ref = np.array([0.0, 0.0, 50.0])
    # v - v_prev over dt equals a_ref: derivative error zero, E_p zero
    v = st.v_prev + a_ref * 0.004
    f, _ = pid_force(g, st, v, v, a_ref, 1.5, 9.81, 0.004)
    assert abs(f[2] - (1.5 * 9.81 + 1.5 * 50.0)) < 1e-12


def test_pd_zero_at_setpoint():
    pd = PdGains(np.full(3, 2.0), np.full(3, 0.5))
    x = np.array([0.3, -0.2, 0.1])
    assert np.allclose(pd_joint_force(pd, x, x, x, 0.004), 0.0)


def test_pd_proportional_arithmetic():
    pd = PdGains(np.full(3, 2.0), np.zeros(3))
    f = pd_joint_force(pd, np.zeros(3), np.array([0.2, 0, 0]), np.zeros(3), 0.004)
    assert np.allclose(f, [0.4, 0.0, 0.0])


def test_pd_derivative_opposes_motion_toward_setpoint():
    pd = PdGains(np.zeros(3), np.full(3, 1.0))
    # joint moving toward a setpoint above it: damping must be negative
    f = pd_joint_force(pd, x=np.array([0.1, 0, 0]), x_ref=np.array([0.5, 0, 0]),
                       x_prev=np.array([0.05, 0, 0]), dt=0.01)
    assert f[0] < 0.0


def test_attitude_setpoint_tilts_toward_force():
    q = attitude_setpoint(np.array([1.0, 0.0, 9.81]), 0.0, max_tilt=0.6)
    from seals.math3d import quat_rotate
    z = quat_rotate(q, vec3(0, 0, 1))
    f = np.array([1.0, 0.0, 9.81])
    assert np.allclose(z, f / np.linalg.norm(f), atol=1e-9)


def test_attitude_torque_zero_at_setpoint():
    g = AttitudeGains()
    q = quat_from_axis_angle(vec3(0, 1, 0), 0.2)
    tau = attitude_torque(g, q, q, np.zeros(3))
    assert np.allclose(tau, 0.0, atol=1e-12)


def test_attitude_torque_restores_and_damps():
    g = AttitudeGains(kp=1.0, kd=0.5)
    q_err = quat_from_axis_angle(vec3(0, 1, 0), 0.3)
    tau = attitude_torque(g, quat_identity(), q_err, np.zeros(3))
    assert tau[1] > 0.0  # pulls toward the setpoint
    tau_damp = attitude_torque(g, quat_identity(), quat_identity(),
                               np.array([0.0, 2.0, 0.0]))
    assert tau_damp[1] < 0.0


def make_controller(cfg=None):
    cfg = cfg or default_scenario()
    layout = RotorLayout.from_config(cfg.robot)
    arm = ArmModel.from_config(cfg.arm)
    total = cfg.robot.mass + arm.link_masses.sum()
    return Controller(layout, arm, cfg, total_mass=total), layout


def hover_body(cfg):
    return RigidBodyState(position=vec3(0, 0, 1.0), mass=cfg.robot.mass,
                          inertia=np.diag(cfg.robot.inertia))


def test_hover_command_equal_speeds_symmetric_arm():
    cfg = default_scenario()
    ctl, _ = make_controller(cfg)
    out = ctl.step(ControllerCommand(), hover_body(cfg), ArmState(), cfg.dt)
    assert np.allclose(out.rotor_speeds, out.rotor_speeds[0], rtol=1e-9)
    assert out.rotor_speeds[0] > 0.0


def test_climb_command_exceeds_hover_thrust():
    cfg = default_scenario()
    ctl, layout = make_controller(cfg)
    cmd = ControllerCommand(v_ref=np.array([0.0, 0.0, 0.5]))
    out = ctl.step(cmd, hover_body(cfg), ArmState(), cfg.dt)
    total_thrust = (layout.k_t * out.rotor_speeds ** 2).sum()
    assert total_thrust > ctl.total_mass * 9.81


def test_arm_swing_compensated_at_mixer():
    # rotor asymmetry such that net torque about the shifted CoG stays ~0
    cfg = default_scenario()
    ctl, layout = make_controller(cfg)
    arm = ArmState(q=np.array([0.0, 1.2, 0.3]), q_prev=np.array([0.0, 1.2, 0.3]))
    cmd = ControllerCommand(q_ref=arm.q.copy())
    out = ctl.step(cmd, hover_body(cfg), arm, cfg.dt)
    assert not np.allclose(out.rotor_speeds, out.rotor_speeds[0])
    wrench = wrench_from_speeds(out.rotor_speeds, layout, out.cog[:2])
    assert np.all(np.abs(wrench[1:3]) < 1e-9)


def test_gripper_command_latches():
    cfg = default_scenario()
    ctl, _ = make_controller(cfg)
    body, arm = hover_body(cfg), ArmState()
    out = ctl.step(ControllerCommand(gripper="close"), body, arm, cfg.dt)
    assert out.finger_setpoint == 0.0
    out = ctl.step(ControllerCommand(gripper="hold"), body, arm, cfg.dt)
    assert out.finger_setpoint == 0.0
    out = ctl.step(ControllerCommand(gripper="open"), body, arm, cfg.dt)
    assert out.finger_setpoint == 1.0
