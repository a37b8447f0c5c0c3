import numpy as np

from seals.config import scenario_from_dict
from seals.fauna import (AnimalModel, Crab, N_JOINTS, foot_positions_local,
                         joint_force, step_gait)
from seals.world import World


def test_crab_has_18_joints():
    assert N_JOINTS == 18
    m = AnimalModel()
    assert len(step_gait(m, 0.0)) == 18


def test_joint_force_formula():
    # direct formula evaluation
    assert joint_force(1.0, 2.0, 0.0, 0.1, 0.5, 0.3) == -0.1 + 0.4
    assert joint_force(1.0, 2.0, 0.0, 0.0, 0.3, 0.3) == 0.0


def test_joint_force_pure_damping_opposes_velocity():
    f = joint_force(k_d=1.0, k_s=0.0, v_d=0.0, current_v=0.5,
                    p_d=0.0, current_p=0.0)
    assert f < 0.0
    f = joint_force(k_d=1.0, k_s=0.0, v_d=0.0, current_v=-0.5,
                    p_d=0.0, current_p=0.0)
    assert f > 0.0


def test_gait_starts_neutral():
    m = AnimalModel()
    assert np.allclose(step_gait(m, 0.0), 0.0)


def test_gait_zero_amplitude_stationary():
    m = AnimalModel(gait_amplitude=0.0, gait_lift=0.0)
    for t in np.linspace(0, 5, 30):
        targets = step_gait(m, t)
        assert np.allclose(targets[:16], 0.0)


def test_gait_periodic_and_within_limits():
    m = AnimalModel()
    for t in np.linspace(m.gait_period, 3 * m.gait_period, 50):
        targets = step_gait(m, t)
        assert np.all(targets >= m.joint_lo) and np.all(targets <= m.joint_hi)
        later = step_gait(m, t + m.gait_period)
        assert np.allclose(targets, later, atol=1e-12)


def test_gait_antiphase_groups_swap():
    # phase bookkeeping: half a period later, the two leg groups exchange
    m = AnimalModel()
    t = 4.0 * m.gait_period  # past the start ramp
    now = step_gait(m, t)
    half = step_gait(m, t + m.gait_period / 2.0)
    for leg_a in range(8):
        partner = (leg_a + 1) % 2 + (leg_a // 2) * 2  # neighbor in x order
        if m.phase_offsets[leg_a] != m.phase_offsets[partner]:
            assert np.isclose(now[2 * leg_a], half[2 * partner], atol=1e-9)
            assert np.isclose(now[2 * leg_a + 1], half[2 * partner + 1], atol=1e-9)


def test_external_command_equivalence():
    # the controller path is identical whether targets come from the gait or
    # from an external command
    m = AnimalModel()
    crab_gait = Crab(m, [0.0, 0.0, 0.1])
    crab_ext = Crab(m, [0.0, 0.0, 0.1])
    t = 1.234
    targets = step_gait(m, t)
    crab_ext.external_targets = targets.copy()
    assert np.allclose(crab_gait.joint_targets(t), crab_ext.joint_targets(t))
    crab_gait.step_joints(crab_gait.joint_targets(t), 0.002)
    crab_ext.step_joints(crab_ext.joint_targets(t), 0.002)
    assert np.array_equal(crab_gait.q, crab_ext.q)
    assert np.array_equal(crab_gait.qdot, crab_ext.qdot)


def test_feet_mirror_symmetry():
    m = AnimalModel()
    feet = foot_positions_local(m, np.zeros(18))
    left = feet[:4]
    right = feet[4:]
    assert np.allclose(left[:, 1], -right[:, 1])
    assert np.allclose(left[:, 0], right[:, 0])
    assert np.allclose(left[:, 2], right[:, 2])


def test_crab_walks_without_toppling():
    # net CoM displacement > 0.1 m over 20 s, pitch/roll < 30 deg
    cfg = scenario_from_dict({
        "duration": 20.0,
        "fluid": {"enabled": False},
        "tank": {"extent": [3.0, 1.5, 0.5], "fill": 0.0},
        "fauna": {"enabled": True, "position": [-1.0, 0.0]},
        "robot": {"start": [0.0, 0.0, 5.0]},
    })
    w = World(cfg)
    w.thrusters_enabled = False
    w.freeze_aam = True
    start = w.crab.body.position.copy()
    xs = []
    for k in range(int(20.0 / cfg.dt)):
        w.step(None)
        if k % 250 == 0:
            xs.append(w.crab.body.position[0])
    disp = np.linalg.norm((w.crab.body.position - start)[:2])
    assert disp > 0.1
    from seals.math3d import quat_to_matrix
    R = quat_to_matrix(w.crab.body.orientation)
    pitch = np.degrees(np.arcsin(-np.clip(R[2, 0], -1, 1)))
    roll = np.degrees(np.arctan2(R[2, 1], R[2, 2]))
    assert abs(pitch) < 30.0 and abs(roll) < 30.0
    # monotone advance (the gait direction is -x)
    diffs = np.diff(xs)
    assert np.all(diffs <= 1e-6)
