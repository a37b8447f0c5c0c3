import numpy as np
import pytest

from seals.arm import (ArmModel, IkError, forward_kinematics, inverse_kinematics,
                       jacobian, link_com_positions, system_cog)
from seals.math3d import Transform, quat_from_axis_angle, quat_rotate, vec3


def model():
    return ArmModel()


def test_home_pose_straight_down():
    m = model()
    t = forward_kinematics(m, np.zeros(3))
    expected = m.mount + vec3(0, 0, -m.reach)
    assert np.allclose(t.t, expected, atol=1e-12)


def test_base_yaw_rotates_about_joint1_axis():
    # transform composition oracle: yawing joint 1 equals pre-rotating the
    # home pose about the mount z axis
    m = model()
    q = np.array([np.pi / 2, 0.7, -0.4])
    t = forward_kinematics(m, q)
    t_noyaw = forward_kinematics(m, np.array([0.0, 0.7, -0.4]))
    rel = t_noyaw.t - m.mount
    rotated = quat_rotate(quat_from_axis_angle(vec3(0, 0, 1), np.pi / 2), rel) + m.mount
    assert np.allclose(t.t, rotated, atol=1e-10)


def test_zero_link_lengths_give_mount_transform():
    m = ArmModel(link_lengths=np.array([1e-12, 1e-12, 1e-12]))
    t = forward_kinematics(m, np.array([0.3, 0.2, 0.1]))
    assert np.allclose(t.t, m.mount, atol=1e-9)


def finite_difference_jacobian(m, q, eps=1e-6):
    J = np.zeros((6, 3))
    t0 = forward_kinematics(m, q)
    for k in range(3):
        dq = q.copy()
        dq[k] += eps
        t1 = forward_kinematics(m, dq)
        J[:3, k] = (t1.t - t0.t) / eps
        # angular: rotation vector of the relative rotation over eps
        from seals.math3d import quat_conjugate, quat_multiply, quat_to_rotvec
        dqrot = quat_multiply(t1.q, quat_conjugate(t0.q))
        J[3:, k] = quat_to_rotvec(dqrot) / eps
    return J


def test_jacobian_matches_finite_differences_100_configs():
    m = model()
    rng = np.random.default_rng(21)
    for _ in range(100):
        q = rng.uniform(m.joint_lo, m.joint_hi)
        J = jacobian(m, q)
        J_fd = finite_difference_jacobian(m, q)
        assert np.allclose(J, J_fd, atol=1e-5)


def test_zero_joint_rates_zero_twist():
    J = jacobian(model(), np.array([0.5, -0.3, 0.9]))
    assert np.allclose(J @ np.zeros(3), 0.0)


def test_singular_stretch_detected_by_svd():
    # fully stretched arm: q2 = q3 = 0 leaves the position Jacobian rank < 3
    m = model()
    J = jacobian(m, np.zeros(3))[:3, :]
    sv = np.linalg.svd(J, compute_uv=False)
    assert np.sum(sv > 1e-8) < 3


def test_ik_roundtrip_random_targets():
    m = model()
    rng = np.random.default_rng(33)
    tried = 0
    for _ in range(30):
        q_true = rng.uniform(m.joint_lo * 0.8, m.joint_hi * 0.8)
        target = forward_kinematics(m, q_true)
        q = inverse_kinematics(m, target, q_init=q_true + rng.normal(0, 0.2, 3))
        err = np.linalg.norm(forward_kinematics(m, q).t - target.t)
        assert err <= 1e-4
        assert np.all(q >= m.joint_lo) and np.all(q <= m.joint_hi)
        tried += 1
    assert tried == 30


def test_ik_home_target_near_zero():
    m = model()
    home = forward_kinematics(m, np.zeros(3))
    q = inverse_kinematics(m, home, q_init=np.array([0.05, 0.1, -0.08]))
    assert np.linalg.norm(forward_kinematics(m, q).t - home.t) <= 1e-4


def test_ik_unreachable_reports_distance():
    m = model()
    with pytest.raises(IkError) as err:
        inverse_kinematics(m, Transform(t=vec3(10.0, 0.0, 0.0)))
    assert err.value.closest_distance > 5.0


def test_cog_massless_arm_limit():
    m = ArmModel(link_masses=np.array([1e-12, 1e-12, 1e-12]))
    cog = system_cog(1.5, m, np.array([0.3, 1.0, 0.5]))
    assert np.allclose(cog, 0.0, atol=1e-10)


def test_cog_weighted_mean_oracle():
    # independent weighted-mean over explicit link CoM positions
    m = model()
    q = np.array([0.0, np.pi / 2, 0.0])  # arm swung toward +x
    cog = system_cog(1.5, m, q)
    coms = link_com_positions(m, q)
    expected = (1.5 * np.zeros(3) + (m.link_masses[:, None] * coms).sum(axis=0)) \
        / (1.5 + m.link_masses.sum())
    assert np.allclose(cog, expected, atol=1e-12)
    assert cog[0] > 0.0


def test_cog_symmetric_pose_zero_y():
    cog = system_cog(1.5, model(), np.array([0.0, 0.8, -0.3]))
    assert abs(cog[1]) < 1e-12


def test_cog_lipschitz_continuity():
    # |dcog| <= L |dq| with L bounded by total arm mass * reach / total mass
    m = model()
    rng = np.random.default_rng(55)
    L = m.link_masses.sum() * m.reach / (1.5 + m.link_masses.sum())
    for _ in range(50):
        q = rng.uniform(m.joint_lo, m.joint_hi)
        dq = rng.normal(0, 0.01, 3)
        d_cog = system_cog(1.5, m, q + dq) - system_cog(1.5, m, q)
        assert np.linalg.norm(d_cog) <= L * np.linalg.norm(dq) + 1e-12
