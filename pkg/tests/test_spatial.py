import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aerialmanip.spatial import (GimbalLockError, angle_diff, euler_from_rotation, euler_rate_jacobian,
                                 homogeneous, is_rotation, rotation_from_euler, skew, wrap_angle)

angle = st.floats(-math.pi, math.pi, allow_nan=False)
generic_pitch = st.floats(-math.pi / 2 + 0.01, math.pi / 2 - 0.01)
vec = st.lists(st.floats(-10, 10), min_size=3, max_size=3)


def test_identity_rotation():
    assert np.array_equal(rotation_from_euler((0.0, 0.0, 0.0)), np.eye(3))


def test_pure_yaw_quarter_turn():
    R = rotation_from_euler((0.0, 0.0, math.pi / 2))
    np.testing.assert_allclose(R, [[0, 1, 0], [-1, 0, 0], [0, 0, 1]], atol=1e-15)


def test_rotation_maps_inertial_to_body():
    # a body yawed by +90 deg sees the inertial x axis along its own -y
    R = rotation_from_euler((0.0, 0.0, math.pi / 2))
    np.testing.assert_allclose(R @ [1.0, 0.0, 0.0], [0.0, -1.0, 0.0], atol=1e-15)


@given(angle, angle, angle)
def test_rotation_orthonormal(phi, theta, psi):
    R = rotation_from_euler((phi, theta, psi))
    assert np.max(np.abs(R @ R.T - np.eye(3))) <= 1e-12
    assert abs(np.linalg.det(R) - 1.0) <= 1e-12


def test_jacobian_identity_at_zero():
    assert np.array_equal(euler_rate_jacobian((0.0, 0.0, 0.0)), np.eye(3))


def test_jacobian_singular_at_vertical_pitch():
    assert abs(np.linalg.det(euler_rate_jacobian((0.3, math.pi / 2, 0.1)))) < 1e-15


def test_jacobian_uses_roll_in_third_row():
    J = euler_rate_jacobian((0.4, 0.2, 0.0))
    assert J[2, 1] == pytest.approx(-math.sin(0.4), abs=0)


@given(angle, angle, angle)
def test_jacobian_determinant(phi, theta, psi):
    assert abs(np.linalg.det(euler_rate_jacobian((phi, theta, psi))) - math.cos(theta)) <= 1e-12


def test_jacobian_matches_rotation_derivative():
    # body rates from the rotation-matrix derivative: skew(w) = -R_dot R^T
    eta = np.array([0.3, -0.2, 1.1])
    rate = np.array([0.7, -0.4, 0.25])
    h = 1e-6
    Rd = (rotation_from_euler(eta + h * rate) - rotation_from_euler(eta - h * rate)) / (2 * h)
    W = -Rd @ rotation_from_euler(eta).T
    w = np.array([W[2, 1], W[0, 2], W[1, 0]])
    np.testing.assert_allclose(euler_rate_jacobian(eta) @ rate, w, atol=1e-8)


def test_euler_extraction_identity():
    assert euler_from_rotation(np.eye(3)) == (0.0, 0.0, 0.0)


def test_euler_extraction_example():
    got = euler_from_rotation(rotation_from_euler((0.3, -0.2, 1.1)))
    np.testing.assert_allclose(got, (0.3, -0.2, 1.1), atol=1e-9)


def test_gimbal_lock_flagged():
    R = rotation_from_euler((0.2, math.pi / 2, 0.5))
    assert R[0, 2] == pytest.approx(-1.0)
    with pytest.raises(GimbalLockError):
        euler_from_rotation(R)


@given(angle, generic_pitch, angle)
def test_euler_round_trip(phi, theta, psi):
    got = euler_from_rotation(rotation_from_euler((phi, theta, psi)))
    assert abs(angle_diff(got.phi, phi)) <= 1e-9
    assert abs(got.theta - theta) <= 1e-9
    assert abs(angle_diff(got.psi, psi)) <= 1e-9


def test_skew_zero_and_mount_offset():
    assert np.array_equal(skew((0, 0, 0)), np.zeros((3, 3)))
    S = skew((0.0, 0.0, -0.03))
    assert S[0, 1] == 0.03 and S[1, 0] == -0.03
    assert np.count_nonzero(S) == 2


@given(vec, vec)
def test_skew_is_cross_product(v, w):
    np.testing.assert_allclose(skew(v) @ w, np.cross(v, w), atol=1e-14 * (1 + np.abs(v).max() * np.abs(w).max()))


@given(vec)
def test_skew_antisymmetric(v):
    S = skew(v)
    assert np.array_equal(S.T, -S)


def test_homogeneous_bottom_row():
    T = homogeneous(rotation_from_euler((0.1, 0.2, 0.3)), (1, 2, 3))
    assert np.array_equal(T[3], [0, 0, 0, 1])
    assert np.array_equal(T[:3, 3], [1, 2, 3])


@given(st.floats(-100, 100))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert abs(math.sin(w) - math.sin(a)) < 1e-9 and abs(math.cos(w) - math.cos(a)) < 1e-9


def test_angle_diff_across_branch_cut():
    assert angle_diff(math.pi - 0.1, -math.pi + 0.1) == pytest.approx(-0.2)


def test_is_rotation_rejects_reflection():
    assert not is_rotation(np.diag([1.0, 1.0, -1.0]))
    assert is_rotation(rotation_from_euler((1, 2, 3)))


@given(angle, angle, st.sampled_from([math.pi / 2, -math.pi / 2]))
def test_gimbal_lock_zero_roll_convention(phi, psi, theta):
    R = rotation_from_euler((phi, theta, psi))
    got = euler_from_rotation(R, lock_zero_roll=True)
    assert got.phi == 0.0 and got.theta == theta
    np.testing.assert_allclose(rotation_from_euler(got), R, atol=1e-12)
