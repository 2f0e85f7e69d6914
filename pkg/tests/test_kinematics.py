import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aerialmanip.kinematics import (InvalidRotationError, ManipulatorGeometry, atan2_half_open, dh_chain, dh_rows,
                                    end_effector_transform, forward_kinematics, inverse_kinematics,
                                    inverse_kinematics_matrix)
from aerialmanip.spatial import angle_diff

GEOM = ManipulatorGeometry()


def _match(solutions, target):
    """Pick the branch closest to the generating pose and return its worst error."""
    best = math.inf
    for s in solutions:
        err = max(abs(s.X - target[0]), abs(s.Y - target[1]), abs(s.Z - target[2]),
                  abs(angle_diff(s.psi, target[3])), abs(angle_diff(s.theta1, target[4])),
                  abs(angle_diff(s.theta2, target[5])))
        best = min(best, err)
    return best


def test_hanging_pose_tip_below_body():
    T = end_effector_transform((0, 0, 0), (0, 0, 0), (math.pi / 2, 0.0), GEOM)
    np.testing.assert_allclose(T[:3, 3], [0.0, 0.0, -(GEOM.L0 + GEOM.L1 + GEOM.L2)], atol=1e-15)


def test_base_link_is_exact():
    A0 = dh_chain(GEOM, (0.0, 0.0))[0]
    assert np.array_equal(A0, [[0, 0, 1, 0], [-1, 0, 0, 0], [0, -1, 0, -GEOM.L0], [0, 0, 0, 1]])


def test_dh_rows_carry_joint_angles():
    rows = dh_rows(GEOM, (0.3, -0.4))
    assert rows[1].theta == 0.3 and rows[2].theta == -0.4
    assert rows[0].d == -GEOM.L0 and rows[1].a == GEOM.L1 and rows[2].a == GEOM.L2


def test_geometry_rejects_nonpositive_lengths():
    with pytest.raises(ValueError):
        ManipulatorGeometry(L1=0.0)


def test_atan2_half_open():
    assert atan2_half_open(0.0, -1.0) == math.pi
    assert atan2_half_open(-0.0, -1.0) == math.pi
    assert atan2_half_open(1.0, 0.0) == pytest.approx(math.pi / 2)
    with pytest.raises(ValueError):
        atan2_half_open(0.0, 0.0)


def test_fk_translation_with_body_position():
    a = forward_kinematics((0, 0, 0), (0, 0, 0.4), (1.0, 0.5), GEOM)
    b = forward_kinematics((1.0, -2.0, 3.0), (0, 0, 0.4), (1.0, 0.5), GEOM)
    np.testing.assert_allclose(b.position - a.position, [1.0, -2.0, 3.0], atol=1e-14)


def test_generic_round_trip_two_branches():
    target = (0.4, -0.2, 1.5, 0.7, 1.1, -0.6)
    sols = inverse_kinematics(forward_kinematics(target[:3], (0, 0, target[3]), target[4:], GEOM), GEOM)
    assert [s.case_id for s in sols] == ["Case1-branchA", "Case1-branchB"]
    assert _match(sols, target) <= 1e-9
    # the other branch reaches the same pose
    for s in sols:
        T = end_effector_transform((s.X, s.Y, s.Z), (0, 0, s.psi), (s.theta1, s.theta2), GEOM)
        T0 = end_effector_transform(target[:3], (0, 0, target[3]), target[4:], GEOM)
        np.testing.assert_allclose(T, T0, atol=1e-12)


@pytest.mark.parametrize("theta1,case", [(0.0, "Case2"), (math.pi, "Case3")])
def test_degenerate_joint_cases(theta1, case):
    target = (0.1, 0.2, -0.3, 0.5, theta1, 0.8)
    pose = forward_kinematics(target[:3], (0, 0, target[3]), target[4:], GEOM)
    (sol,) = inverse_kinematics(pose, GEOM, psi=target[3])
    assert sol.case_id == case and sol.free_psi
    assert _match([sol], target) <= 1e-9


def test_rejects_non_rotation():
    with pytest.raises(InvalidRotationError):
        inverse_kinematics_matrix(np.diag([1.0, 1.0, -1.0]), (0, 0, 0), GEOM)


generic_t1 = st.floats(0.05, math.pi - 0.05) | st.floats(-math.pi + 0.05, -0.05)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-math.pi, math.pi),
       generic_t1, st.floats(-math.pi, math.pi))
def test_round_trip_property(X, Y, Z, psi, t1, t2):
    target = (X, Y, Z, psi, t1, t2)
    sols = inverse_kinematics(forward_kinematics(target[:3], (0, 0, psi), (t1, t2), GEOM), GEOM)
    assert _match(sols, target) <= 1e-9
