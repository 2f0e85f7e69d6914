"""Forward and inverse kinematics of the quadrotor-mounted two-link arm.

The arm hangs from the body frame through a fixed base link of length L0,
followed by two revolute joints described by standard DH rows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .spatial import EulerAngles, euler_from_rotation, homogeneous, is_rotation, rotation_from_euler

DEGENERATE_TOL = 1e-9


class InvalidRotationError(ValueError):
    pass


@dataclass(frozen=True)
class ManipulatorGeometry:
    L0: float = 30e-3
    L1: float = 70e-3
    L2: float = 85e-3

    def __post_init__(self):
        if min(self.L0, self.L1, self.L2) <= 0.0:
            raise ValueError("link lengths must be positive")


class DhRow(NamedTuple):
    d: float
    a: float
    alpha: float
    theta: float


class JointAngles(NamedTuple):
    theta1: float
    theta2: float


@dataclass(frozen=True)
class EndEffectorPose:
    position: np.ndarray
    orientation: EulerAngles
    transform: np.ndarray | None = None


@dataclass(frozen=True)
class IkSolution:
    X: float
    Y: float
    Z: float
    psi: float
    theta1: float
    theta2: float
    case_id: str
    free_psi: bool = False

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.X, self.Y, self.Z, self.psi, self.theta1, self.theta2)


def dh_rows(geometry: ManipulatorGeometry, joints: Sequence[float]) -> list[DhRow]:
    t1, t2 = joints
    return [
        DhRow(-geometry.L0, 0.0, -math.pi / 2, -math.pi / 2),
        DhRow(0.0, geometry.L1, math.pi / 2, t1),
        DhRow(0.0, geometry.L2, 0.0, t2),
    ]


def _trig(angle: float) -> tuple[float, float]:
    # exact zeros at multiples of pi/2 keep the fixed base link bit-clean
    c, s = math.cos(angle), math.sin(angle)
    if abs(c) < 1e-15:
        c = 0.0
    if abs(s) < 1e-15:
        s = 0.0
    return c, s


def dh_transform(row: DhRow) -> np.ndarray:
    ct, st = _trig(row.theta)
    ca, sa = _trig(row.alpha)
    return np.array([
        [ct, -st * ca, st * sa, row.a * ct],
        [st, ct * ca, -ct * sa, row.a * st],
        [0.0, sa, ca, row.d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def dh_chain(geometry: ManipulatorGeometry, joints: Sequence[float]) -> list[np.ndarray]:
    """A^B_0, A^0_1, A^1_2 evaluated at the joint angles."""
    return [dh_transform(r) for r in dh_rows(geometry, joints)]


def body_to_inertial(eta1: Sequence[float], eta2: Sequence[float]) -> np.ndarray:
    return homogeneous(rotation_from_euler(eta2).T, eta1)


def end_effector_transform(eta1, eta2, joints, geometry: ManipulatorGeometry) -> np.ndarray:
    T = body_to_inertial(eta1, eta2)
    for A in dh_chain(geometry, joints):
        T = T @ A
    return T


def forward_kinematics(eta1, eta2, joints, geometry: ManipulatorGeometry) -> EndEffectorPose:
    """End-effector position and roll/pitch/yaw in the inertial frame.

    The orientation uses the same convention as the vehicle attitude, i.e.
    ``rotation_from_euler(orientation)`` equals the transpose of the
    end-effector rotation block. A vertical tool axis (pitch +-pi/2, e.g. the
    arm hanging straight down) is reported with zero roll.
    """
    T = end_effector_transform(eta1, eta2, joints, geometry)
    return EndEffectorPose(T[:3, 3].copy(), euler_from_rotation(T[:3, :3].T, lock_zero_roll=True), T)


def atan2_half_open(yy: float, xx: float) -> float:
    """Quadrant-aware arc tangent of yy/xx with range (-pi, pi]."""
    if yy == 0.0 and xx == 0.0:
        raise ValueError("atan2 undefined for (0, 0)")
    a = math.atan2(yy, xx)
    return math.pi if a == -math.pi else a


def _position(r_ee: Sequence[float], psi: float, t1: float, t2: float, g: ManipulatorGeometry):
    x_ee, y_ee, z_ee = r_ee
    cp, sp = math.cos(psi), math.sin(psi)
    c1, s1 = math.cos(t1), math.sin(t1)
    c2, s2 = math.cos(t2), math.sin(t2)
    X = x_ee - (g.L1 * c1 * sp + g.L2 * cp * s2 + g.L2 * c1 * c2 * sp)
    Y = y_ee - (-g.L1 * cp * c1 + g.L2 * sp * s2 - g.L2 * cp * c1 * c2)
    Z = z_ee + g.L0 + g.L1 * s1 + g.L2 * c2 * s1
    return X, Y, Z


def inverse_kinematics_matrix(R: np.ndarray, position: Sequence[float], geometry: ManipulatorGeometry,
                              psi: float = 0.0) -> list[IkSolution]:
    """Solve for (X, Y, Z, psi, theta1, theta2) given the end-effector rotation
    block R (frame 2 to inertial) with the vehicle held level.

    ``psi`` is only used in the degenerate cases where yaw and the second
    joint are not separable.
    """
    R = np.asarray(R, dtype=float)
    if not is_rotation(R):
        raise InvalidRotationError("end-effector rotation is not orthonormal with det +1")
    r13, r23, r33 = R[0, 2], R[1, 2], min(1.0, max(-1.0, R[2, 2]))
    r11, r12, r31, r32 = R[0, 0], R[0, 1], R[2, 0], R[2, 1]

    if abs(r13) >= DEGENERATE_TOL or abs(r23) >= DEGENERATE_TOL:
        s = math.sqrt(max(0.0, 1.0 - r33 * r33))
        out = []
        for sign, tag in ((1.0, "Case1-branchA"), (-1.0, "Case1-branchB")):
            t1 = atan2_half_open(sign * s, r33)
            yaw = atan2_half_open(sign * r13, -sign * r23)
            t2 = atan2_half_open(sign * r32, -sign * r31)
            out.append(IkSolution(*_position(position, yaw, t1, t2, geometry), yaw, t1, t2, tag))
        return out

    sum_angle = atan2_half_open(r11, r12)
    if r33 > 0.0:
        t1, t2, tag = 0.0, sum_angle - psi, "Case2"
    else:
        t1, t2, tag = math.pi, sum_angle + psi, "Case3"
    return [IkSolution(*_position(position, psi, t1, t2, geometry), psi, t1, t2, tag, free_psi=True)]


def inverse_kinematics(pose: EndEffectorPose, geometry: ManipulatorGeometry,
                       psi: float = 0.0) -> list[IkSolution]:
    R = rotation_from_euler(pose.orientation).T
    return inverse_kinematics_matrix(R, pose.position, geometry, psi=psi)
