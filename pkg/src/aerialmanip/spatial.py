"""Euler-angle rotation algebra shared by the kinematics and dynamics code.

Conventions: ``rotation_from_euler`` returns R_I^B, the matrix taking inertial
components to body components (roll-pitch-yaw, Z-Y-X). Its transpose maps
body vectors into the inertial frame.
"""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

GIMBAL_TOL = 1e-9


class GimbalLockError(ValueError):
    """Raised when pitch is at +-pi/2 and roll/yaw cannot be separated."""


class EulerAngles(NamedTuple):
    phi: float
    theta: float
    psi: float


def rotation_from_euler(angles: Sequence[float]) -> np.ndarray:
    phi, theta, psi = angles
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return np.array([
        [cp * ct, sp * ct, -st],
        [-sp * cf + sf * st * cp, cp * cf + sp * st * sf, ct * sf],
        [sp * sf + cp * st * cf, -cp * sf + sp * st * cf, ct * cf],
    ])


def euler_rate_jacobian(angles: Sequence[float]) -> np.ndarray:
    """J_v with nu_2 = J_v @ d(eta_2)/dt. Determinant is cos(theta)."""
    phi, theta, _ = angles
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    return np.array([
        [1.0, 0.0, -st],
        [0.0, cf, ct * sf],
        [0.0, -sf, ct * cf],
    ])


def euler_from_rotation(R: np.ndarray, tol: float = GIMBAL_TOL, lock_zero_roll: bool = False) -> EulerAngles:
    """Invert :func:`rotation_from_euler` on the generic branch |theta| < pi/2.

    At pitch +-pi/2 only roll minus (or plus) yaw is defined. By default that
    raises; with ``lock_zero_roll`` roll is fixed at 0 and yaw absorbs the rest.
    """
    R = np.asarray(R, dtype=float)
    r13 = R[0, 2]
    if abs(abs(r13) - 1.0) <= tol:
        if not lock_zero_roll:
            raise GimbalLockError(f"pitch at +-pi/2 (R[0,2] = {r13:.12g})")
        return EulerAngles(0.0, math.copysign(math.pi / 2, -r13), math.atan2(-R[1, 0], R[1, 1]))
    theta = math.atan2(-r13, math.hypot(R[0, 0], R[0, 1]))
    phi = math.atan2(R[1, 2], R[2, 2])
    psi = math.atan2(R[0, 1], R[0, 0])
    return EulerAngles(phi, theta, psi)


def skew(v: Sequence[float]) -> np.ndarray:
    """Matrix S with S @ w == cross(v, w)."""
    x, y, z = (float(c) for c in v)
    return np.array([
        [0.0, -z, y],
        [z, 0.0, -x],
        [-y, x, 0.0],
    ])


def homogeneous(R: np.ndarray, p: Sequence[float]) -> np.ndarray:
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = p
    return T


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    return math.pi if w == -math.pi else w


def angle_diff(a: float, b: float) -> float:
    """Shortest signed difference a - b modulo 2*pi."""
    return wrap_angle(a - b)


def is_rotation(R: np.ndarray, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(np.allclose(R @ R.T, np.eye(3), atol=tol) and abs(np.linalg.det(R) - 1.0) <= tol)
