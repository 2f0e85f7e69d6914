"""Feedback-linearizing PID control of height, attitude, yaw and the two joints.

Each loop cancels the modelled nonlinearity of its channel and imposes
ë + Kd ė + Kp e + Ki ∫e = 0. Desired roll and pitch are not tracked
channels of the mission; they follow from the desired translational
accelerations through the thrust-direction constraint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import _kernels as K
from ..dynamics import BodyWrench, LinkParams, QuadrotorParams, pack_params
from ..rotor import DEFAULT_KF, DEFAULT_KM, PWM_MAX, BENCH_FIT
from ..spatial import rotation_from_euler
from .common import ControlInputs, ControlOutput, Controller, FilteredDerivative

LOOPS = ("Z", "phi", "theta", "psi", "theta1", "theta2")


@dataclass(frozen=True)
class PidGains:
    Kp: float
    Kd: float
    Ki: float

    def __post_init__(self):
        if min(self.Kp, self.Kd, self.Ki) < 0.0:
            raise ValueError("PID gains must be non-negative")


FBL_GAINS = {
    "Z": PidGains(16.0, 8.0, 0.01),
    "phi": PidGains(100.0, 8.0, 10.0),
    "theta": PidGains(100.0, 8.0, 10.0),
    "psi": PidGains(16.0, 8.0, 0.01),
    "theta1": PidGains(16.0, 8.0, 0.01),
    "theta2": PidGains(16.0, 8.0, 0.01),
}

# attitude gains from the bench rig of the vehicle alone
RIG_PID_GAINS = {
    "phi": PidGains(Kp=100.0, Kd=1.0, Ki=10.0),
    "theta": PidGains(Kp=85.0, Kd=1.0, Ki=10.0),
    "psi": PidGains(Kp=0.01, Kd=260.0, Ki=250.0),
}

DEFAULT_JOINT_TORQUE_MAX = 1.0  # N*m, servo authority assumed for anti-windup
MODEL_PASSES = 20


class FreeFallDemand(ValueError):
    """Desired vertical acceleration leaves no thrust direction to solve for."""


def desired_attitude(acc_d, psi_d: float, interaction_accel=(0.0, 0.0, 0.0), g: float = 9.81):
    """Roll and pitch that point the thrust along the desired acceleration.

    ``interaction_accel`` is the arm force divided by the vehicle mass; it is
    removed from the demand before solving. Returns (phi_d, theta_d, clamped).
    """
    ax = acc_d[0] - interaction_accel[0]
    ay = acc_d[1] - interaction_accel[1]
    az = acc_d[2] + g - interaction_accel[2]
    if az == 0.0:
        raise FreeFallDemand("vertical thrust demand is zero")
    norm = math.sqrt(ax * ax + ay * ay + az * az)
    cp, sp = math.cos(psi_d), math.sin(psi_d)
    ratio = (ax * sp - ay * cp) / norm
    clamped = abs(ratio) > 1.0
    ratio = max(-1.0, min(1.0, ratio))
    theta = math.atan2(ax * cp + ay * sp, az)
    return math.asin(ratio), theta, clamped


@dataclass
class PidLoop:
    gains: PidGains
    integral_limit: float = math.inf
    integral: float = 0.0

    def command(self, acc_d: float, e: float, e_dot: float, dt: float) -> float:
        self.integral += e * dt
        if self.gains.Ki > 0.0:
            lim = self.integral_limit / self.gains.Ki
            self.integral = max(-lim, min(lim, self.integral))
        g = self.gains
        return acc_d + g.Kp * e + g.Kd * e_dot + g.Ki * self.integral

    def reset(self) -> None:
        self.integral = 0.0


class FblController(Controller):
    """Controller holding its own nominal (payload-free) model of the vehicle and arm.

    Arm wrench and joint torques come from that model evaluated at the
    commanded accelerations, so with an exact model every channel follows
    its linear error dynamics. A grasped payload is not part of the model.
    """

    name = "fbl"

    def __init__(self, quad: QuadrotorParams | None = None, links: LinkParams | None = None,
                 gains: dict | None = None, thrust_max: float | None = None,
                 joint_torque_max: float = DEFAULT_JOINT_TORQUE_MAX):
        self.quad = quad or QuadrotorParams()
        self.links = links or LinkParams()
        self.packed = pack_params(self.quad, self.links)
        gains = {**FBL_GAINS, **(gains or {})}
        sq_max = BENCH_FIT["a"][0] * PWM_MAX + BENCH_FIT["b"][0]
        if thrust_max is None:
            thrust_max = 4.0 * DEFAULT_KF * sq_max
        q = self.quad
        tau_rp = q.d * DEFAULT_KF * sq_max
        tau_yaw = 2.0 * DEFAULT_KM * sq_max
        M1, M2 = self._joint_inertia(np.array([math.pi / 2, 0.0]))
        authority = {
            "Z": thrust_max / q.m - q.g,
            "phi": tau_rp / q.Ix,
            "theta": tau_rp / q.Iy,
            "psi": tau_yaw / q.Iz,
            "theta1": joint_torque_max / M1,
            "theta2": joint_torque_max / M2,
        }
        self.loops = {k: PidLoop(gains[k], 0.5 * authority[k]) for k in LOOPS}
        self.phi_rate = FilteredDerivative()
        self.phi_acc = FilteredDerivative()
        self.theta_rate = FilteredDerivative()
        self.theta_acc = FilteredDerivative()

    def _joint_inertia(self, q) -> tuple[float, float]:
        ws = np.empty((K.NWS, 3))
        out = np.empty(8)
        z3, z2 = np.zeros(3), np.zeros(2)
        diag = []
        for i in range(2):
            unit = np.zeros(2)
            unit[i] = 1.0
            K.rne_kernel(np.eye(3), z3, z3, z3, z3, np.asarray(q, float), z2, unit, 0.0, self.packed, ws, out)
            diag.append(out[6 + i])
        return diag[0], diag[1]

    def reset(self) -> None:
        for loop in self.loops.values():
            loop.reset()
        for f in (self.phi_rate, self.phi_acc, self.theta_rate, self.theta_acc):
            f.reset()

    def model_sweep(self, x: np.ndarray, acc_lin, acc_ang, u_joints) -> np.ndarray:
        """Nominal-model arm wrench on the vehicle and joint torques.

        Returns [F_B (3), M_B (3), Tm1, Tm2] for the given inertial linear
        acceleration, Euler-angle accelerations and joint accelerations.
        """
        Rib = rotation_from_euler(x[3:6])
        ws = np.empty((K.NWS, 3))
        out = np.empty(8)
        K.rne_kernel(Rib, np.ascontiguousarray(x[11:14]), np.asarray(acc_ang, float),
                     Rib @ x[8:11], Rib @ np.asarray(acc_lin, float), np.ascontiguousarray(x[6:8]),
                     np.ascontiguousarray(x[14:16]), np.asarray(u_joints, float),
                     self.quad.g, self.packed, ws, out)
        return out

    def step(self, inp: ControlInputs, dt: float) -> ControlOutput:
        x = inp.state
        q = self.quad
        refs = inp.refs
        flags = []
        Rbi = rotation_from_euler(x[3:6]).T

        acc_d = np.array([refs["X"][2], refs["Y"][2], refs["Z"][2]])
        # planned joint accelerations only: feeding back the commanded attitude
        # acceleration here closes a loop through the twice differentiated demand
        F = Rbi @ self.model_sweep(x, acc_d, (0.0, 0.0, 0.0),
                                   (refs["theta1"][2], refs["theta2"][2]))[0:3]
        psi_d = refs["psi"][0]
        phi_d, theta_d, clamped = desired_attitude(acc_d, psi_d, F / q.m, q.g)
        if clamped:
            flags.append("roll_ratio_clamped")
        dphi_d = self.phi_rate.update(phi_d, dt)
        ddphi_d = self.phi_acc.update(dphi_d, dt)
        dtheta_d = self.theta_rate.update(theta_d, dt)
        ddtheta_d = self.theta_acc.update(dtheta_d, dt)

        targets = {
            "Z": refs["Z"],
            "phi": (phi_d, dphi_d, ddphi_d),
            "theta": (theta_d, dtheta_d, ddtheta_d),
            "psi": refs["psi"],
            "theta1": refs["theta1"],
            "theta2": refs["theta2"],
        }
        index = {"Z": 2, "phi": 3, "theta": 4, "psi": 5, "theta1": 6, "theta2": 7}
        u = {}
        for k, (qd, qd_dot, qd_ddot) in targets.items():
            i = index[k]
            u[k] = self.loops[k].command(qd_ddot, qd - x[i], qd_dot - x[8 + i], dt)

        phi, theta = x[3], x[4]
        dphi, dth, dpsi = x[11], x[12], x[13]
        cc = math.cos(phi) * math.cos(theta)
        if cc <= 0.0:
            raise ValueError("attitude outside the controllable region")
        ang = (u["phi"], u["theta"], u["psi"])
        joints = (u["theta1"], u["theta2"])
        # the vehicle's linear acceleration follows from the thrust, which in
        # turn depends on the arm force; a few passes settle the fixed point
        thrust_dir = Rbi[:, 2]
        lin = np.array([refs["X"][2], refs["Y"][2], u["Z"]])
        for _ in range(MODEL_PASSES):
            sweep = self.model_sweep(x, lin, ang, joints)
            F = Rbi @ sweep[0:3]
            T = (q.m * u["Z"] + q.m * q.g - F[2]) / cc
            new = (T * thrust_dir + F) / q.m
            new[2] -= q.g
            done = np.max(np.abs(new - lin)) < 1e-10
            lin = new
            if done:
                break
        M = sweep[3:6]
        Tm = sweep[6:8]

        wb = inp.omega_bar
        tau1 = q.Ix * u["phi"] - dth * dpsi * (q.Iy - q.Iz) + q.Ir * dth * wb - M[0]
        tau2 = q.Iy * u["theta"] - dphi * dpsi * (q.Iz - q.Ix) - q.Ir * dphi * wb - M[1]
        tau3 = q.Iz * u["psi"] - dphi * dth * (q.Ix - q.Iy) - M[2]
        return ControlOutput(BodyWrench(T, tau1, tau2, tau3), float(Tm[0]), float(Tm[1]),
                             phi_d, theta_d, tuple(flags))
