"""Equations of motion of the quadrotor with the two-link arm attached.

The vehicle obeys Newton-Euler rigid-body dynamics (with body rates taken
equal to Euler-angle rates, the small-angle model) driven by rotor thrust,
rotor moments and the wrench the arm applies at its mount. The arm is
handled by a recursive Newton-Euler sweep. Vehicle and joint accelerations
are solved together, which keeps ``state_derivative`` a pure function of
the state and inputs.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .config import ConfigError, KeyValueFile, load_key_values
from .kinematics import ManipulatorGeometry
from .spatial import rotation_from_euler

GRAVITY = 9.81
STATE_SIZE = 16
STATE_NAMES = ("X", "Y", "Z", "phi", "theta", "psi", "theta1", "theta2",
               "dX", "dY", "dZ", "dphi", "dtheta", "dpsi", "dtheta1", "dtheta2")


class ModelValidityError(ValueError):
    """Attitude left the region where the vehicle model is defined."""


@dataclass(frozen=True)
class QuadrotorParams:
    m: float = 1.0
    Ix: float = 13.215e-3
    Iy: float = 12.522e-3
    Iz: float = 23.527e-3
    Ir: float = 33.216e-6
    d: float = 223.5e-3
    g: float = GRAVITY
    m_measured: float = 0.952  # scale reading of the built airframe, not used in simulation

    def __post_init__(self):
        for name in ("m", "Ix", "Iy", "Iz", "Ir", "d", "g"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def inertia(self) -> np.ndarray:
        return np.diag([self.Ix, self.Iy, self.Iz])


def slender_inertia(m: float, L: float) -> np.ndarray:
    """Square beam about its own centre, long axis along x."""
    return np.diag([0.0, m * L * L / 12.0, m * L * L / 12.0])


@dataclass(frozen=True)
class LinkParams:
    L0: float = 30e-3
    L1: float = 70e-3
    L2: float = 85e-3
    m0: float = 30e-3
    m1: float = 55e-3
    m2: float = 112e-3
    d_cg1: float | None = None
    d_cg2: float | None = None
    I1: np.ndarray | None = None
    I2: np.ndarray | None = None
    b1: float = 1e-3
    b2: float = 1e-3
    payload: float = 0.0

    def __post_init__(self):
        for name in ("L0", "L1", "L2", "m1", "m2"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.d_cg1 is None:
            object.__setattr__(self, "d_cg1", self.L1 / 2.0)
        if self.d_cg2 is None:
            object.__setattr__(self, "d_cg2", self.L2 / 2.0)
        if self.I1 is None:
            object.__setattr__(self, "I1", slender_inertia(self.m1, self.L1))
        if self.I2 is None:
            object.__setattr__(self, "I2", slender_inertia(self.m2, self.L2))
        object.__setattr__(self, "I1", np.array(self.I1, dtype=float).reshape(3, 3))
        object.__setattr__(self, "I2", np.array(self.I2, dtype=float).reshape(3, 3))

    @property
    def geometry(self) -> ManipulatorGeometry:
        return ManipulatorGeometry(self.L0, self.L1, self.L2)

    @property
    def arm_mass(self) -> float:
        return self.m1 + self.m2

    def __eq__(self, other):
        if not isinstance(other, LinkParams):
            return NotImplemented
        scalars = ("L0", "L1", "L2", "m0", "m1", "m2", "d_cg1", "d_cg2", "b1", "b2", "payload")
        return (all(getattr(self, k) == getattr(other, k) for k in scalars)
                and np.array_equal(self.I1, other.I1) and np.array_equal(self.I2, other.I2))

    __hash__ = None


def apply_payload(links: LinkParams, m_p: float) -> LinkParams:
    """Link-2 parameters with a point payload of mass m_p held at the tip.

    Always pass the pristine (payload-free) parameters; releasing the payload
    means calling this again with m_p = 0, which returns them unchanged.
    """
    if m_p < 0.0:
        raise ValueError("payload mass must be non-negative")
    if m_p == 0.0:
        return links
    m2, d, L2 = links.m2, links.d_cg2, links.L2
    m2n = m2 + m_p
    dn = (m2 * d + m_p * L2) / m2n
    shift = m2 * (d - dn) ** 2 + m_p * (L2 - dn) ** 2
    I2 = links.I2.copy()
    I2[1, 1] += shift
    I2[2, 2] += shift
    return replace(links, m2=m2n, d_cg2=dn, I2=I2, payload=links.payload + m_p)


def params_from_keys(kv: KeyValueFile) -> tuple[QuadrotorParams, LinkParams]:
    q = QuadrotorParams()
    quad = QuadrotorParams(**{k: kv.get_float(k, getattr(q, k))
                              for k in ("m", "Ix", "Iy", "Iz", "Ir", "d", "g")})
    base = LinkParams()
    kw = {k: kv.get_float(k, getattr(base, k)) for k in ("L0", "L1", "L2", "m0", "m1", "m2", "b1", "b2")}
    for k in ("d_cg1", "d_cg2"):
        if k in kv:
            kw[k] = kv.get_float(k)
    try:
        return quad, LinkParams(**kw)
    except ValueError as exc:
        raise ConfigError(f"{kv.source}: {exc}") from exc


def load_params(path: str | os.PathLike) -> tuple[QuadrotorParams, LinkParams]:
    return params_from_keys(load_key_values(path))


def pack_params(quad: QuadrotorParams, links: LinkParams) -> np.ndarray:
    p = np.empty(K.NPARAM)
    p[0:6] = [quad.m, quad.Ix, quad.Iy, quad.Iz, quad.Ir, quad.g]
    p[6:15] = [links.L0, links.L1, links.L2, links.m1, links.m2,
               links.d_cg1, links.d_cg2, links.b1, links.b2]
    p[15:24] = links.I1.ravel()
    p[24:33] = links.I2.ravel()
    return p


# --- state ------------------------------------------------------------------

@dataclass
class SystemState:
    eta1: np.ndarray = field(default_factory=lambda: np.zeros(3))
    eta2: np.ndarray = field(default_factory=lambda: np.zeros(3))
    joints: np.ndarray = field(default_factory=lambda: np.zeros(2))
    eta1_dot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    eta2_dot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    joints_dot: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.eta1, self.eta2, self.joints,
                               self.eta1_dot, self.eta2_dot, self.joints_dot]).astype(float)

    @classmethod
    def from_vector(cls, x) -> "SystemState":
        x = np.asarray(x, dtype=float)
        if x.shape != (STATE_SIZE,):
            raise ValueError(f"state vector must have {STATE_SIZE} entries")
        return cls(x[0:3].copy(), x[3:6].copy(), x[6:8].copy(),
                   x[8:11].copy(), x[11:14].copy(), x[14:16].copy())


def _as_vector(state) -> np.ndarray:
    if isinstance(state, SystemState):
        return state.to_vector()
    return np.ascontiguousarray(state, dtype=float)


def check_attitude(phi: float, theta: float) -> None:
    if math.cos(phi) * math.cos(theta) <= 0.0:
        raise ModelValidityError(f"cos(phi)cos(theta) <= 0 at phi={phi:.4g}, theta={theta:.4g}")


# --- vehicle ------------------------------------------------------------------

@dataclass(frozen=True)
class BodyWrench:
    T: float
    tau1: float = 0.0
    tau2: float = 0.0
    tau3: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.T, self.tau1, self.tau2, self.tau3])


@dataclass(frozen=True)
class InteractionWrench:
    F_body: np.ndarray
    M_body: np.ndarray
    F_inertial: np.ndarray

    @classmethod
    def zero(cls) -> "InteractionWrench":
        return cls(np.zeros(3), np.zeros(3), np.zeros(3))

    @classmethod
    def from_body(cls, F_body, M_body, eta2) -> "InteractionWrench":
        F_body = np.asarray(F_body, dtype=float)
        return cls(F_body, np.asarray(M_body, dtype=float), rotation_from_euler(eta2).T @ F_body)


def quadrotor_accelerations(state, wrench: BodyWrench, omega_bar: float,
                            interaction: InteractionWrench, params: QuadrotorParams) -> np.ndarray:
    """Vehicle translational and Euler-angle accelerations for a given interaction wrench."""
    x = _as_vector(state)
    phi, theta, psi = x[3:6]
    check_attitude(phi, theta)
    dphi, dth, dpsi = x[11:14]
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    m, T = params.m, wrench.T
    F, M = interaction.F_inertial, interaction.M_body
    Ix, Iy, Iz, Ir = params.Ix, params.Iy, params.Iz, params.Ir
    return np.array([
        (T * (cp * st * cf + sp * sf) + F[0]) / m,
        (T * (sp * st * cf - cp * sf) + F[1]) / m,
        (-m * params.g + T * ct * cf + F[2]) / m,
        (dth * dpsi * (Iy - Iz) - Ir * dth * omega_bar + wrench.tau1 + M[0]) / Ix,
        (dpsi * dphi * (Iz - Ix) + Ir * dphi * omega_bar + wrench.tau2 + M[1]) / Iy,
        (dth * dphi * (Ix - Iy) + wrench.tau3 + M[2]) / Iz,
    ])


# --- arm ------------------------------------------------------------------

@dataclass(frozen=True)
class RneWorkspace:
    """Per-link kinematic and force quantities, each in its own link frame."""

    omega: tuple
    omega_dot: tuple
    v: tuple
    v_dot: tuple
    vc_dot: tuple
    f: tuple  # force of link i-1 on link i
    n: tuple  # moment of link i-1 on link i about joint i
    g1: np.ndarray
    g2: np.ndarray


@dataclass(frozen=True)
class RneResult:
    workspace: RneWorkspace
    f10_0: np.ndarray  # joint-1 force in frame 0
    n10_0: np.ndarray
    torques: np.ndarray  # motor torques needed, friction included
    wrench: InteractionWrench
    M_eff: np.ndarray
    N_eff: np.ndarray


_R10_FIXED = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])


def _unpack_ws(ws: np.ndarray) -> RneWorkspace:
    rows = lambda *ix: tuple(ws[i].copy() for i in ix)
    return RneWorkspace(rows(K.W0, K.W1, K.W2), rows(K.WD0, K.WD1, K.WD2),
                        rows(K.V0, K.V1, K.V2), rows(K.VD0, K.VD1, K.VD2),
                        rows(K.VC1, K.VC2), rows(K.F1, K.F2), rows(K.N1, K.N2),
                        ws[K.G1].copy(), ws[K.G2].copy())


def rne_sweep(state, quad_accel, qdd_trial, quad: QuadrotorParams, links: LinkParams,
              gravity: bool = True) -> RneResult:
    """Recursive Newton-Euler pass for given vehicle accelerations.

    ``quad_accel`` is (eta1_ddot, eta2_ddot) in the inertial frame and as
    Euler-angle accelerations. The effective joint inertias M_i and bias
    terms N_i satisfy M_i * qdd_i = T_mi + N_i for the trial accelerations.
    """
    x = _as_vector(state)
    p = pack_params(quad, links)
    Rib = rotation_from_euler(x[3:6])
    a_b = Rib @ np.asarray(quad_accel[0], dtype=float)
    wd_b = np.asarray(quad_accel[1], dtype=float)
    qdd = np.asarray(qdd_trial, dtype=float)
    grav = quad.g if gravity else 0.0
    ws = np.empty((K.NWS, 3))
    out = np.empty(8)
    K.rne_kernel(Rib, x[11:14].copy(), wd_b, Rib @ x[8:11], a_b,
                 x[6:8].copy(), x[14:16].copy(), qdd, grav, p, ws, out)
    workspace = _unpack_ws(ws)

    scratch = np.empty((K.NWS, 3))
    col = np.empty(8)
    z3 = np.zeros(3)
    M_eff = np.empty(2)
    for i in range(2):
        unit = np.zeros(2)
        unit[i] = 1.0
        K.rne_kernel(Rib, z3, z3, z3, z3, x[6:8].copy(), np.zeros(2), unit, 0.0, p, scratch, col)
        M_eff[i] = col[6 + i]
    torques = out[6:8].copy()
    R10 = np.array([[math.cos(x[6]), 0.0, math.sin(x[6])],
                    [math.sin(x[6]), 0.0, -math.cos(x[6])],
                    [0.0, 1.0, 0.0]])
    return RneResult(
        workspace=workspace,
        f10_0=R10 @ workspace.f[0],
        n10_0=R10 @ workspace.n[0],
        torques=torques,
        wrench=InteractionWrench.from_body(out[0:3], out[3:6], x[3:6]),
        M_eff=M_eff,
        N_eff=M_eff * qdd - torques,
    )


def interaction_wrench(result: RneResult, eta2, L0: float) -> InteractionWrench:
    """Wrench of the arm on the vehicle from the joint-1 force and moment.

    Reaction of the force/moment the vehicle applies to link 1, carried from
    the joint to the body origin through the mount offset [0, 0, -L0].
    """
    fb = _R10_FIXED @ result.f10_0
    nb = _R10_FIXED @ result.n10_0
    pb0 = np.array([0.0, 0.0, -L0])
    return InteractionWrench.from_body(-fb, -(np.cross(pb0, fb) + nb), eta2)


# --- full system ------------------------------------------------------------

@dataclass(frozen=True)
class Controls:
    wrench: BodyWrench
    Tm1: float = 0.0
    Tm2: float = 0.0
    omega_bar: float = 0.0


class DynamicsModel:
    """Vehicle plus arm with parameters packed once for the compiled kernels."""

    def __init__(self, quad: QuadrotorParams | None = None, links: LinkParams | None = None,
                 arm: bool = True):
        self.quad = quad or QuadrotorParams()
        self.pristine_links = links or LinkParams()
        self.arm = arm
        self.set_payload(0.0)

    def set_payload(self, m_p: float) -> None:
        self.links = apply_payload(self.pristine_links, m_p)
        self.packed = pack_params(self.quad, self.links)

    def accelerations(self, state, controls: Controls) -> tuple[np.ndarray, InteractionWrench]:
        x = _as_vector(state)
        check_attitude(x[3], x[4])
        acc = np.empty(8)
        wrench = np.empty(6)
        w = controls.wrench
        status = K.coupled_accel(x, float(w.T), np.array([w.tau1, w.tau2, w.tau3], dtype=float),
                                 np.array([controls.Tm1, controls.Tm2], dtype=float),
                                 float(controls.omega_bar), self.packed, self.arm, acc, wrench)
        _raise_status(status)
        return acc, InteractionWrench.from_body(wrench[0:3], wrench[3:6], x[3:6])

    def state_derivative(self, state, controls: Controls) -> np.ndarray:
        x = _as_vector(state)
        acc, _ = self.accelerations(x, controls)
        return np.concatenate([x[8:16], acc])


def _raise_status(status: int) -> None:
    if status == K.STATUS_OK:
        return
    if status == K.STATUS_INVALID_ATTITUDE:
        raise ModelValidityError("cos(phi)cos(theta) <= 0")
    if status == K.STATUS_SINGULAR:
        raise ModelValidityError("coupled mass matrix is singular")
    raise FloatingPointError("non-finite state or acceleration")


def state_derivative(state, controls: Controls, quad: QuadrotorParams | None = None,
                     links: LinkParams | None = None, payload: float = 0.0) -> np.ndarray:
    model = DynamicsModel(quad, links)
    if payload:
        model.set_payload(payload)
    return model.state_derivative(state, controls)


def hover_equilibrium(quad: QuadrotorParams, links: LinkParams,
                      joints=(math.pi / 2, 0.0), position=(0.0, 0.0, 0.0)) -> tuple[np.ndarray, Controls]:
    """Level hover state and the inputs that hold it, arm at rest.

    Thrust and body moments cancel the static arm wrench, joint torques hold
    the arm against gravity.
    """
    x = np.zeros(STATE_SIZE)
    x[0:3] = position
    x[6:8] = joints
    res = rne_sweep(x, (np.zeros(3), np.zeros(3)), np.zeros(2), quad, links)
    Fi, Mb = res.wrench.F_inertial, res.wrench.M_body
    thrust = quad.m * quad.g - Fi[2]
    controls = Controls(BodyWrench(thrust, -Mb[0], -Mb[1], -Mb[2]),
                        float(res.torques[0]), float(res.torques[1]))
    return x, controls
