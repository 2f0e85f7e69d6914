"""Compiled inner loops for the coupled vehicle/arm dynamics.

Everything here works on flat float64 arrays so numba can compile it once.
The readable entry points live in :mod:`aerialmanip.dynamics`.

Parameter vector layout (see ``dynamics.pack_params``)::

    0 m   1 Ix  2 Iy  3 Iz  4 Ir  5 g
    6 L0  7 L1  8 L2  9 m1  10 m2 11 dcg1 12 dcg2 13 b1 14 b2
    15..23 link-1 inertia (row major)  24..32 link-2 inertia

State layout: X Y Z phi theta psi th1 th2, then the eight rates.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

NPARAM = 33
NWS = 20  # workspace rows, see rne_kernel

# workspace row indices
W0, WD0, V0, VD0 = 0, 1, 2, 3
W1, WD1, V1, VD1, VC1 = 4, 5, 6, 7, 8
W2, WD2, V2, VD2, VC2 = 9, 10, 11, 12, 13
F1, N1, F2, N2, G1, G2 = 14, 15, 16, 17, 18, 19

STATUS_OK = 0
STATUS_INVALID_ATTITUDE = 1
STATUS_SINGULAR = 2
STATUS_NONFINITE = 3


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _mv(R, v):
    out = np.empty(3)
    for i in range(3):
        out[i] = R[i, 0] * v[0] + R[i, 1] * v[1] + R[i, 2] * v[2]
    return out


@njit(cache=True)
def _mtv(R, v):
    """R.T @ v without forming the transpose."""
    out = np.empty(3)
    for i in range(3):
        out[i] = R[0, i] * v[0] + R[1, i] * v[1] + R[2, i] * v[2]
    return out


@njit(cache=True)
def rot_ib(phi, theta, psi):
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    R = np.empty((3, 3))
    R[0, 0] = cp * ct
    R[0, 1] = sp * ct
    R[0, 2] = -st
    R[1, 0] = -sp * cf + sf * st * cp
    R[1, 1] = cp * cf + sp * st * sf
    R[1, 2] = ct * sf
    R[2, 0] = sp * sf + cp * st * cf
    R[2, 1] = -cp * sf + sp * st * cf
    R[2, 2] = ct * cf
    return R


@njit(cache=True)
def _r0b():
    # rotation block of A^B_0: frame-0 vectors to body vectors
    R = np.zeros((3, 3))
    R[0, 2] = 1.0
    R[1, 0] = -1.0
    R[2, 1] = -1.0
    return R


@njit(cache=True)
def _r10(c1, s1):
    R = np.zeros((3, 3))
    R[0, 0] = c1
    R[0, 2] = s1
    R[1, 0] = s1
    R[1, 2] = -c1
    R[2, 1] = 1.0
    return R


@njit(cache=True)
def _r21(c2, s2):
    R = np.zeros((3, 3))
    R[0, 0] = c2
    R[0, 1] = -s2
    R[1, 0] = s2
    R[1, 1] = c2
    R[2, 2] = 1.0
    return R


@njit(cache=True)
def rne_kernel(Rib, w_b, wd_b, v_b, a_b, q, qd, qdd, grav, p, ws, out):
    """Two-sweep Newton-Euler pass over the two-link arm.

    Rib maps inertial to body components. w_b, wd_b are the body angular
    rate and its derivative; v_b, a_b the body-origin velocity and
    acceleration, both in body components. ``grav`` is the magnitude of
    gravity (0 disables it).

    out[0:3]  force of the arm on the vehicle, body frame
    out[3:6]  moment of the arm on the vehicle about the body origin
    out[6:8]  joint torques including viscous friction
    """
    L0, L1, L2 = p[6], p[7], p[8]
    m1, m2 = p[9], p[10]
    dcg1, dcg2 = p[11], p[12]
    I1 = p[15:24].reshape((3, 3))
    I2 = p[24:33].reshape((3, 3))

    R0b = _r0b()
    c1, s1 = math.cos(q[0]), math.sin(q[0])
    c2, s2 = math.cos(q[1]), math.sin(q[1])
    R10 = _r10(c1, s1)
    R21 = _r21(c2, s2)

    z = np.zeros(3)
    z[2] = 1.0
    r0 = np.zeros(3)
    r0[1] = L0
    r1 = np.zeros(3)
    r1[0] = L1
    rc1 = np.zeros(3)
    rc1[0] = -(L1 - dcg1)
    r2 = np.zeros(3)
    r2[0] = L2
    rc2 = np.zeros(3)
    rc2[0] = -(L2 - dcg2)

    # base link, rigidly attached to the body
    w0 = _mtv(R0b, w_b)
    wd0 = _mtv(R0b, wd_b)
    v0 = _mtv(R0b, v_b) + _cross(w0, r0)
    vd0 = _mtv(R0b, a_b) + _cross(wd0, r0) + _cross(w0, _cross(w0, r0))

    # link 1
    w1 = _mtv(R10, w0 + qd[0] * z)
    wd1 = _mtv(R10, wd0 + qdd[0] * z + _cross(w0, qd[0] * z))
    v1 = _mtv(R10, v0) + _cross(w1, r1)
    vd1 = _mtv(R10, vd0) + _cross(wd1, r1) + _cross(w1, _cross(w1, r1))
    vc1 = vd1 + _cross(wd1, rc1) + _cross(w1, _cross(w1, rc1))

    # link 2
    w2 = _mtv(R21, w1 + qd[1] * z)
    wd2 = _mtv(R21, wd1 + qdd[1] * z + _cross(w1, qd[1] * z))
    v2 = _mtv(R21, v1) + _cross(w2, r2)
    vd2 = _mtv(R21, vd1) + _cross(wd2, r2) + _cross(w2, _cross(w2, r2))
    vc2 = vd2 + _cross(wd2, rc2) + _cross(w2, _cross(w2, rc2))

    gI = np.zeros(3)
    gI[2] = -grav
    g1 = _mtv(R10, _mtv(R0b, _mv(Rib, gI)))
    g2 = _mtv(R21, g1)

    # inward sweep; F and N are the d'Alembert inertial force and moment
    Fi2 = -m2 * vc2
    Ni2 = -_mv(I2, wd2) - _cross(w2, _mv(I2, w2))
    f2 = -m2 * g2 - Fi2
    n2 = _cross(r2 + rc2, f2) - Ni2

    Fi1 = -m1 * vc1
    Ni1 = -_mv(I1, wd1) - _cross(w1, _mv(I1, w1))
    f2_in1 = _mv(R21, f2)
    f1 = f2_in1 - m1 * g1 - Fi1
    n1 = _mv(R21, n2) + _cross(r1 + rc1, f1) - _cross(rc1, f2_in1) - Ni1

    tau1 = _mv(R10, n1)[2] + p[13] * qd[0]
    tau2 = _mv(R21, n2)[2] + p[14] * qd[1]

    f10 = _mv(R10, f1)
    n10 = _mv(R10, n1)
    fb = _mv(R0b, f10)
    nb = _mv(R0b, n10)
    pb0 = np.zeros(3)
    pb0[2] = -L0
    mb = _cross(pb0, fb) + nb
    for k in range(3):
        out[k] = -fb[k]
        out[3 + k] = -mb[k]
    out[6] = tau1
    out[7] = tau2

    ws[W0] = w0
    ws[WD0] = wd0
    ws[V0] = v0
    ws[VD0] = vd0
    ws[W1] = w1
    ws[WD1] = wd1
    ws[V1] = v1
    ws[VD1] = vd1
    ws[VC1] = vc1
    ws[W2] = w2
    ws[WD2] = wd2
    ws[V2] = v2
    ws[VD2] = vd2
    ws[VC2] = vc2
    ws[F1] = f1
    ws[N1] = n1
    ws[F2] = f2
    ws[N2] = n2
    ws[G1] = g1
    ws[G2] = g2


@njit(cache=True)
def _solve(A, b):
    """Gaussian elimination with partial pivoting; returns (x, ok)."""
    n = b.shape[0]
    M = A.copy()
    x = b.copy()
    for col in range(n):
        piv = col
        best = abs(M[col, col])
        for r in range(col + 1, n):
            if abs(M[r, col]) > best:
                best = abs(M[r, col])
                piv = r
        if best < 1e-14:
            return x, False
        if piv != col:
            for k in range(n):
                tmp = M[col, k]
                M[col, k] = M[piv, k]
                M[piv, k] = tmp
            tmp = x[col]
            x[col] = x[piv]
            x[piv] = tmp
        for r in range(col + 1, n):
            f = M[r, col] / M[col, col]
            if f != 0.0:
                for k in range(col, n):
                    M[r, k] -= f * M[col, k]
                x[r] -= f * x[col]
    for r in range(n - 1, -1, -1):
        s = x[r]
        for k in range(r + 1, n):
            s -= M[r, k] * x[k]
        x[r] = s / M[r, r]
    return x, True


@njit(cache=True)
def gyro_terms(rates, omega_bar, p):
    Ix, Iy, Iz, Ir = p[1], p[2], p[3], p[4]
    dphi, dth, dpsi = rates[0], rates[1], rates[2]
    out = np.empty(3)
    out[0] = dth * dpsi * (Iy - Iz) - Ir * dth * omega_bar
    out[1] = dpsi * dphi * (Iz - Ix) + Ir * dphi * omega_bar
    out[2] = dth * dphi * (Ix - Iy)
    return out


@njit(cache=True)
def coupled_accel(x, thrust, tau_a, tau_m, omega_bar, p, arm, acc, wrench):
    """Solve the vehicle and arm accelerations simultaneously.

    acc receives the 8 accelerations, wrench the arm-on-vehicle wrench
    [F_B, M_B] evaluated at the solution. ``arm`` = False drops the arm
    entirely (joint accelerations are then zero).
    """
    m = p[0]
    phi, theta, psi = x[3], x[4], x[5]
    if math.cos(phi) * math.cos(theta) <= 0.0:
        return STATUS_INVALID_ATTITUDE
    Rib = rot_ib(phi, theta, psi)
    w_b = x[11:14].copy()
    gyro = gyro_terms(w_b, omega_bar, p)
    Idiag = p[1:4]

    if not arm:
        for k in range(3):
            acc[k] = thrust * Rib[2, k] / m
            acc[3 + k] = (gyro[k] + tau_a[k]) / Idiag[k]
            wrench[k] = 0.0
            wrench[3 + k] = 0.0
        acc[2] -= p[5]
        acc[6] = 0.0
        acc[7] = 0.0
        return STATUS_OK

    ws = np.empty((NWS, 3))
    v_b = _mv(Rib, x[8:11])
    q = x[6:8].copy()
    qd = x[14:16].copy()
    zero3 = np.zeros(3)
    zero2 = np.zeros(2)

    # bias: true rates and gravity, zero accelerations
    s0 = np.empty(8)
    rne_kernel(Rib, w_b, zero3, v_b, zero3, q, qd, zero2, p[5], p, ws, s0)

    # linear part: one sweep per unit acceleration, rates and gravity off
    J = np.empty((8, 8))
    col = np.empty(8)
    for k in range(8):
        a_lin = np.zeros(3)
        wd = np.zeros(3)
        qdd = np.zeros(2)
        if k < 3:
            a_in = np.zeros(3)
            a_in[k] = 1.0
            a_lin = _mv(Rib, a_in)
        elif k < 6:
            wd[k - 3] = 1.0
        else:
            qdd[k - 6] = 1.0
        rne_kernel(Rib, zero3, wd, zero3, a_lin, q, zero2, qdd, 0.0, p, ws, col)
        for r in range(8):
            J[r, k] = col[r]

    A = np.zeros((8, 8))
    b = np.empty(8)
    F0 = _mtv(Rib, s0[0:3])
    for r in range(3):
        for k in range(8):
            A[r, k] = -(Rib[0, r] * J[0, k] + Rib[1, r] * J[1, k] + Rib[2, r] * J[2, k])
        A[r, r] += m
        b[r] = thrust * Rib[2, r] + F0[r]
    b[2] -= m * p[5]
    for r in range(3):
        for k in range(8):
            A[3 + r, k] = -J[3 + r, k]
        A[3 + r, 3 + r] += Idiag[r]
        b[3 + r] = gyro[r] + tau_a[r] + s0[3 + r]
    for r in range(2):
        for k in range(8):
            A[6 + r, k] = J[6 + r, k]
        b[6 + r] = tau_m[r] - s0[6 + r]

    sol, ok = _solve(A, b)
    if not ok:
        return STATUS_SINGULAR
    for k in range(8):
        acc[k] = sol[k]
    # wrench at the solution from the affine map
    for r in range(6):
        s = s0[r]
        for k in range(8):
            s += J[r, k] * sol[k]
        wrench[r] = s
    for k in range(8):
        if not np.isfinite(acc[k]):
            return STATUS_NONFINITE
    return STATUS_OK


@njit(cache=True)
def derivative(x, thrust, tau_a, tau_m, omega_bar, p, arm, dx, wrench):
    acc = np.empty(8)
    status = coupled_accel(x, thrust, tau_a, tau_m, omega_bar, p, arm, acc, wrench)
    for k in range(8):
        dx[k] = x[8 + k]
        dx[8 + k] = acc[k]
    return status


@njit(cache=True)
def rk4_kernel(x, dt, nsteps, thrust, tau_a, tau_m, omega_bar, p, arm, wrench):
    """Advance x in place by nsteps RK4 steps with inputs held constant.

    Returns (status, steps_done). ``wrench`` holds the interaction wrench at
    the start of the final step.
    """
    n = x.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    wscratch = np.empty(6)
    for step in range(nsteps):
        st = derivative(x, thrust, tau_a, tau_m, omega_bar, p, arm, k1, wrench)
        if st != STATUS_OK:
            return st, step
        for i in range(n):
            tmp[i] = x[i] + 0.5 * dt * k1[i]
        st = derivative(tmp, thrust, tau_a, tau_m, omega_bar, p, arm, k2, wscratch)
        if st != STATUS_OK:
            return st, step
        for i in range(n):
            tmp[i] = x[i] + 0.5 * dt * k2[i]
        st = derivative(tmp, thrust, tau_a, tau_m, omega_bar, p, arm, k3, wscratch)
        if st != STATUS_OK:
            return st, step
        for i in range(n):
            tmp[i] = x[i] + dt * k3[i]
        st = derivative(tmp, thrust, tau_a, tau_m, omega_bar, p, arm, k4, wscratch)
        if st != STATUS_OK:
            return st, step
        for i in range(n):
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        for i in range(n):
            if not np.isfinite(x[i]):
                return STATUS_NONFINITE, step + 1
    return STATUS_OK, nsteps
