import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aerialmanip.control.common import ControlInputs, FilteredDerivative
from aerialmanip.control.fbl import (FBL_GAINS, FblController, FreeFallDemand, PidGains, PidLoop,
                                     desired_attitude)
from aerialmanip.dynamics import InteractionWrench, LinkParams, QuadrotorParams
from aerialmanip.sim import ScenarioConfig, run_scenario
from aerialmanip.trajectory import hold_mission

QUAD = QuadrotorParams()
# the controller carries its own arm model; a vanishing arm isolates the vehicle laws
NO_ARM = LinkParams(m1=1e-12, m2=1e-12)


def _refs(**vals):
    refs = {c: (0.0, 0.0, 0.0) for c in ("X", "Y", "Z", "psi", "theta1", "theta2")}
    refs["theta1"] = (math.pi / 2, 0.0, 0.0)
    refs.update({k: (v, 0.0, 0.0) if isinstance(v, float) else v for k, v in vals.items()})
    return refs


def _hover_state(**vals):
    x = np.zeros(16)
    x[6] = math.pi / 2
    names = {"Z": 2, "phi": 3, "theta": 4, "psi": 5, "theta1": 6, "theta2": 7}
    for k, v in vals.items():
        x[names[k]] = v
    return x


def _step(ctl, x, refs, dt=2e-3):
    return ctl.step(ControlInputs(0.0, x, refs, InteractionWrench.zero()), dt)


def test_default_gains():
    assert FBL_GAINS["Z"] == PidGains(16.0, 8.0, 0.01)
    assert FBL_GAINS["phi"] == PidGains(100.0, 8.0, 10.0)
    with pytest.raises(ValueError):
        PidGains(-1.0, 0.0, 0.0)


def test_desired_attitude_zero_demand():
    for psi in (0.0, 1.0, -2.5):
        assert desired_attitude((0.0, 0.0, 0.0), psi) == (0.0, 0.0, False)


def test_desired_attitude_forward_demand_pitches_forward():
    phi, theta, clamped = desired_attitude((1.0, 0.0, 0.0), 0.0)
    assert theta > 0.0 and phi == 0.0 and not clamped
    assert theta == pytest.approx(math.atan2(1.0, 9.81), abs=1e-15)


def test_desired_attitude_lateral_demand_rolls_negative():
    phi, theta, _ = desired_attitude((0.0, 1.0, 0.0), 0.0)
    assert phi < 0.0 and theta == 0.0


def test_desired_attitude_removes_interaction():
    a = desired_attitude((0.5, -0.2, 0.1), 0.3, (0.1, 0.05, -0.3))
    b = desired_attitude((0.4, -0.25, 0.4), 0.3)
    assert a[:2] == pytest.approx(b[:2], abs=1e-15)


def test_desired_attitude_free_fall_is_error():
    with pytest.raises(FreeFallDemand):
        desired_attitude((1.0, 0.0, -9.81), 0.0)


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(-1e3, 1e3), st.floats(-math.pi, math.pi))
def test_desired_attitude_always_defined(ax, ay, az, psi):
    if az + 9.81 == 0.0:
        return
    phi, theta, _ = desired_attitude((ax, ay, az), psi)
    assert -math.pi / 2 <= phi <= math.pi / 2 and math.isfinite(theta)


def test_pid_anti_windup():
    loop = PidLoop(PidGains(1.0, 0.0, 2.0), integral_limit=1.0)
    for _ in range(1000):
        loop.command(0.0, 10.0, 0.0, 0.01)
    assert loop.gains.Ki * loop.integral == 1.0
    loop.reset()
    assert loop.integral == 0.0


def test_perfect_tracking_hover_outputs_weight():
    ctl = FblController(QUAD, NO_ARM)
    out = _step(ctl, _hover_state(), _refs())
    assert out.wrench.T == pytest.approx(QUAD.m * QUAD.g, abs=1e-9)
    assert max(abs(out.wrench.tau1), abs(out.wrench.tau2), abs(out.wrench.tau3)) <= 1e-12
    assert abs(out.Tm1) <= 1e-9 and abs(out.Tm2) <= 1e-9
    assert abs(out.phi_d) <= 1e-15 and abs(out.theta_d) <= 1e-15


def test_height_error_example():
    # Kp_z * 0.1 * m + m g; the one-tick integral adds Ki * e * dt = 2e-6 N
    out = _step(FblController(QUAD, NO_ARM), _hover_state(), _refs(Z=0.1))
    assert out.wrench.T == pytest.approx(11.41 + 0.01 * 0.1 * 2e-3, abs=1e-9)


def test_hover_with_arm_carries_arm_weight():
    links = LinkParams()
    out = _step(FblController(QUAD, links), _hover_state(), _refs())
    assert out.wrench.T == pytest.approx((QUAD.m + links.arm_mass) * QUAD.g, rel=1e-12)
    assert out.Tm1 == pytest.approx(0.0, abs=1e-12)  # hanging arm needs no holding torque


def test_invalid_attitude_rejected():
    with pytest.raises(ValueError):
        _step(FblController(), _hover_state(phi=2.0), _refs())


@given(st.floats(-50, 50), st.floats(-0.5, 0.5))
def test_height_translation_invariance(c, e):
    a = _step(FblController(), _hover_state(Z=0.0), _refs(Z=e))
    b = _step(FblController(), _hover_state(Z=c), _refs(Z=c + e))
    assert b.wrench.T == pytest.approx(a.wrench.T, abs=1e-9)
    assert b.Tm1 == pytest.approx(a.Tm1, abs=1e-12) and b.Tm2 == pytest.approx(a.Tm2, abs=1e-12)


def test_filtered_derivative_tracks_ramp():
    f = FilteredDerivative()
    for k in range(500):
        v = f.update(0.3 * k * 2e-3, 2e-3)
    assert v == pytest.approx(0.3, rel=1e-9)


def test_closed_loop_errors_decay_exponentially():
    start = _hover_state(Z=-0.2, psi=0.1, theta1=math.pi / 2 - 0.1, theta2=0.1)
    cfg = ScenarioConfig(hold_mission({"theta1": math.pi / 2}), controller="fbl", duration=3.0,
                         initial_state=start)
    simlog = run_scenario(cfg)
    assert not simlog.diverged
    t = simlog.time
    window = (t >= 0.5) & (t <= 2.5)
    for ch, ref in (("Z", 0.0), ("psi", 0.0), ("theta1", math.pi / 2), ("theta2", 0.0)):
        e = np.abs(simlog.column(ch) - ref)[window]
        assert np.all(e > 0.0)
        y = np.log(e)
        slope, icept = np.polyfit(t[window], y, 1)
        resid = y - (slope * t[window] + icept)
        r2 = 1.0 - resid @ resid / np.sum((y - y.mean()) ** 2)
        assert slope < -2.0 and r2 > 0.99, (ch, slope, r2)
