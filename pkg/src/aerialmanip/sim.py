"""Fixed-step closed-loop simulation of the vehicle, arm and controller."""
from __future__ import annotations

import io
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels as K
from .config import ConfigError, KeyValueFile, load_key_values
from .control.common import ControlInputs, Controller
from .control.dflc import DflcController
from .control.fbl import FblController
from .control.fmrlc import FmrlcController
from .dynamics import (STATE_NAMES, STATE_SIZE, InteractionWrench, LinkParams, ModelValidityError,
                       QuadrotorParams, apply_payload, pack_params, params_from_keys)
from .kinematics import ManipulatorGeometry, forward_kinematics
from .rotor import (Mixer, PwmMixer, RotorCalibration, load_calibration, max_speed_squared,
                    omega_bar, bench_calibration, speed_from_pwm)
from .trajectory import (CHANNELS, MISSION_DURATION, MissionProfile, PayloadEvent, hold_mission,
                         load_mission, pick_place_mission)

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e6
CONTROLLERS = ("fbl", "dflc", "fmrlc")


def rk4_step(f: Callable[[np.ndarray], np.ndarray], x, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of x' = f(x)."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class ScenarioConfig:
    mission: MissionProfile
    controller: str = "fmrlc"
    dt_physics: float = 1e-3
    dt_control: float = 2e-3
    duration: float = MISSION_DURATION
    actuation: str = "speeds"
    quad: QuadrotorParams = field(default_factory=QuadrotorParams)
    links: LinkParams = field(default_factory=LinkParams)
    calibration: RotorCalibration = field(default_factory=lambda: bench_calibration(uniform=True))
    initial_state: np.ndarray | None = None
    controller_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ValueError(f"controller must be one of {CONTROLLERS}")
        if self.actuation not in ("speeds", "pwm"):
            raise ValueError("actuation must be 'speeds' or 'pwm'")
        if not (self.dt_physics > 0.0 and self.dt_control > 0.0 and self.duration > 0.0):
            raise ValueError("time steps and duration must be positive")
        ratio = self.dt_control / self.dt_physics
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("dt_control must be an integer multiple of dt_physics")

    @property
    def substeps(self) -> int:
        return int(round(self.dt_control / self.dt_physics))

    def start_state(self) -> np.ndarray:
        if self.initial_state is not None:
            return np.array(self.initial_state, dtype=float)
        x = np.zeros(STATE_SIZE)
        init = self.mission.initial_values()
        x[0], x[1], x[2] = init["X"], init["Y"], init["Z"]
        x[5], x[6], x[7] = init["psi"], init["theta1"], init["theta2"]
        return x


def make_controller(cfg: ScenarioConfig) -> Controller:
    opts = dict(cfg.controller_options)
    if cfg.controller == "fbl":
        return FblController(cfg.quad, cfg.links, **opts)
    if cfg.controller == "dflc":
        return DflcController(**opts)
    return FmrlcController(**opts)


@dataclass(frozen=True)
class DivergenceRecord:
    time: float
    reason: str
    state: np.ndarray


LOG_COLUMNS = (
    ("time",) + STATE_NAMES
    + tuple(f"{c}_d" for c in CHANNELS) + ("phi_d", "theta_d")
    + ("T", "tau1", "tau2", "tau3", "Tm1", "Tm2", "omega_bar")
    + ("F_int_x", "F_int_y", "F_int_z", "M_int_x", "M_int_y", "M_int_z")
    + ("payload", "saturated")
)


@dataclass
class SimLog:
    columns: tuple
    data: np.ndarray
    events: list = field(default_factory=list)  # (time, label)
    divergence: DivergenceRecord | None = None

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    @property
    def time(self) -> np.ndarray:
        return self.data[:, 0]

    @property
    def diverged(self) -> bool:
        return self.divergence is not None

    def to_csv(self) -> str:
        """Header plus one row per control tick; the last column names events."""
        buf = io.StringIO()
        buf.write(",".join(self.columns + ("event",)) + "\n")
        labels: dict[int, list[str]] = {}
        times = self.time
        for t, label in self.events:
            idx = int(np.searchsorted(times, t - 1e-12))
            labels.setdefault(min(idx, len(times) - 1), []).append(label)
        for i, row in enumerate(self.data):
            buf.write(",".join(repr(float(v)) for v in row))
            buf.write("," + ";".join(labels.get(i, [])) + "\n")
        if self.divergence is not None:
            d = self.divergence
            buf.write(",".join([repr(float(d.time))] + [repr(float(v)) for v in d.state]
                               + [""] * (len(self.columns) - 1 - STATE_SIZE)))
            buf.write(f",divergence:{d.reason}\n")
        return buf.getvalue()

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())


class _Actuation:
    def __init__(self, cfg: ScenarioConfig):
        self.mode = cfg.actuation
        d = cfg.quad.d
        if self.mode == "speeds":
            self.mixer = Mixer(cfg.calibration, d, max_speed_squared(cfg.calibration))
        else:
            self.mixer = PwmMixer(cfg.calibration, d)
        self.cal = cfg.calibration

    def apply(self, wrench: np.ndarray) -> tuple[np.ndarray, float, bool]:
        """Realized wrench, omega_bar and saturation flag for a commanded wrench."""
        if self.mode == "speeds":
            res = self.mixer.allocate(wrench)
            w = np.sqrt(res.omega_sq)
            return self.mixer.realize(res.omega_sq), float(w[0] - w[1] + w[2] - w[3]), res.saturated
        cmd = self.mixer.allocate(wrench)
        speeds = speed_from_pwm(self.cal, cmd.u)
        return self.mixer.realize(cmd.u), omega_bar(speeds.omega), cmd.saturated or speeds.clamped


def run_scenario(cfg: ScenarioConfig, controller: Controller | None = None) -> SimLog:
    """Closed-loop run: reference, controller, mixer, then RK4 physics at a finer step.

    Controls are held over each control period. Payload changes take effect
    at the first control tick at or after the event time. Numerical blow-up
    or loss of the valid attitude region ends the run with a divergence record.
    """
    ctrl = controller or make_controller(cfg)
    ctrl.reset()
    act = _Actuation(cfg)
    quad = cfg.quad
    links_pristine = cfg.links
    payload: PayloadEvent | None = cfg.mission.payload
    packed = pack_params(quad, links_pristine)
    carried = 0.0

    n_ticks = int(math.floor(cfg.duration / cfg.dt_control + 1e-9)) + 1
    data = np.full((n_ticks, len(LOG_COLUMNS)), np.nan)
    events: list = []
    divergence = None

    x = cfg.start_state()
    accel = np.zeros(8)
    wrench6 = np.zeros(6)
    status = K.coupled_accel(x, quad.m * quad.g, np.zeros(3), np.zeros(2), 0.0, packed, True, accel, wrench6)
    interaction = InteractionWrench.from_body(wrench6[0:3], wrench6[3:6], x[3:6])
    wb_prev = 0.0
    tau_a = np.empty(3)
    tau_m = np.empty(2)
    n_sub = cfg.substeps
    rows = 0

    for k in range(n_ticks):
        t = k * cfg.dt_control
        if payload is not None:
            want = payload.mass if payload.pick <= t + 1e-12 < payload.place else 0.0
            if want != carried:
                carried = want
                packed = pack_params(quad, apply_payload(links_pristine, carried))
                events.append((t, "pick" if carried else "place"))
                log.info("t=%.3f payload %s", t, "picked" if carried else "placed")

        refs = cfg.mission.sample(t)
        try:
            out = ctrl.step(ControlInputs(t, x.copy(), refs, interaction, wb_prev, accel.copy()), cfg.dt_control)
        except (ValueError, ArithmeticError) as exc:
            divergence = DivergenceRecord(t, f"controller: {exc}", x.copy())
            break
        cmd = out.wrench.as_array()
        if not np.all(np.isfinite(cmd)) or not math.isfinite(out.Tm1) or not math.isfinite(out.Tm2):
            divergence = DivergenceRecord(t, "non-finite control", x.copy())
            break
        realized, wb, sat = act.apply(cmd)
        row = data[k]
        row[0] = t
        row[1:17] = x
        row[17:23] = [refs[c][0] for c in CHANNELS]
        row[23] = out.phi_d
        row[24] = out.theta_d
        row[25:29] = realized
        row[29] = out.Tm1
        row[30] = out.Tm2
        row[31] = wb
        row[32:35] = interaction.F_inertial
        row[35:38] = interaction.M_body
        row[38] = carried
        row[39] = float(sat)
        rows = k + 1

        tau_a[:] = realized[1:4]
        tau_m[0], tau_m[1] = out.Tm1, out.Tm2
        status, _ = K.rk4_kernel(x, cfg.dt_physics, n_sub, float(realized[0]), tau_a, tau_m, wb,
                                 packed, True, wrench6)
        if status == K.STATUS_OK:
            status = K.coupled_accel(x, float(realized[0]), tau_a, tau_m, wb, packed, True, accel, wrench6)
        if status != K.STATUS_OK or np.max(np.abs(x)) > DIVERGENCE_LIMIT:
            reason = {K.STATUS_INVALID_ATTITUDE: "attitude left valid region",
                      K.STATUS_SINGULAR: "singular mass matrix",
                      K.STATUS_NONFINITE: "non-finite state"}.get(status, "state magnitude above limit")
            divergence = DivergenceRecord(t + cfg.dt_control, reason, x.copy())
            break
        interaction = InteractionWrench.from_body(wrench6[0:3], wrench6[3:6], x[3:6])
        wb_prev = wb

    if divergence is not None:
        events.append((divergence.time, "divergence"))
        log.warning("run diverged at t=%.3f: %s", divergence.time, divergence.reason)
    return SimLog(LOG_COLUMNS, data[:rows].copy(), events, divergence)


def end_effector_trace(simlog: SimLog, geometry: ManipulatorGeometry) -> np.ndarray:
    """Rows of [t, x, y, z, phi, theta, psi] of the end effector."""
    out = np.empty((len(simlog.data), 7))
    for i, row in enumerate(simlog.data):
        x = row[1:17]
        pose = forward_kinematics(x[0:3], x[3:6], x[6:8], geometry)
        out[i, 0] = row[0]
        out[i, 1:4] = pose.position
        out[i, 4:7] = pose.orientation
    return out


# --- scenario files ---------------------------------------------------------------

def scenario_from_keys(kv: KeyValueFile, base_dir: str = ".") -> ScenarioConfig:
    """Build a scenario from a key-value file.

    Keys: controller, duration, dt_physics, dt_control, actuation, mission
    (``pick_place``, ``hover`` or a mission-file path), transition_duration,
    payload_mass / pick_time / place_time (``payload = none`` disables it),
    params (parameter file), calibration (calibration file), uniform_rotors.
    """
    def rel(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(base_dir, p)

    quad, links = QuadrotorParams(), LinkParams()
    if "params" in kv:
        quad, links = params_from_keys(load_key_values(rel(kv.get_str("params"))))
    geometry = links.geometry

    payload = None
    if kv.get_str("payload", "on").lower() not in ("none", "off", "0", "false"):
        if "payload_mass" in kv or kv.get_str("mission", "pick_place") == "pick_place":
            payload = PayloadEvent(kv.get_float("payload_mass", 0.15), kv.get_float("pick_time", 15.0),
                                   kv.get_float("place_time", 65.0))
            if payload.mass < 0.0 or payload.place < payload.pick:
                raise ConfigError(f"{kv.source}: payload needs mass >= 0 and place_time >= pick_time")

    kind = kv.get_str("mission", "pick_place")
    if kind == "pick_place":
        dur = kv.get_float("transition_duration", 10.0)
        mission = pick_place_mission(geometry, ((20.0, dur), (40.0, dur)), payload)
    elif kind == "hover":
        init = {c: kv.get_float(f"hover_{c}", 0.0) for c in CHANNELS}
        if "hover_theta1" not in kv:
            init["theta1"] = math.pi / 2
        mission = hold_mission(init, payload)
    else:
        mission = load_mission(rel(kind))
        if payload is not None:
            mission.payload = payload

    cal = bench_calibration(uniform=kv.get_bool("uniform_rotors", True))
    if "calibration" in kv:
        cal = load_calibration(rel(kv.get_str("calibration")))

    try:
        return ScenarioConfig(
            mission=mission,
            controller=kv.get_str("controller", "fmrlc").lower(),
            dt_physics=kv.get_float("dt_physics", 1e-3),
            dt_control=kv.get_float("dt_control", 2e-3),
            duration=kv.get_float("duration", MISSION_DURATION),
            actuation=kv.get_str("actuation", "speeds").lower(),
            quad=quad, links=links, calibration=cal,
        )
    except ValueError as exc:
        raise ConfigError(f"{kv.source}: {exc}") from exc


def load_scenario(path: str | os.PathLike) -> ScenarioConfig:
    kv = load_key_values(path)
    return scenario_from_keys(kv, os.path.dirname(os.path.abspath(path)))
