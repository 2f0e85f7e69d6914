"""Command-line entry point: simulate, fit, plan, mixer.

Exit status is 0 on success (a diverged run still counts as a completed
simulation), 2 for malformed or unreadable inputs.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .config import ConfigError
from .dynamics import QuadrotorParams
from .identify import IdentificationError, fit_bench_data, format_fits, read_bench_csv
from .rotor import (Mixer, PwmMixer, load_calibration, max_speed_squared, omega_bar,
                    bench_calibration)
from .sim import CONTROLLERS, end_effector_trace, load_scenario, run_scenario
from .trajectory import CHANNELS, MISSION_DURATION, format_mission, load_mission, sample_mission, pick_place_mission

log = logging.getLogger("aerialmanip")

EXIT_OK = 0
EXIT_BAD_INPUT = 2


def _setup_logging() -> None:
    level = os.environ.get("AMS_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _csv_table(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    cfg = load_scenario(args.scenario)
    if args.controller:
        cfg.controller = args.controller
    # the closed loop draws no random numbers; --seedless is accepted for scripts that pass it
    log.info("running %s for %.1f s", cfg.controller, cfg.duration)
    simlog = run_scenario(cfg)
    simlog.write_csv(args.out)
    if args.trace:
        trace = end_effector_trace(simlog, cfg.links.geometry)
        _write_text(args.trace, _csv_table(("time", "x", "y", "z", "phi", "theta", "psi"), trace))
    if args.plot_dir:
        os.makedirs(args.plot_dir, exist_ok=True)
        t = simlog.time
        for name in simlog.columns[1:]:
            _write_text(os.path.join(args.plot_dir, f"{name}.csv"),
                        _csv_table(("time", name), np.column_stack([t, simlog.column(name)])))
    if simlog.diverged:
        d = simlog.divergence
        print(f"diverged at t={d.time:.3f} s: {d.reason}")
    else:
        print(f"completed {simlog.time[-1]:.3f} s, {len(simlog.data)} samples")
    return EXIT_OK


def cmd_fit(args) -> int:
    fits = fit_bench_data(read_bench_csv(args.data), args.thrust_unit)
    _write_text(args.out, format_fits(fits))
    for f in fits:
        print(f"rotor {f.rotor}: a={f.speed_sq.slope:.6g} b={f.speed_sq.intercept:.6g} "
              f"c={f.thrust.slope:.6g} d={f.thrust.intercept:.6g} "
              f"e={f.moment.slope:.6g} h={f.moment.intercept:.6g}")
    return EXIT_OK


def cmd_plan(args) -> int:
    if args.mission:
        mission = load_mission(args.mission)
    else:
        mission = pick_place_mission(moves=((20.0, args.transition), (40.0, args.transition)))
    duration = args.duration if args.duration is not None else mission.end_time
    if args.mission is None and args.duration is None:
        duration = MISSION_DURATION
    if args.mission_out:
        _write_text(args.mission_out, format_mission(mission))
    header = ["time"] + [f"{c}{s}" for c in CHANNELS for s in ("", "_dot", "_ddot")]
    if duration <= 0.0:
        times = np.empty(0)
    else:
        n = int(np.floor(duration / args.dt + 1e-9))
        times = np.arange(n + 1) * args.dt
    _write_text(args.out, _csv_table(header, sample_mission(mission, times)))
    return EXIT_OK


def cmd_mixer(args) -> int:
    cal = load_calibration(args.calibration) if args.calibration else bench_calibration(uniform=not args.per_rotor)
    d = args.arm if args.arm is not None else QuadrotorParams().d
    wrench = np.array([args.thrust, args.tau1, args.tau2, args.tau3])
    speeds = Mixer(cal, d, max_speed_squared(cal)).allocate(wrench)
    pwm = PwmMixer(cal, d).allocate(wrench)
    lines = ["rotor,omega_sq,omega,pwm"]
    for j in range(4):
        lines.append(",".join([str(j + 1)] + [repr(float(v[j])) for v in (speeds.omega_sq, speeds.omega, pwm.u)]))
    lines.append(f"# omega_bar = {omega_bar(speeds.omega)!r}")
    lines.append(f"# speed saturation = {speeds.saturated}, pwm saturation = {pwm.saturated}")
    text = "\n".join(lines) + "\n"
    if args.out:
        _write_text(args.out, text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aerialmanip", description="Quadrotor-manipulator simulation tools")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario file and write the CSV log")
    s.add_argument("--scenario", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--controller", choices=CONTROLLERS)
    s.add_argument("--seedless", action="store_true", help="accepted for compatibility; runs are deterministic")
    s.add_argument("--trace", help="also write the end-effector pose trace here")
    s.add_argument("--plot-dir", help="write one time,value CSV per logged channel")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit rotor bench data (pwm, omega_sq, thrust, power)")
    f.add_argument("--data", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--thrust-unit", choices=("gf", "N"), default="gf")
    f.set_defaults(func=cmd_fit)

    pl = sub.add_parser("plan", help="write a mission file and its sampled reference trajectory")
    pl.add_argument("--out", required=True, help="sampled trajectory CSV")
    pl.add_argument("--mission", help="mission file to sample instead of the pick/place mission")
    pl.add_argument("--mission-out", help="write the mission rows here")
    pl.add_argument("--dt", type=float, default=0.01)
    pl.add_argument("--duration", type=float)
    pl.add_argument("--transition", type=float, default=10.0, help="duration of each transition, s")
    pl.set_defaults(func=cmd_plan)

    m = sub.add_parser("mixer", help="rotor speeds and PWM for a body wrench")
    m.add_argument("--thrust", type=float, required=True)
    m.add_argument("--tau1", type=float, default=0.0)
    m.add_argument("--tau2", type=float, default=0.0)
    m.add_argument("--tau3", type=float, default=0.0)
    m.add_argument("--calibration")
    m.add_argument("--per-rotor", action="store_true", help="use per-rotor K_F/K_M instead of the shared pair")
    m.add_argument("--arm", type=float, help="rotor arm length d, m")
    m.add_argument("--out")
    m.set_defaults(func=cmd_mixer)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if getattr(args, "dt", 1.0) <= 0.0:
        print("error: --dt must be positive", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        return args.func(args)
    except (ConfigError, IdentificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
