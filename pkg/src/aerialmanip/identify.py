"""Straight-line fits of rotor bench data against the PWM command.

Each rotor gets three fits: squared speed, thrust, and drag moment, all
linear in the pulse width. The drag moment is not measured directly; it is
derived from shaft power and speed before fitting.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, dump_key_values
from .rotor import GRAM_FORCE, RotorCalibration, drag_moment_from_power

REQUIRED_COLUMNS = ("pwm", "omega_sq", "thrust", "power")


class IdentificationError(ValueError):
    """Bench data cannot determine a line (too few distinct PWM values)."""


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    rms: float
    n: int

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept


@dataclass(frozen=True)
class RotorFit:
    rotor: int
    speed_sq: LineFit  # a, b
    thrust: LineFit  # c, d in the input thrust unit
    moment: LineFit  # e, h
    thrust_unit: str = "gf"


def fit_line(x, y) -> LineFit:
    """Ordinary least squares y = slope * x + intercept.

    The regressor is centred before solving, which keeps the intercept
    accurate when x sits far from zero (PWM around 1000-2000).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("fit data must be finite")
    if np.unique(x).size < 2:
        raise IdentificationError("need at least two distinct PWM values")
    xm = x.mean()
    A = np.column_stack([x - xm, np.ones_like(x)])
    (slope, level), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * (x - xm) + level)
    return LineFit(float(slope), float(level - slope * xm), float(np.sqrt(np.mean(resid ** 2))), x.size)


def fit_rotor(pwm, omega_sq, thrust, power, rotor: int = 1, thrust_unit: str = "gf") -> RotorFit:
    omega_sq = np.asarray(omega_sq, dtype=float)
    if np.any(omega_sq <= 0.0):
        raise IdentificationError("power samples need a spinning rotor (omega_sq > 0)")
    moment = drag_moment_from_power(np.asarray(power, dtype=float), np.sqrt(omega_sq))
    return RotorFit(rotor, fit_line(pwm, omega_sq), fit_line(pwm, thrust), fit_line(pwm, moment), thrust_unit)


def read_bench_csv(path: str | os.PathLike) -> dict[int, dict[str, np.ndarray]]:
    """Columns pwm, omega_sq, thrust, power and an optional rotor index.

    Rows without a rotor column are assigned to rotor 1.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
            header = rows and list(rows[0].keys())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    header = [h.strip() for h in header]
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise ConfigError(f"{path}: missing column(s) {', '.join(missing)}")
    groups: dict[int, dict[str, list[float]]] = {}
    for lineno, row in enumerate(rows, 2):
        row = {k.strip(): v for k, v in row.items() if k is not None}
        try:
            rotor = int(row.get("rotor") or 1)
            vals = {c: float(row[c]) for c in REQUIRED_COLUMNS}
        except (TypeError, ValueError):
            raise ConfigError(f"{path}:{lineno}: non-numeric entry") from None
        if not 1 <= rotor <= 4:
            raise ConfigError(f"{path}:{lineno}: rotor index must be 1..4")
        g = groups.setdefault(rotor, {c: [] for c in REQUIRED_COLUMNS})
        for c in REQUIRED_COLUMNS:
            g[c].append(vals[c])
    return {r: {c: np.array(v) for c, v in g.items()} for r, g in sorted(groups.items())}


def fit_bench_data(data: dict[int, dict[str, np.ndarray]], thrust_unit: str = "gf") -> list[RotorFit]:
    fits = []
    for rotor, cols in data.items():
        try:
            fits.append(fit_rotor(cols["pwm"], cols["omega_sq"], cols["thrust"], cols["power"],
                                  rotor, thrust_unit))
        except IdentificationError as exc:
            raise IdentificationError(f"rotor {rotor}: {exc}") from None
    return fits


def format_fits(fits: list[RotorFit]) -> str:
    """Key-value report; with all four rotors it loads as a calibration file."""
    unit = fits[0].thrust_unit if fits else "gf"
    entries: dict[str, object] = {"thrust_unit": unit, "rotors": [f.rotor for f in fits]}
    units = {
        "a": "rad^2/s^2/us", "b": "rad^2/s^2", "c": f"{unit}/us", "d": unit,
        "e": "N*m/us", "h": "N*m",
        "rms_speed_sq": "rad^2/s^2", "rms_thrust": unit, "rms_moment": "N*m",
    }
    for key, attr, part in (("a", "speed_sq", "slope"), ("b", "speed_sq", "intercept"),
                            ("c", "thrust", "slope"), ("d", "thrust", "intercept"),
                            ("e", "moment", "slope"), ("h", "moment", "intercept")):
        entries[key] = [getattr(getattr(f, attr), part) for f in fits]
    for key, attr in (("rms_speed_sq", "speed_sq"), ("rms_thrust", "thrust"), ("rms_moment", "moment")):
        entries[key] = [getattr(f, attr).rms for f in fits]
    entries["samples"] = [f.speed_sq.n for f in fits]
    return dump_key_values(entries, units, header=["rotor bench fits, value = slope * pwm + intercept"])


def calibration_from_fits(fits: list[RotorFit], KF, KM) -> RotorCalibration:
    """Combine four rotor fits with the quadratic-law constants."""
    if sorted(f.rotor for f in fits) != [1, 2, 3, 4]:
        raise IdentificationError("a calibration needs fits for rotors 1..4")
    fits = sorted(fits, key=lambda f: f.rotor)
    scale = GRAM_FORCE if fits[0].thrust_unit.lower() == "gf" else 1.0
    return RotorCalibration(
        [f.speed_sq.slope for f in fits], [f.speed_sq.intercept for f in fits],
        [f.thrust.slope * scale for f in fits], [f.thrust.intercept * scale for f in fits],
        [f.moment.slope for f in fits], [f.moment.intercept for f in fits], KF, KM)
