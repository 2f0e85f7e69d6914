"""Rotor maps (PWM, speed, thrust, drag moment) and the control mixer.

Rotor numbering and signs follow a plus-configuration airframe: rotors 1 and 3
sit on the body x axis, 2 and 4 on the body y axis, and the odd rotors spin
opposite to the even ones.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, KeyValueFile, dump_key_values, load_key_values

GRAM_FORCE = 9.81e-3  # N per gram-force
PWM_MIN = 1000.0
PWM_MAX = 2000.0

# identification-rig fits, thrust in gram-force
BENCH_FIT = {
    "a": [420.5, 466.0, 411.4, 445.0],
    "b": [-4.06e5, -4.43e5, -3.92e5, -4.13e5],
    "c": [0.6566, 0.6029, 0.6805, 0.6119],
    "d": [-731.4, -674.4, -758.3, -660.5],
    "e": [1.658e-4, 1.348e-4, 1.72e-4, 1.41e-4],
    "h": [-0.1462, -0.1178, -0.1577, -0.126],
}
ROTOR_KF = [1.667e-5, 1.285e-5, 1.711e-5, 1.556e-5]
ROTOR_KM = [3.965e-7, 2.847e-7, 4.404e-7, 3.170e-7]
DEFAULT_KF = 1.667e-5
DEFAULT_KM = 3.965e-7

_UNITS = {
    "a": "rad^2/s^2/us", "b": "rad^2/s^2", "c": "N/us", "d": "N",
    "e": "N*m/us", "h": "N*m", "KF": "kg*m/rad^2", "KM": "kg*m^2/rad^2",
}


class SingularMixerError(ValueError):
    pass


def _vec4(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (4,):
        raise ValueError("expected four per-rotor values")
    return arr


@dataclass(frozen=True)
class RotorCalibration:
    """Per-rotor coefficients in SI units (thrust fit already in newtons)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray
    h: np.ndarray
    KF: np.ndarray
    KM: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "c", "d", "e", "h", "KF", "KM"):
            object.__setattr__(self, name, _vec4(getattr(self, name)))
        for name in ("a", "c", "e", "KF", "KM"):
            if np.any(getattr(self, name) <= 0.0):
                raise ValueError(f"calibration coefficient {name} must be positive")

    @classmethod
    def from_gram_force(cls, a, b, c_gf, d_gf, e, h, KF, KM) -> "RotorCalibration":
        return cls(a, b, np.asarray(c_gf, float) * GRAM_FORCE, np.asarray(d_gf, float) * GRAM_FORCE, e, h, KF, KM)

    def with_uniform_constants(self, KF: float, KM: float) -> "RotorCalibration":
        return RotorCalibration(self.a, self.b, self.c, self.d, self.e, self.h,
                                np.full(4, KF), np.full(4, KM))


def bench_calibration(uniform: bool = False) -> RotorCalibration:
    """Identified calibration of the four rotor assemblies.

    With ``uniform`` the single K_F/K_M pair used by the simulation replaces
    the per-rotor constants.
    """
    cal = RotorCalibration.from_gram_force(
        BENCH_FIT["a"], BENCH_FIT["b"], BENCH_FIT["c"], BENCH_FIT["d"],
        BENCH_FIT["e"], BENCH_FIT["h"], ROTOR_KF, ROTOR_KM)
    return cal.with_uniform_constants(DEFAULT_KF, DEFAULT_KM) if uniform else cal


def calibration_from_keys(kv: KeyValueFile) -> RotorCalibration:
    unit = kv.get_str("thrust_unit", "gf").strip().lower()
    if unit not in ("gf", "n"):
        raise ConfigError(f"{kv.source}: thrust_unit must be 'gf' or 'N'")
    vals = {k: kv.get_floats(k, 4) for k in ("a", "b", "c", "d", "e", "h", "KF", "KM")}
    if unit == "gf":
        vals["c"] = [v * GRAM_FORCE for v in vals["c"]]
        vals["d"] = [v * GRAM_FORCE for v in vals["d"]]
    try:
        return RotorCalibration(**vals)
    except ValueError as exc:
        raise ConfigError(f"{kv.source}: {exc}") from exc


def load_calibration(path: str | os.PathLike) -> RotorCalibration:
    return calibration_from_keys(load_key_values(path))


def dump_calibration(cal: RotorCalibration) -> str:
    entries = {"thrust_unit": "N"}
    entries.update({k: [float(x) for x in getattr(cal, k)] for k in _UNITS})
    return dump_key_values(entries, _UNITS, header=["rotor calibration, SI units",
                                                    f"thrust fit converted from gram-force with {GRAM_FORCE} N/gf"])


# --- per-rotor maps -------------------------------------------------------

@dataclass(frozen=True)
class RotorSpeeds:
    omega: np.ndarray
    clamped: bool = False


@dataclass(frozen=True)
class PwmCommand:
    u: np.ndarray
    saturated: bool = False


def speed_from_pwm(cal: RotorCalibration, pwm) -> RotorSpeeds:
    sq = cal.a * _vec4(pwm) + cal.b
    clamped = bool(np.any(sq < 0.0))
    return RotorSpeeds(np.sqrt(np.maximum(sq, 0.0)), clamped)


def thrust_from_speed(cal: RotorCalibration, omega) -> np.ndarray:
    return cal.KF * _vec4(omega) ** 2


def moment_from_speed(cal: RotorCalibration, omega) -> np.ndarray:
    return cal.KM * _vec4(omega) ** 2


def drag_moment_from_power(power, omega):
    """Drag moment from shaft power: P = M * Omega."""
    omega_arr = np.asarray(omega, dtype=float)
    if np.any(omega_arr == 0.0):
        raise ZeroDivisionError("drag moment undefined at zero rotor speed")
    out = np.asarray(power, dtype=float) / omega_arr
    return float(out) if out.ndim == 0 else out


def omega_bar(omega) -> float:
    w = _vec4(omega)
    return float(w[0] - w[1] + w[2] - w[3])


# --- PWM path -------------------------------------------------------------

def pwm_matrices(cal: RotorCalibration, d: float) -> tuple[np.ndarray, np.ndarray]:
    """G and A with [T, tau1, tau2, tau3] = G u + A."""
    c, dd, e, h = cal.c, cal.d, cal.e, cal.h
    G = np.array([
        [c[0], c[1], c[2], c[3]],
        [0.0, -d * c[1], 0.0, d * c[3]],
        [-d * c[0], 0.0, d * c[2], 0.0],
        [-e[0], e[1], -e[2], e[3]],
    ])
    A = np.array([
        dd.sum(),
        d * (dd[3] - dd[1]),
        d * (dd[2] - dd[0]),
        -h[0] + h[1] - h[2] + h[3],
    ])
    return G, A


def wrench_from_pwm(cal: RotorCalibration, pwm, d: float) -> np.ndarray:
    G, A = pwm_matrices(cal, d)
    return G @ _vec4(pwm) + A


def pwm_from_wrench(cal: RotorCalibration, wrench, d: float) -> PwmCommand:
    G, A = pwm_matrices(cal, d)
    if abs(np.linalg.det(G)) < 1e-300 or np.linalg.cond(G) > 1e14:
        raise SingularMixerError("PWM allocation matrix is singular")
    u = np.linalg.solve(G, _vec4(wrench) - A)
    sat = bool(np.any(u < PWM_MIN) or np.any(u > PWM_MAX))
    return PwmCommand(np.clip(u, PWM_MIN, PWM_MAX), sat)


# --- speed path -----------------------------------------------------------

def mixer_matrix(cal: RotorCalibration, d: float) -> np.ndarray:
    kf, km = cal.KF, cal.KM
    return np.array([
        [kf[0], kf[1], kf[2], kf[3]],
        [0.0, -d * kf[1], 0.0, d * kf[3]],
        [-d * kf[0], 0.0, d * kf[2], 0.0],
        [-km[0], km[1], -km[2], km[3]],
    ])


def wrench_from_speeds(cal: RotorCalibration, omega, d: float) -> np.ndarray:
    return mixer_matrix(cal, d) @ (_vec4(omega) ** 2)


@dataclass(frozen=True)
class MixerResult:
    omega_sq: np.ndarray
    saturated: bool = False

    @property
    def omega(self) -> np.ndarray:
        return np.sqrt(self.omega_sq)


def mixer_speeds_from_wrench(cal: RotorCalibration, wrench, d: float,
                             omega_sq_max: float | None = None) -> MixerResult:
    """Squared rotor speeds realizing [T, tau1, tau2, tau3].

    Negative squares are clamped to zero, and to ``omega_sq_max`` from above
    when given; either clamp sets the saturation flag.
    """
    M = mixer_matrix(cal, d)
    if abs(np.linalg.det(M)) < 1e-300 or np.linalg.cond(M) > 1e14:
        raise SingularMixerError("mixer matrix is singular")
    sq = np.linalg.solve(M, _vec4(wrench))
    sat = bool(np.any(sq < 0.0))
    sq = np.maximum(sq, 0.0)
    if omega_sq_max is not None:
        sat = sat or bool(np.any(sq > omega_sq_max))
        sq = np.minimum(sq, omega_sq_max)
    return MixerResult(sq, sat)


def max_speed_squared(cal: RotorCalibration) -> float:
    """Squared speed of the weakest rotor at full PWM, used as an upper clamp."""
    return float(np.min(cal.a * PWM_MAX + cal.b))


class Mixer:
    """Speed-path allocation with the inverse factored once."""

    def __init__(self, cal: RotorCalibration, d: float, omega_sq_max: float | None = None):
        self.cal = cal
        self.d = d
        self.matrix = mixer_matrix(cal, d)
        if np.linalg.cond(self.matrix) > 1e14:
            raise SingularMixerError("mixer matrix is singular")
        self.inverse = np.linalg.inv(self.matrix)
        self.omega_sq_max = omega_sq_max

    def allocate(self, wrench) -> MixerResult:
        sq = self.inverse @ np.asarray(wrench, dtype=float)
        lo = sq < 0.0
        sat = bool(lo.any())
        sq[lo] = 0.0
        if self.omega_sq_max is not None:
            hi = sq > self.omega_sq_max
            if hi.any():
                sat = True
                sq[hi] = self.omega_sq_max
        return MixerResult(sq, sat)

    def realize(self, omega_sq) -> np.ndarray:
        return self.matrix @ omega_sq


class PwmMixer:
    """PWM-path allocation through the linear rotor fits."""

    def __init__(self, cal: RotorCalibration, d: float):
        self.cal = cal
        self.G, self.A = pwm_matrices(cal, d)
        if np.linalg.cond(self.G) > 1e14:
            raise SingularMixerError("PWM allocation matrix is singular")
        self.G_inv = np.linalg.inv(self.G)

    def allocate(self, wrench) -> PwmCommand:
        u = self.G_inv @ (np.asarray(wrench, dtype=float) - self.A)
        sat = bool(np.any(u < PWM_MIN) or np.any(u > PWM_MAX))
        return PwmCommand(np.clip(u, PWM_MIN, PWM_MAX), sat)

    def realize(self, pwm) -> np.ndarray:
        return self.G @ pwm + self.A
