"""Direct fuzzy control: eight PD-like Mamdani loops with fixed scaling gains."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dynamics import BodyWrench
from ..fuzzy import FuzzyVariable, MamdaniController, RuleBase2D
from .common import ControlInputs, ControlOutput, Controller, FilteredDerivative

N, Z, P = -1.0, 0.0, 1.0
# rows: error N/Z/P, columns: error rate N/Z/P
DFLC_RULES = (
    (N, N, Z),
    (N, Z, P),
    (Z, P, P),
)
ERROR_VAR = FuzzyVariable(-1.0, 1.0, 3)
RATE_VAR = FuzzyVariable(-3.0, 3.0, 3)
OUTPUT_WIDTH = 2.0

LOOPS = ("x", "y", "z", "phi", "theta", "psi", "theta1", "theta2")


@dataclass(frozen=True)
class DflcGains:
    Ke: float
    Kc: float
    Ku: float

    def __post_init__(self):
        if min(self.Ke, self.Kc, self.Ku) < 0.0:
            raise ValueError("scaling gains must be non-negative")


DFLC_GAINS = {
    "x": DflcGains(0.007, 0.05, 5.0),
    "y": DflcGains(0.007, 0.05, 5.0),
    "z": DflcGains(1.0, 0.3, 16.5),
    "psi": DflcGains(1.0, 0.5, 0.2),
    "phi": DflcGains(0.5, 0.5, 9.0),
    "theta": DflcGains(0.5, 0.5, 10.0),
    "theta1": DflcGains(2.0, 0.05, 4.0),
    "theta2": DflcGains(5.0, 0.3, 0.3),
}
THRUST_OFFSET = 7.85  # N


def dflc_rule_base() -> RuleBase2D:
    return RuleBase2D(DFLC_RULES)


@dataclass
class DflcLoop:
    gains: DflcGains
    offset: float = 0.0
    engine: MamdaniController = field(default_factory=lambda: MamdaniController(
        ERROR_VAR, RATE_VAR, dflc_rule_base(), OUTPUT_WIDTH))

    def step(self, e: float, c: float) -> float:
        g = self.gains
        return g.Ku * self.engine.evaluate(g.Ke * e, g.Kc * c) + self.offset


def body_frame_error(eX: float, eY: float, eX_dot: float, eY_dot: float, psi: float):
    """Inertial X/Y errors rotated into the heading frame, small tilt assumed.

    Returns (x~, x~_dot, y~, y~_dot). The lateral component is taken with the
    sign that makes a positive value call for positive roll.
    """
    c, s = math.cos(psi), math.sin(psi)
    return (eX * c + eY * s, eX_dot * c + eY_dot * s,
            eX * s - eY * c, eX_dot * s - eY_dot * c)


class DflcController(Controller):
    name = "dflc"

    def __init__(self, gains: dict | None = None, offset: float = THRUST_OFFSET):
        gains = {**DFLC_GAINS, **(gains or {})}
        self.loops = {k: DflcLoop(gains[k], offset if k == "z" else 0.0) for k in LOOPS}
        self.rates = {k: FilteredDerivative() for k in ("X", "Y", "z", "phi", "theta", "psi", "theta1", "theta2")}

    def reset(self) -> None:
        for f in self.rates.values():
            f.reset()

    def outer_position_loops(self, ex, ex_dot, ey, ey_dot) -> tuple[float, float]:
        """Desired (theta, phi) from body-frame position errors."""
        return self.loops["x"].step(ex, ex_dot), self.loops["y"].step(ey, ey_dot)

    def step(self, inp: ControlInputs, dt: float) -> ControlOutput:
        x = inp.state
        r = inp.refs
        eX = r["X"][0] - x[0]
        eY = r["Y"][0] - x[1]
        ex, ex_dot, ey, ey_dot = body_frame_error(
            eX, eY, self.rates["X"].update(eX, dt), self.rates["Y"].update(eY, dt), x[5])
        theta_d, phi_d = self.outer_position_loops(ex, ex_dot, ey, ey_dot)

        errors = {
            "z": r["Z"][0] - x[2],
            "phi": phi_d - x[3],
            "theta": theta_d - x[4],
            "psi": r["psi"][0] - x[5],
            "theta1": r["theta1"][0] - x[6],
            "theta2": r["theta2"][0] - x[7],
        }
        out = {k: self.loops[k].step(e, self.rates[k].update(e, dt)) for k, e in errors.items()}
        return ControlOutput(BodyWrench(out["z"], out["phi"], out["theta"], out["psi"]),
                             out["theta1"], out["theta2"], phi_d, theta_d)
