"""Fuzzy model-reference learning control.

Each actuated channel runs a two-input fuzzy controller whose output centres
start at zero and are shifted online. A first-order reference model defines
the desired response; a fixed fuzzy inverse model turns the model-following
error into a correction p that is added to the centres of the rules that
fired on the previous tick. Input gains are periodically rescaled to the
recent input range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dynamics import BodyWrench
from ..fuzzy import FuzzyVariable, RuleBase2D, active_rules, defuzzify_cog, infer
from .common import ControlInputs, ControlOutput, Controller, FilteredDerivative
from .dflc import DFLC_GAINS, DflcLoop, body_frame_error

N_SETS = 11
UNIT_VAR = FuzzyVariable(-1.0, 1.0, N_SETS)
OUTPUT_WIDTH = 0.4
GAIN_CAP_FACTOR = 10.0

LOOPS = ("Z", "phi", "theta", "psi", "theta1", "theta2")

# rows: y_e set k = -5..5, columns: y_c set s = -5..5
INVERSE_MODEL_TABLE = (
    (-1, -1, -1, -1, -1, -1, -0.8, -0.6, -0.4, -0.2, 0),
    (-1, -1, -1, -1, -1, -0.8, -0.6, -0.4, -0.2, 0, 0.2),
    (-1, -1, -1, -1, -0.8, -0.6, -0.4, -0.2, 0, 0.2, 0.4),
    (-1, -1, -1, -0.8, -0.6, -0.4, -0.2, 0, 0.2, 0.4, 0.6),
    (-1, -1, -0.8, -0.6, -0.4, -0.2, 0, 0.2, 0.4, 0.6, 0.8),
    (-1, -0.8, -0.6, -0.4, -0.2, 0, 0.2, 0.4, 0.6, 0.8, 1),
    (-0.8, -0.6, -0.4, -0.2, 0, 0.2, 0.4, 0.6, 0.8, 1, 1),
    (-0.6, -0.4, -0.2, 0, 0.2, 0.4, 0.6, 0.8, 1, 1, 1),
    (-0.4, -0.2, 0, 0.2, 0.4, 0.6, 0.8, 1, 1, 1, 1),
    (-0.2, 0, 0.2, 0.4, 0.6, 0.8, 1, 1, 1, 1, 1),
    (0, 0.2, 0.4, 0.6, 0.8, 1, 1, 1, 1, 1, 1),
)


def inverse_model_rule_base() -> RuleBase2D:
    return RuleBase2D(INVERSE_MODEL_TABLE)


def table_entry(k: int, s: int) -> float:
    """c_{k,s} with k, s in -5..5."""
    return INVERSE_MODEL_TABLE[k + 5][s + 5]


@dataclass(frozen=True)
class FmrlcGains:
    ge: float
    gc: float
    gu: float
    gye: float
    gyc: float
    gp: float
    tau_c: float
    Ta: float

    def __post_init__(self):
        if min(self.ge, self.gc, self.gu, self.gye, self.gyc, self.gp, self.tau_c, self.Ta) <= 0.0:
            raise ValueError("FMRLC gains and time constants must be positive")


FMRLC_GAINS = {
    "Z": FmrlcGains(1 / 5, 1 / 10, 16.5, 1 / 60, 1 / 15, 3.0, 0.03, 0.1),
    "phi": FmrlcGains(2.0, 1.0, 0.93, 1 / 0.1, 1 / 0.1, 0.0029, 0.01, 0.05),
    "theta": FmrlcGains(2.0, 1.0, 0.93, 1 / 0.1, 1 / 0.1, 0.0029, 0.01, 0.05),
    "psi": FmrlcGains(1 / 3, 1 / 30, 0.19, 1 / 0.1, 1 / 0.1, 0.0019, 0.01, 0.05),
    "theta1": FmrlcGains(1 / 60, 1 / 1000, 0.63, 1 / 2, 1 / 2, 0.0063, 0.1, 0.1),
    "theta2": FmrlcGains(1 / 60, 1 / 1000, 0.32, 1 / 1.5, 1 / 1.5, 9.6e-4, 0.1, 0.1),
}


@dataclass
class ReferenceModel:
    tau_c: float
    y_m: float = 0.0

    def __post_init__(self):
        if not self.tau_c > 0.0:
            raise ValueError("reference time constant must be positive")

    def step(self, r: float, dt: float) -> float:
        if not dt > 0.0:
            raise ValueError("dt must be positive")
        self.y_m += (1.0 - math.exp(-dt / self.tau_c)) * (r - self.y_m)
        return self.y_m


@dataclass
class AutoTuner:
    Ta: float
    ge: float
    gc: float
    ge_cap: float
    gc_cap: float
    max_e: float = 0.0
    max_c: float = 0.0
    next_update: float | None = None

    def step(self, e: float, c: float, t: float) -> bool:
        """Record the inputs; rescale the gains when a window closes."""
        if self.next_update is None:
            self.next_update = t + self.Ta
        self.max_e = max(self.max_e, abs(e))
        self.max_c = max(self.max_c, abs(c))
        if t + 1e-12 < self.next_update:
            return False
        self.ge = min(1.0 / self.max_e, self.ge_cap) if self.max_e > 0.0 else self.ge_cap
        self.gc = min(1.0 / self.max_c, self.gc_cap) if self.max_c > 0.0 else self.gc_cap
        self.max_e = self.max_c = 0.0
        while self.next_update <= t + 1e-12:
            self.next_update += self.Ta
        return True


def inverse_model_step(rules: RuleBase2D, gains: FmrlcGains, y_e: float, y_c: float) -> float:
    f1 = UNIT_VAR.fuzzify(gains.gye * y_e)
    f2 = UNIT_VAR.fuzzify(gains.gyc * y_c)
    return gains.gp * defuzzify_cog(infer(rules, f1, f2), OUTPUT_WIDTH)[0]


def knowledge_base_update(rules: RuleBase2D, active: list[tuple[int, int]], p: float) -> None:
    if p != 0.0 and active:
        rules.shift(active, p)


class FmrlcLoop:
    def __init__(self, gains: FmrlcGains, learning: bool = True, autotune: bool = True,
                 cap_factor: float = GAIN_CAP_FACTOR):
        self.gains = gains
        self.learning = learning
        self.autotune = autotune
        self.cap_factor = cap_factor
        self.inverse = inverse_model_rule_base()
        self.reset()

    def reset(self, y0: float = 0.0) -> None:
        g = self.gains
        self.reference = ReferenceModel(g.tau_c, y0)
        self.rules = RuleBase2D(np.zeros((N_SETS, N_SETS)))
        self.tuner = AutoTuner(g.Ta, g.ge, g.gc, self.cap_factor * g.ge, self.cap_factor * g.gc)
        self.e_rate = FilteredDerivative()
        self.ye_rate = FilteredDerivative()
        self.prev_active: list[tuple[int, int]] = []
        self.t = 0.0
        self.last_p = 0.0
        self.u = 0.0

    @property
    def ge(self) -> float:
        return self.tuner.ge

    @property
    def gc(self) -> float:
        return self.tuner.gc

    def step(self, r: float, y: float, dt: float) -> float:
        g = self.gains
        y_m = self.reference.step(r, dt)
        y_e = y_m - y
        y_c = self.ye_rate.update(y_e, dt)
        p = inverse_model_step(self.inverse, g, y_e, y_c) if self.learning else 0.0
        knowledge_base_update(self.rules, self.prev_active, p)
        self.last_p = p

        e = r - y
        c = self.e_rate.update(e, dt)
        f1 = UNIT_VAR.fuzzify(self.tuner.ge * e)
        f2 = UNIT_VAR.fuzzify(self.tuner.gc * c)
        self.prev_active = active_rules(f1, f2)
        self.u = g.gu * defuzzify_cog(infer(self.rules, f1, f2), OUTPUT_WIDTH)[0]

        self.t += dt
        if self.autotune:
            self.tuner.step(e, c, self.t)
        return self.u


class FmrlcController(Controller):
    """Learning loops on Z, attitude, yaw and joints; direct fuzzy x/y outer loops."""

    name = "fmrlc"

    def __init__(self, gains: dict | None = None, outer_gains: dict | None = None,
                 learning: bool = True, autotune: bool = True):
        gains = {**FMRLC_GAINS, **(gains or {})}
        outer = {**DFLC_GAINS, **(outer_gains or {})}
        self.learning = learning
        self.autotune = autotune
        self.loops = {k: FmrlcLoop(gains[k], learning, autotune) for k in LOOPS}
        self.outer = {"x": DflcLoop(outer["x"]), "y": DflcLoop(outer["y"])}
        self.rates = {"X": FilteredDerivative(), "Y": FilteredDerivative()}
        self._primed = False

    def reset(self) -> None:
        for loop in self.loops.values():
            loop.reset()
        for f in self.rates.values():
            f.reset()
        self._primed = False

    def step(self, inp: ControlInputs, dt: float) -> ControlOutput:
        x = inp.state
        r = inp.refs
        if not self._primed:
            # start the reference models at the measured outputs
            for k, i in zip(LOOPS, (2, 3, 4, 5, 6, 7)):
                self.loops[k].reference.y_m = float(x[i])
            self._primed = True
        eX = r["X"][0] - x[0]
        eY = r["Y"][0] - x[1]
        ex, ex_dot, ey, ey_dot = body_frame_error(
            eX, eY, self.rates["X"].update(eX, dt), self.rates["Y"].update(eY, dt), x[5])
        theta_d = self.outer["x"].step(ex, ex_dot)
        phi_d = self.outer["y"].step(ey, ey_dot)

        targets = {"Z": r["Z"][0], "phi": phi_d, "theta": theta_d, "psi": r["psi"][0],
                   "theta1": r["theta1"][0], "theta2": r["theta2"][0]}
        u = {k: self.loops[k].step(targets[k], x[i], dt)
             for k, i in zip(LOOPS, (2, 3, 4, 5, 6, 7))}
        return ControlOutput(BodyWrench(u["Z"], u["phi"], u["theta"], u["psi"]),
                             u["theta1"], u["theta2"], phi_d, theta_d)
