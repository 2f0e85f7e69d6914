"""Pieces shared by the controller stacks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..dynamics import BodyWrench, InteractionWrench

DERIVATIVE_POLE = 50.0  # rad/s


@dataclass
class FilteredDerivative:
    """Backward difference smoothed by a first-order low-pass filter."""

    pole: float = DERIVATIVE_POLE
    prev: float | None = None
    value: float = 0.0

    def update(self, x: float, dt: float) -> float:
        if self.prev is None:
            self.prev = x
            return self.value
        raw = (x - self.prev) / dt
        self.prev = x
        self.value += (1.0 - math.exp(-self.pole * dt)) * (raw - self.value)
        return self.value

    def reset(self) -> None:
        self.prev = None
        self.value = 0.0


@dataclass(frozen=True)
class ControlInputs:
    """What a controller sees at one tick.

    ``refs`` maps each tracked channel (X, Y, Z, psi, theta1, theta2) to its
    desired (value, rate, acceleration). ``interaction`` and ``accel`` are
    the arm wrench and the 8 accelerations from the previous physics step.
    """

    t: float
    state: np.ndarray
    refs: Mapping[str, tuple[float, float, float]]
    interaction: InteractionWrench
    omega_bar: float = 0.0
    accel: np.ndarray = field(default_factory=lambda: np.zeros(8))


@dataclass(frozen=True)
class ControlOutput:
    wrench: BodyWrench
    Tm1: float
    Tm2: float
    phi_d: float = 0.0
    theta_d: float = 0.0
    flags: tuple = ()


class Controller:
    """Interface: ``step`` is called once per control tick."""

    name = "base"

    def reset(self) -> None:
        raise NotImplementedError

    def step(self, inp: ControlInputs, dt: float) -> ControlOutput:
        raise NotImplementedError
