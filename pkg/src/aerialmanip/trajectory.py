"""Quintic point-to-point references and the pick/place mission profile."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .config import ConfigError
from .kinematics import ManipulatorGeometry, inverse_kinematics_matrix
from .spatial import rotation_from_euler

CHANNELS = ("X", "Y", "Z", "psi", "theta1", "theta2")


@dataclass(frozen=True)
class QuinticSegment:
    t0: float
    tf: float
    coeffs: tuple  # in powers of (t - t0)

    @property
    def q0(self) -> float:
        return self.coeffs[0]

    @property
    def qf(self) -> float:
        return sample(self, self.tf)[0]


def plan_quintic(q0: float, qf: float, t0: float, tf: float) -> QuinticSegment:
    """Rest-to-rest quintic: zero velocity and acceleration at both ends."""
    if not tf > t0:
        raise ValueError("segment end time must exceed its start time")
    T = tf - t0
    dq = qf - q0
    return QuinticSegment(float(t0), float(tf),
                          (float(q0), 0.0, 0.0, 10.0 * dq / T**3, -15.0 * dq / T**4, 6.0 * dq / T**5))


def sample(seg: QuinticSegment, t: float) -> tuple[float, float, float]:
    """Position, velocity and acceleration; times outside the segment hold the endpoint."""
    tau = min(max(t, seg.t0), seg.tf) - seg.t0
    a0, a1, a2, a3, a4, a5 = seg.coeffs
    q = a0 + tau * (a1 + tau * (a2 + tau * (a3 + tau * (a4 + tau * a5))))
    qd = a1 + tau * (2 * a2 + tau * (3 * a3 + tau * (4 * a4 + tau * 5 * a5)))
    qdd = 2 * a2 + tau * (6 * a3 + tau * (12 * a4 + tau * 20 * a5))
    if t < seg.t0 or t > seg.tf:
        qd = qdd = 0.0
    return q, qd, qdd


@dataclass
class ChannelProfile:
    """Initial value followed by contiguous, non-overlapping quintic moves."""

    initial: float
    segments: list[QuinticSegment] = field(default_factory=list)

    def add_move(self, target: float, start: float, duration: float) -> None:
        if self.segments and start < self.segments[-1].tf - 1e-12:
            raise ValueError("segments overlap")
        q0 = self.final
        self.segments.append(plan_quintic(q0, target, start, start + duration))

    @property
    def final(self) -> float:
        return self.segments[-1].qf if self.segments else self.initial

    def sample(self, t: float) -> tuple[float, float, float]:
        if not self.segments or t < self.segments[0].t0:
            return self.initial, 0.0, 0.0
        for seg in self.segments:
            if t <= seg.tf:
                return sample(seg, t)
        return self.segments[-1].qf, 0.0, 0.0


@dataclass(frozen=True)
class PayloadEvent:
    mass: float
    pick: float
    place: float


@dataclass
class MissionProfile:
    channels: dict[str, ChannelProfile]
    payload: PayloadEvent | None = None

    def sample(self, t: float) -> dict[str, tuple[float, float, float]]:
        return {name: ch.sample(t) for name, ch in self.channels.items()}

    @property
    def end_time(self) -> float:
        ends = [ch.segments[-1].tf for ch in self.channels.values() if ch.segments]
        if self.payload is not None:
            ends.append(self.payload.place)
        return max(ends, default=0.0)

    def initial_values(self) -> dict[str, float]:
        return {name: ch.initial for name, ch in self.channels.items()}


def hold_mission(values: dict[str, float] | None = None, payload: PayloadEvent | None = None) -> MissionProfile:
    values = values or {}
    return MissionProfile({c: ChannelProfile(float(values.get(c, 0.0))) for c in CHANNELS}, payload)


# --- the pick/place mission ---------------------------------------------------

MISSION_EE_SETPOINTS = (
    (5.0, 5.0, 5.0, 0.5, 0.5, 0.5),
    (20.0, 20.0, 20.0, 1.0, 1.0, 1.0),
    (60.0, 60.0, 60.0, 1.5, 1.5, 1.5),
)
MISSION_PAYLOAD = PayloadEvent(0.15, 15.0, 65.0)
MISSION_MOVES = ((20.0, 10.0), (40.0, 10.0))  # (start, duration) of each transition
MISSION_DURATION = 80.0


def joint_setpoint(ee: Sequence[float], geometry: ManipulatorGeometry,
                   previous: Sequence[float] | None = None) -> tuple[float, ...]:
    """Vehicle/joint setpoint (X, Y, Z, psi, theta1, theta2) for an end-effector pose.

    Of the inverse-kinematics branches, the one closest to ``previous``
    (or to zero joint angles) is kept, with yaw and joints unwrapped.
    """
    x, y, z, phi_e, th_e, psi_e = ee
    R = rotation_from_euler((phi_e, th_e, psi_e)).T
    sols = inverse_kinematics_matrix(R, (x, y, z), geometry)
    ref = np.zeros(3) if previous is None else np.array([previous[3], previous[4], previous[5]])

    def unwrap(a, r):
        return a + 2 * math.pi * round((r - a) / (2 * math.pi))

    best, best_cost = None, math.inf
    for s in sols:
        ang = np.array([unwrap(s.psi, ref[0]), unwrap(s.theta1, ref[1]), unwrap(s.theta2, ref[2])])
        cost = float(np.sum((ang - ref) ** 2))
        if cost < best_cost:
            best_cost = cost
            X, Y, Z, _, _, _ = s.as_tuple()
            best = (X, Y, Z, *(float(a) for a in ang))
    if best is None:
        raise ValueError("inverse kinematics returned no solution")
    return best


def pick_place_mission(geometry: ManipulatorGeometry | None = None,
                   moves: Sequence[tuple[float, float]] = MISSION_MOVES,
                   payload: PayloadEvent | None = MISSION_PAYLOAD) -> MissionProfile:
    """Three end-effector plateaus joined by quintic moves, with a pick and a place."""
    geometry = geometry or ManipulatorGeometry()
    if len(moves) != len(MISSION_EE_SETPOINTS) - 1:
        raise ValueError("need one (start, duration) per transition")
    sets = []
    prev = None
    for ee in MISSION_EE_SETPOINTS:
        prev = joint_setpoint(ee, geometry, prev)
        sets.append(prev)
    channels = {c: ChannelProfile(sets[0][i]) for i, c in enumerate(CHANNELS)}
    for k, (start, dur) in enumerate(moves):
        for i, c in enumerate(CHANNELS):
            channels[c].add_move(sets[k + 1][i], start, dur)
    return MissionProfile(channels, payload)


# --- mission files --------------------------------------------------------------

def parse_mission(text: str, source: str = "<memory>") -> MissionProfile:
    """Rows ``initial CHANNEL VALUE``, ``move CHANNEL TARGET START DURATION``
    and ``payload MASS PICK PLACE``; '#' starts a comment."""
    init: dict[str, float] = {}
    moves: list[tuple[str, float, float, float]] = []
    payload = None
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].split()
        if not body:
            continue
        kind, args = body[0].lower(), body[1:]
        try:
            if kind == "initial" and len(args) == 2 and args[0] in CHANNELS:
                init[args[0]] = float(args[1])
            elif kind == "move" and len(args) == 4 and args[0] in CHANNELS:
                moves.append((args[0], float(args[1]), float(args[2]), float(args[3])))
            elif kind == "payload" and len(args) == 3:
                payload = PayloadEvent(*(float(a) for a in args))
            else:
                raise ValueError
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: cannot parse mission row {line.strip()!r}") from None
    mission = hold_mission(init, payload)
    for ch, target, start, dur in sorted(moves, key=lambda m: m[2]):
        try:
            mission.channels[ch].add_move(target, start, dur)
        except ValueError as exc:
            raise ConfigError(f"{source}: channel {ch}: {exc}") from None
    return mission


def load_mission(path: str | os.PathLike) -> MissionProfile:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_mission(fh.read(), str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc


def format_mission(mission: MissionProfile) -> str:
    lines = ["# kind channel value [start duration]"]
    for c, ch in mission.channels.items():
        lines.append(f"initial {c} {ch.initial!r}")
    for c, ch in mission.channels.items():
        for seg in ch.segments:
            lines.append(f"move {c} {seg.qf!r} {seg.t0!r} {seg.tf - seg.t0!r}")
    if mission.payload is not None:
        p = mission.payload
        lines.append(f"payload {p.mass!r} {p.pick!r} {p.place!r}")
    return "\n".join(lines) + "\n"


def sample_mission(mission: MissionProfile, times: Iterable[float]) -> np.ndarray:
    """Rows of [t, q, qd, qdd per channel]."""
    rows = []
    for t in times:
        s = mission.sample(t)
        rows.append([t] + [v for c in CHANNELS for v in s[c]])
    return np.array(rows).reshape(-1, 1 + 3 * len(CHANNELS))
