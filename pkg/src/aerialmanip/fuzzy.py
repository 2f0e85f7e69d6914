"""Mamdani inference over two inputs with triangular partitions.

Inputs use evenly spaced triangular sets whose half width equals the spacing,
so at most two sets fire per input and memberships sum to one. The outermost
sets are shoulders that stay at 1 beyond the universe edges. Output sets are
symmetric triangles of a common base width; defuzzification is the centre of
gravity of the individual clipped sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# memberships below this are roundoff from an input sitting on a set centre
MEMBERSHIP_EPS = 1e-12


@dataclass(frozen=True)
class TriangularMF:
    center: float
    half_width: float
    left_shoulder: bool = False
    right_shoulder: bool = False

    def __call__(self, x: float) -> float:
        if x <= self.center and self.left_shoulder:
            return 1.0
        if x >= self.center and self.right_shoulder:
            return 1.0
        return max(0.0, 1.0 - abs(x - self.center) / self.half_width)


@dataclass(frozen=True)
class FuzzyVariable:
    """n evenly spaced triangular sets covering [lo, hi]."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.n < 2 or not self.hi > self.lo:
            raise ValueError("need at least two sets on a non-empty universe")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    @property
    def centers(self) -> np.ndarray:
        return np.array([self.center(i) for i in range(self.n)])

    def center(self, i: int) -> float:
        # laid out from the midpoint so mirrored sets sit at exactly mirrored values
        mid = 0.5 * (self.lo + self.hi)
        return mid + (i - 0.5 * (self.n - 1)) * self.spacing

    @property
    def mfs(self) -> list[TriangularMF]:
        s = self.spacing
        return [TriangularMF(float(c), s, i == 0, i == self.n - 1) for i, c in enumerate(self.centers)]

    def fuzzify(self, x: float) -> list[tuple[int, float]]:
        """(index, membership) of every set with non-zero membership."""
        if x <= self.lo:
            return [(0, 1.0)]
        if x >= self.hi:
            return [(self.n - 1, 1.0)]
        s = self.spacing
        i = min(max(int(math.floor((x - self.lo) / s)), 0), self.n - 2)
        mu = [(j, 1.0 - abs(x - self.center(j)) / s) for j in (i, i + 1)]
        live = [(j, m) for j, m in mu if m > MEMBERSHIP_EPS]
        if len(live) == 1:
            return [(live[0][0], 1.0)]
        return live


class RuleBase2D:
    """Grid of output-set centres indexed by (input-1 set, input-2 set)."""

    def __init__(self, centers, lo: float = -1.0, hi: float = 1.0):
        self.centers = np.array(centers, dtype=float)
        if self.centers.ndim != 2:
            raise ValueError("rule base must be a 2-D grid")
        self.lo, self.hi = lo, hi

    @property
    def shape(self) -> tuple[int, int]:
        return self.centers.shape

    def copy(self) -> "RuleBase2D":
        return RuleBase2D(self.centers.copy(), self.lo, self.hi)

    def shift(self, cells: Iterable[tuple[int, int]], p: float) -> None:
        for i, j in cells:
            self.centers[i, j] = min(self.hi, max(self.lo, self.centers[i, j] + p))

    def to_text(self) -> str:
        return "\n".join(" ".join(f"{v:.17g}" for v in row) for row in self.centers) + "\n"

    @classmethod
    def from_text(cls, text: str, lo: float = -1.0, hi: float = 1.0) -> "RuleBase2D":
        rows = [[float(v) for v in line.split()] for line in text.splitlines() if line.strip()]
        if not rows or any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("ragged rule-base grid")
        return cls(rows, lo, hi)


def infer(rules: RuleBase2D, f1: Sequence[tuple[int, float]],
          f2: Sequence[tuple[int, float]]) -> list[tuple[float, float]]:
    """Min firing strength per rule; rules sharing an output centre keep the max."""
    merged: dict[float, float] = {}
    C = rules.centers
    for i, mu1 in f1:
        for j, mu2 in f2:
            w = mu1 if mu1 < mu2 else mu2
            if w <= 0.0:
                continue
            c = float(C[i, j])
            if merged.get(c, 0.0) < w:
                merged[c] = w
    return list(merged.items())


def active_rules(f1: Sequence[tuple[int, float]], f2: Sequence[tuple[int, float]]) -> list[tuple[int, int]]:
    return [(i, j) for i, m1 in f1 for j, m2 in f2 if min(m1, m2) > 0.0]


def clipped_area(width: float, h: float) -> float:
    """Area of a symmetric triangle of base ``width`` and unit height cut at h."""
    return 0.5 * width * h * (2.0 - h)


def defuzzify_cog(sets: Sequence[tuple[float, float]], width: float) -> tuple[float, bool]:
    """Centre of gravity of clipped symmetric output sets.

    Returns (value, ok); ok is False when no set carries area, in which case
    the value is 0.
    """
    areas = [(clipped_area(width, h), c) for c, h in sets if h > 0.0]
    # exact sums keep the result independent of set order, so mirrored
    # activations give exactly mirrored outputs
    den = math.fsum(a for a, _ in areas)
    if den <= 0.0:
        return 0.0, False
    return math.fsum(a * c for a, c in areas) / den, True


@dataclass
class MamdaniController:
    """Two-input, one-output inference with a fixed or learnable rule base."""

    in1: FuzzyVariable
    in2: FuzzyVariable
    rules: RuleBase2D
    out_width: float

    def evaluate(self, x1: float, x2: float) -> float:
        f1 = self.in1.fuzzify(x1)
        f2 = self.in2.fuzzify(x2)
        return defuzzify_cog(infer(self.rules, f1, f2), self.out_width)[0]
