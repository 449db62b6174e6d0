"""Beams, beam sets and the angular bookkeeping around them.

Indices are 0-based throughout: the first beam of an action is beam 0 and
the sector straddling angle 0 is sector 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
ANGLE_TOL = 1e-9


class BeamSetError(ValueError):
    """A beam set or action-space file violates the coverage constraints."""


def normalize_angle(x: float) -> float:
    """Reduce ``x`` into [0, 2*pi)."""
    if not math.isfinite(x):
        raise ValueError(f"angle must be finite, got {x!r}")
    y = math.fmod(x, TWO_PI)
    if y < 0.0:
        y += TWO_PI
    # -tiny + 2pi rounds to 2pi
    if y >= TWO_PI:
        y = 0.0
    return y


def normalize_angles(x: np.ndarray) -> np.ndarray:
    y = np.mod(np.asarray(x, dtype=float), TWO_PI)
    y[y >= TWO_PI] = 0.0
    return y


def angular_distance(a: float, b: float) -> float:
    """Smallest absolute difference between two angles, in [0, pi]."""
    d = math.fmod(abs(a - b), TWO_PI)
    return min(d, TWO_PI - d)


@dataclass(frozen=True)
class Beam:
    """A beam with maximum-gain direction ``phi`` and beamwidth ``theta`` (radians).

    ``phi`` is normalized into [0, 2*pi) on construction.
    """

    phi: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.phi) and math.isfinite(self.theta)):
            raise BeamSetError(f"beam angles must be finite: phi={self.phi}, theta={self.theta}")
        object.__setattr__(self, "phi", normalize_angle(self.phi))

    @property
    def lower(self) -> float:
        return normalize_angle(self.phi - self.theta / 2)

    @property
    def upper(self) -> float:
        return normalize_angle(self.phi + self.theta / 2)


@dataclass(frozen=True)
class BeamSet:
    beams: tuple[Beam, ...]

    def __post_init__(self):
        object.__setattr__(self, "beams", tuple(self.beams))

    def __len__(self) -> int:
        return len(self.beams)

    def __iter__(self):
        return iter(self.beams)

    def __getitem__(self, i: int) -> Beam:
        return self.beams[i]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> "BeamSet":
        return cls(tuple(Beam(phi, theta) for phi, theta in pairs))

    def pairs(self) -> list[tuple[float, float]]:
        return [(b.phi, b.theta) for b in self.beams]

    def isclose(self, other: "BeamSet", tol: float = ANGLE_TOL) -> bool:
        if len(self) != len(other):
            return False
        return all(
            angular_distance(a.phi, b.phi) <= tol and abs(a.theta - b.theta) <= tol
            for a, b in zip(self.beams, other.beams)
        )


@dataclass(frozen=True)
class Validation:
    ok: bool
    constraint: str | None = None
    index: int | None = None
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok


def validate_beam_set(bs: BeamSet, tol: float = ANGLE_TOL) -> Validation:
    """Check the coverage constraints C1 (widths sum to 2*pi), C2 (adjacency) and C3 (ranges)."""
    n = len(bs)
    if n < 1:
        return Validation(False, "C1", None, "beam set is empty")
    for i, b in enumerate(bs.beams):
        if not (0.0 <= b.phi < TWO_PI):
            return Validation(False, "C3", i, f"beam {i}: phi={b.phi} outside [0, 2pi)")
        if not (0.0 < b.theta < TWO_PI):
            return Validation(False, "C3", i, f"beam {i}: theta={b.theta} outside (0, 2pi)")
    total = math.fsum(b.theta for b in bs.beams)
    if abs(total - TWO_PI) > tol:
        return Validation(False, "C1", None, f"beamwidths sum to {total!r}, expected 2pi")
    for i, b in enumerate(bs.beams):
        nxt = bs.beams[(i + 1) % n]
        expected = normalize_angle(b.phi + (nxt.theta + b.theta) / 2)
        if angular_distance(expected, nxt.phi) > tol:
            return Validation(
                False, "C2", i,
                f"beam {(i + 1) % n}: phi={nxt.phi!r} but adjacency to beam {i} requires {expected!r}",
            )
    return Validation(True)


_BOUNDARY_GRID = 1e-12


def _lower_bounds(bs: BeamSet) -> np.ndarray:
    lows = np.array([b.lower for b in bs.beams])
    # boundaries sitting on 0 from either side snap to 0
    lows[(lows < ANGLE_TOL) | (TWO_PI - lows < ANGLE_TOL)] = 0.0
    # round down so an angle on a nominal boundary lands in the upper beam
    # whichever way the boundary arithmetic rounded
    return np.floor(lows / _BOUNDARY_GRID) * _BOUNDARY_GRID


def serving_beams(bs: BeamSet, theta0: np.ndarray) -> np.ndarray:
    """Vectorised :func:`serving_beam`; ``bs`` must be valid."""
    lows = _lower_bounds(bs)
    order = np.argsort(lows, kind="stable")
    sorted_lows = lows[order]
    pos = np.searchsorted(sorted_lows, np.asarray(theta0, dtype=float), side="right") - 1
    # pos == -1 means theta0 precedes every lower bound: it belongs to the beam that wraps across 0
    return order[pos % len(bs)]


def serving_beam(bs: BeamSet, theta0: float) -> int:
    """Index of the beam whose half-open range [lower, upper) holds ``theta0``."""
    return int(serving_beams(bs, np.array([theta0]))[0])


def sector_of(theta0, n_sectors: int):
    """Sector index of an angle; sector ``j`` spans [j*w - w/2, j*w + w/2) with w = 2pi/n_sectors.

    Accepts a scalar or an array.
    """
    w = TWO_PI / n_sectors
    shifted = np.mod(np.asarray(theta0, dtype=float) + w / 2, TWO_PI)
    j = np.floor(shifted / w).astype(np.int64) % n_sectors
    if j.ndim == 0:
        return int(j)
    return j


def sector_arc(j: int, n_sectors: int) -> tuple[float, float]:
    """(start, width) of sector ``j``; start may be negative for sector 0."""
    w = TWO_PI / n_sectors
    return j * w - w / 2, w


def rotate_action(bs: BeamSet, delta: float) -> BeamSet:
    return BeamSet(tuple(Beam(normalize_angle(b.phi + delta), b.theta) for b in bs.beams))


@dataclass(frozen=True)
class ActionSpace:
    actions: tuple[BeamSet, ...]

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        if not self.actions:
            raise BeamSetError("action space is empty")
        for k, bs in enumerate(self.actions):
            v = validate_beam_set(bs)
            if not v:
                raise BeamSetError(f"action {k} violates {v.constraint}: {v.message}")

    def __len__(self) -> int:
        return len(self.actions)

    def __getitem__(self, k: int) -> BeamSet:
        return self.actions[k]

    def __iter__(self):
        return iter(self.actions)

    @property
    def n_beams(self) -> int:
        return len(self.actions[0])

    def to_json(self) -> list:
        return [[{"phi_rad": phi, "theta_rad": theta} for phi, theta in bs.pairs()] for bs in self.actions]

    @classmethod
    def from_json(cls, data: Sequence) -> "ActionSpace":
        try:
            actions = tuple(
                BeamSet.from_pairs((float(b["phi_rad"]), float(b["theta_rad"])) for b in action)
                for action in data
            )
        except (KeyError, TypeError) as exc:
            raise BeamSetError(f"malformed action-space entry: {exc!r}") from None
        return cls(actions)


def load_action_space(path: str | Path) -> ActionSpace:
    with open(path) as f:
        return ActionSpace.from_json(json.load(f))


# Multiples of pi/12. Beam 4 of a_2 and a_3 is pi/6 wide: any other width breaks
# both the width sum and the adjacency to beams 3 and 5.
_BUILTIN_TABLE = (
    ((1, 2), (6, 8), (11, 2), (13, 2), (18, 8), (23, 2)),
    ((5, 2), (10, 8), (15, 2), (17, 2), (22, 8), (3, 2)),
    ((9, 2), (14, 8), (19, 2), (21, 2), (26, 8), (7, 2)),
)


def builtin_action_space() -> ActionSpace:
    """The three 6-beam actions with two wide and four narrow beams, rotated in steps of pi/3."""
    unit = math.pi / 12
    return ActionSpace(tuple(
        BeamSet.from_pairs((p * unit, w * unit) for p, w in row) for row in _BUILTIN_TABLE
    ))


def equal_beams(n_beams: int) -> BeamSet:
    """``n_beams`` beams of width 2pi/n_beams with the first centred on angle 0."""
    if n_beams < 1:
        raise ValueError("need at least one beam")
    w = TWO_PI / n_beams
    return BeamSet.from_pairs((i * w, w) for i in range(n_beams))
