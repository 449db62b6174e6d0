"""Uniform linear array patterns for the receive beams.

Each beam is produced by a ULA whose element count is the smallest one giving
a half-power beamwidth no wider than the beam's nominal width. The pattern is
steered so that its maximum sits on the beam's direction:
psi = 2*pi*(d/lambda)*sin(theta - phi), with no extra inter-element phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import TWO_PI, ActionSpace, Beam, BeamSet

HALF_POWER_CONST = 1.391
MAX_ELEMENTS = 1 << 20
_SINGULAR = 1e-12


@dataclass(frozen=True)
class ArrayConfig:
    d_over_lambda: float = 0.25
    # fixed element count for every beam; None derives it from each beamwidth
    n_elements: int | None = None

    def __post_init__(self):
        if not self.d_over_lambda > 0:
            raise ValueError(f"d_over_lambda must be positive, got {self.d_over_lambda}")
        if self.n_elements is not None and self.n_elements < 2:
            raise ValueError(f"n_elements must be >= 2, got {self.n_elements}")


@lru_cache(maxsize=1024)
def elements_for_beamwidth(theta: float, d_over_lambda: float = 0.25) -> int:
    """Smallest element count whose half-power beamwidth does not exceed ``theta``."""
    if not 0.0 < theta <= math.pi:
        raise ValueError(f"beamwidth must lie in (0, pi], got {theta}")
    if not d_over_lambda > 0:
        raise ValueError(f"d_over_lambda must be positive, got {d_over_lambda}")
    x = HALF_POWER_CONST / (math.pi * d_over_lambda * math.cos(math.pi / 2 - theta / 2))
    if not math.isfinite(x) or x > MAX_ELEMENTS:
        raise ValueError(f"beamwidth {theta} needs more than {MAX_ELEMENTS} elements")
    return max(2, math.ceil(x))


def hpbw_of_elements(n: int, d_over_lambda: float = 0.25) -> float:
    """Half-power beamwidth (radians) of an ``n``-element array."""
    if n < 2:
        raise ValueError(f"need at least 2 elements, got {n}")
    x = HALF_POWER_CONST / (math.pi * n * d_over_lambda)
    if x > 1.0:
        raise ValueError(
            f"{n} elements at spacing {d_over_lambda} wavelengths are too few for a defined HPBW"
        )
    return 2.0 * (math.pi / 2 - math.acos(x))


def beam_elements(beam: Beam, array: ArrayConfig | float = 0.25) -> int:
    if isinstance(array, ArrayConfig):
        if array.n_elements is not None:
            return array.n_elements
        return elements_for_beamwidth(beam.theta, array.d_over_lambda)
    return elements_for_beamwidth(beam.theta, array)


def _spacing(array: ArrayConfig | float) -> float:
    return array.d_over_lambda if isinstance(array, ArrayConfig) else float(array)


def array_factor(n: int, d_over_lambda: float, offset):
    """|sin(n psi/2) / (n sin(psi/2))| at angular offsets from boresight."""
    psi = TWO_PI * d_over_lambda * np.sin(np.asarray(offset, dtype=float))
    half = psi / 2
    den = n * np.sin(half)
    singular = np.abs(np.sin(half)) < _SINGULAR
    with np.errstate(divide="ignore", invalid="ignore"):
        amp = np.abs(np.sin(n * half) / den)
    # the limit of the ratio at sin(psi/2) -> 0 has magnitude 1
    amp = np.where(singular, 1.0, amp)
    return np.clip(amp, 0.0, 1.0)


def array_factor_gain(beam: Beam, theta, array: ArrayConfig | float = 0.25):
    """Normalised amplitude gain in [0, 1] of ``beam`` toward ``theta``."""
    n = beam_elements(beam, array)
    amp = array_factor(n, _spacing(array), np.asarray(theta, dtype=float) - beam.phi)
    return float(amp) if amp.ndim == 0 else amp


def gain_db(amplitude):
    """20*log10 of an amplitude; zero maps to -inf."""
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(amplitude)


def beam_gains_db(bs: BeamSet, theta: np.ndarray, array: ArrayConfig | float = 0.25) -> np.ndarray:
    """(n_beams, len(theta)) matrix of gains in dB."""
    theta = np.asarray(theta, dtype=float)
    out = np.empty((len(bs), theta.size))
    for i, beam in enumerate(bs.beams):
        out[i] = gain_db(array_factor_gain(beam, theta, array))
    return out


def pattern_grid(n_points: int) -> np.ndarray:
    return np.arange(n_points) * (TWO_PI / n_points)


@lru_cache(maxsize=32)
def cached_pattern(bs: BeamSet, array: ArrayConfig, n_points: int = 8192) -> np.ndarray:
    """Amplitude table of every beam on a uniform grid; diagnostics only."""
    grid = pattern_grid(n_points)
    table = np.stack([array_factor_gain(b, grid, array) for b in bs.beams])
    table.setflags(write=False)
    return table


def pattern_rows(space: ActionSpace, array: ArrayConfig, n_points: int = 4096,
                 action_ids: list[int] | None = None):
    """Yield (action_id, beam_id, theta_rad, amplitude, gain_db) over a uniform grid."""
    grid = pattern_grid(n_points)
    ids = range(len(space)) if action_ids is None else action_ids
    for k in ids:
        table = cached_pattern(space[k], array, n_points)
        for i in range(table.shape[0]):
            db = gain_db(table[i])
            for t, a, g in zip(grid, table[i], db):
                yield k, i, float(t), float(a), float(g)
