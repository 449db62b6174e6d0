"""Link budget for the connection-request message and the decode rule.

Powers are in dBm; ``NO_POWER`` (-inf) stands for "nothing received", e.g. an
empty interferer set or a device sitting in an exact pattern null.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .antenna import ArrayConfig, array_factor_gain, gain_db
from .geometry import Beam

NO_POWER = -math.inf
MIN_DISTANCE_KM = 0.01


@dataclass(frozen=True)
class LinkParams:
    p_t: float = 23.0            # dBm
    g_t: float = 0.0             # dBi
    g_r: float = 18.0            # dBi
    sigma_shadow: float = 8.0    # dB
    gamma: float = -110.0        # decode threshold, dB
    pl_a: float = 120.9
    pl_b: float = 37.6

    def __post_init__(self):
        if self.sigma_shadow < 0:
            raise ValueError(f"sigma_shadow must be >= 0, got {self.sigma_shadow}")
        if not self.pl_b > 0:
            raise ValueError(f"pl_b must be positive, got {self.pl_b}")

    @property
    def budget(self) -> float:
        """Transmit power plus both antenna gains."""
        return self.p_t + self.g_t + self.g_r


def path_loss(d_km, params: LinkParams = LinkParams()):
    """Path loss in dB at distance ``d_km``."""
    d = np.asarray(d_km, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distance must be positive")
    pl = params.pl_a + params.pl_b * np.log10(d)
    return float(pl) if pl.ndim == 0 else pl


def received_power(params: LinkParams, beam: Beam, theta, d_km, chi=0.0,
                   array: ArrayConfig | float = 0.25):
    """Power received through ``beam`` from a device at (theta, d_km) with shadowing ``chi`` dB."""
    g = gain_db(array_factor_gain(beam, theta, array))
    r = params.budget + g - path_loss(d_km, params) + np.asarray(chi, dtype=float)
    return float(r) if np.ndim(r) == 0 else r


def interference_power(powers_dbm: Iterable[float]) -> float:
    """Power sum of the given terms in dBm; ``NO_POWER`` when there are none."""
    p = np.asarray(list(powers_dbm), dtype=float)
    p = p[np.isfinite(p)]
    if p.size == 0:
        return NO_POWER
    top = p.max()
    # factoring out the largest term keeps a single term exact
    return float(top + 10.0 * np.log10(np.sum(10.0 ** ((p - top) / 10.0))))


def decode(r_dbm: float, i_dbm: float, gamma: float) -> bool:
    """True when the signal exceeds the interference by more than ``gamma`` dB."""
    if r_dbm == NO_POWER:
        return False
    if i_dbm == NO_POWER:
        return True
    return r_dbm - i_dbm > gamma


def decode_many(r_dbm: np.ndarray, i_dbm: np.ndarray, gamma: float) -> np.ndarray:
    """Elementwise :func:`decode`."""
    r = np.asarray(r_dbm, dtype=float)
    i = np.asarray(i_dbm, dtype=float)
    with np.errstate(invalid="ignore"):
        margin_ok = r - i > gamma
    return np.isfinite(r) & (np.isneginf(i) | margin_ok)
