"""Curve smoothing, delay CDFs and the CSV emitters for results."""

from __future__ import annotations

import csv
import io
from collections import Counter
from typing import Sequence

import numpy as np

# fractions of devices connected within 5, 10 and 15 slots reported for DDQN-BU at lambda=300, rho=20
REFERENCE_CDF_MILESTONES = {5: 0.664, 10: 0.915, 15: 0.992}

# mean delays in slots reported for (lambda, rho): (Static-BE, Random-BU, DDQN-BU)
REFERENCE_MEAN_DELAYS = {
    (150, 2): (3.72, 3.56, 3.42),
    (150, 5): (4.01, 3.94, 3.53),
    (150, 20): (4.29, 4.28, 3.66),
    (300, 2): (4.66, 4.65, 4.15),
    (300, 5): (5.24, 5.32, 4.44),
    (300, 20): (5.96, 6.24, 4.75),
}


def ema(series: Sequence[float], weight: float = 0.99) -> np.ndarray:
    """Exponential moving average started at the first sample, no bias correction.

    NaN marks a missing sample (an episode without a training step): the
    average carries over unchanged, and stays NaN until the first real sample.
    """
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise ValueError("series is empty")
    if not 0.0 <= weight < 1.0:
        raise ValueError(f"weight must lie in [0, 1), got {weight}")
    y = np.empty_like(x)
    acc = np.nan
    for k, v in enumerate(x):
        if not np.isnan(v):
            acc = v if np.isnan(acc) else weight * acc + (1.0 - weight) * v
        y[k] = acc
    return y


def avg_action_value(q_outputs: Sequence[Sequence[float]]) -> float:
    """Mean of all recorded action values over all slots of an episode."""
    q = np.asarray(q_outputs, dtype=float)
    if q.size == 0:
        raise ValueError("need at least one slot of outputs")
    return float(q.mean())


def delay_cdf(delays: Sequence[int]) -> list[tuple[int, float]]:
    """Empirical CDF over the observed delay values."""
    if len(delays) == 0:
        raise ValueError("no delays")
    counts = sorted(Counter(int(d) for d in delays).items())
    n = len(delays)
    out, acc = [], 0
    for d, c in counts:
        acc += c
        out.append((d, acc / n))
    return out


def _write(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def curve_csv(raw: Sequence[float], weight: float = 0.99) -> str:
    smooth = ema(raw, weight)
    return _write(((k, repr(float(r)), repr(float(s))) for k, (r, s) in enumerate(zip(raw, smooth))),
                  ("episode", "raw", "ema"))


def cdf_csv(cdf: Sequence[tuple[int, float]]) -> str:
    return _write(((d, repr(f)) for d, f in cdf), ("delay_slots", "fraction"))


def gain_columns(static_mean: float, ddqn_mean: float) -> tuple[float, float]:
    """(DDQN/Static delay ratio, relative delay reduction in percent)."""
    return ddqn_mean / static_mean, 100.0 * (static_mean - ddqn_mean) / static_mean


def comparison_csv(rows: Sequence[dict]) -> str:
    """Delay table, one row per (lambda, rho) case.

    Each row dict holds ``lambda``, ``rho`` and the mean delays under the keys
    ``Static-BE``, ``Random-BU`` and ``DDQN-BU``.
    """
    out = []
    for r in rows:
        ratio, reduction = gain_columns(r["Static-BE"], r["DDQN-BU"])
        _, vs_random = gain_columns(r["Random-BU"], r["DDQN-BU"])
        out.append((
            r["lambda"], r["rho"],
            f"{r['Static-BE']:.6f}", f"{r['Random-BU']:.6f}", f"{r['DDQN-BU']:.6f}",
            f"{ratio:.6f}", f"{reduction:.3f}", f"{vs_random:.3f}",
        ))
    return _write(out, ("lambda", "rho", "static_be", "random_bu", "ddqn_bu",
                        "gain_ratio", "gain_reduction_pct", "gain_vs_random_pct"))
