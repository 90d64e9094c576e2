"""Sliding-window one-line vs two-line comparison via AIC differencing.

At each admissible centre, a single line is fit to a symmetric window and
two independent lines to its halves; the AIC difference (two-line minus
one-line) dips negative where a slope break improves the fit.  Centres
whose dip falls below a threshold are reported, one per contiguous
sub-threshold run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DetectionResult, TimeSeries

# One-line model: slope, intercept, variance.  Two-line: two slopes, two
# intercepts, one pooled variance.
_K_ONE = 3
_K_TWO = 5

# Relative RSS floor guarding log() on exact fits.
_RSS_REL_FLOOR = 1e-12


@dataclass(frozen=True)
class AicConfig:
    """Window size in intervals (even; the window spans window_days + 1
    samples) and the detection threshold (negative)."""

    window_days: int = 14
    threshold: float = -10.0

    def __post_init__(self) -> None:
        if self.window_days < 6:
            raise ValueError("window_days must be >= 6")
        if self.window_days % 2 != 0:
            raise ValueError("window_days must be even")


def _line_rss(y: np.ndarray) -> float:
    n = y.size
    t = np.arange(n, dtype=float)
    tc = t - t.mean()
    yc = y - y.mean()
    denom = float(np.dot(tc, tc))
    if denom == 0.0:
        return float(np.dot(yc, yc))
    slope = float(np.dot(tc, yc)) / denom
    return float(np.dot(yc, yc)) - slope * slope * denom


def delta_aic_series(series: TimeSeries, config: AicConfig = AicConfig()) -> np.ndarray:
    """AIC(two lines) - AIC(one line) at every admissible centre.

    Returns a length-T array; the first and last window_days/2 entries are
    NaN (the window does not fit there).  Negative values mean the split
    model fits better.
    """
    x = series.values
    n = x.size
    w = config.window_days
    if n <= w:
        raise ValueError(f"series length {n} must exceed window {w}")
    half = w // 2
    n_win = w + 1

    delta = np.full(n, np.nan)
    penalty = 2.0 * (_K_TWO - _K_ONE)
    for c in range(half, n - half):
        win = x[c - half : c + half + 1]
        rss_one = _line_rss(win)
        # Left half keeps the centre sample so the two models cover the
        # same n_win points.
        rss_two = _line_rss(win[: half + 1]) + _line_rss(win[half + 1 :])
        floor = _RSS_REL_FLOOR * n_win * float(np.var(win)) + 1e-300
        rss_one = max(rss_one, floor)
        rss_two = max(rss_two, floor)
        delta[c] = penalty + n_win * math.log(rss_two / rss_one)
    return delta


def threshold_detect(delta: np.ndarray, zeta: float) -> DetectionResult:
    """Centres where the AIC difference drops below zeta.

    Each maximal run of consecutive sub-threshold centres collapses to the
    single centre with the most negative value (earliest on ties).
    """
    delta = np.asarray(delta, dtype=float)
    below = np.where(np.isnan(delta), False, delta < zeta)
    locations: list[int] = []
    i = 0
    n = below.size
    while i < n:
        if not below[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and below[j + 1]:
            j += 1
        run = delta[i : j + 1]
        locations.append(i + int(np.argmin(run)))
        i = j + 1
    return DetectionResult(tuple(locations))
