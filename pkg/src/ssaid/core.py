"""Shared domain types, order statistics, and accuracy metrics."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled scalar sequence.

    ``values`` holds the samples, ``dt`` the sample spacing (days for GPS
    data, 1.0 in abstract units otherwise) and ``origin`` the time of the
    first sample.
    """

    values: np.ndarray
    dt: float = 1.0
    origin: float = 0.0

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("values must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("values must be finite")
        if not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    def time_at(self, index: int) -> float:
        return self.origin + index * self.dt

    def slice(self, start: int, stop: int) -> "TimeSeries":
        """Sub-series over sample indices [start, stop)."""
        return TimeSeries(
            self.values[start:stop].copy(),
            dt=self.dt,
            origin=self.origin + start * self.dt,
        )


def _check_interior_indices(locations: tuple[int, ...], name: str) -> None:
    if any(b <= a for a, b in zip(locations, locations[1:])):
        raise ValueError(f"{name} must be strictly increasing, got {locations}")
    if locations and locations[0] < 1:
        raise ValueError(f"{name} must be interior indices (>= 1), got {locations}")


@dataclass(frozen=True)
class DetectionResult:
    """Estimated change-points: sorted interior sample indices."""

    locations: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        locs = tuple(int(x) for x in self.locations)
        _check_interior_indices(locs, "locations")
        object.__setattr__(self, "locations", locs)

    @property
    def count(self) -> int:
        return len(self.locations)


@dataclass(frozen=True)
class GroundTruth:
    """True change-point locations: sorted interior sample indices."""

    locations: tuple[int, ...]

    def __post_init__(self) -> None:
        locs = tuple(int(x) for x in self.locations)
        _check_interior_indices(locs, "locations")
        object.__setattr__(self, "locations", locs)

    @property
    def count(self) -> int:
        return len(self.locations)


def mode(xs: Sequence[int]) -> int:
    """Most frequent value; ties broken by the smallest tied value."""
    if len(xs) == 0:
        raise ValueError("mode of an empty sequence is undefined")
    counts = Counter(int(x) for x in xs)
    best = max(counts.values())
    return min(v for v, c in counts.items() if c == best)


def rmse(estimated: DetectionResult, truth: GroundTruth) -> float:
    """Root mean squared index error, pairing i-th estimate with i-th truth.

    Defined only when the estimated count matches the truth count.
    """
    if estimated.count != truth.count:
        raise ValueError(
            f"rmse needs matching counts, got {estimated.count} vs {truth.count}"
        )
    if truth.count == 0:
        return 0.0
    p = np.asarray(estimated.locations, dtype=float)
    q = np.asarray(truth.locations, dtype=float)
    return float(math.sqrt(np.mean((p - q) ** 2)))


def quartile3(xs: Sequence[float]) -> float:
    """75th percentile with linear interpolation between order statistics."""
    arr = np.asarray(xs, dtype=float)
    if arr.size == 0:
        raise ValueError("quartile3 of an empty sequence is undefined")
    if not np.all(np.isfinite(arr)):
        raise ValueError("quartile3 requires finite values")
    return float(np.percentile(arr, 75.0, method="linear"))


def sample_std(values: np.ndarray) -> float:
    """Sample standard deviation (n-1 divisor), the convention used throughout."""
    return float(np.std(np.asarray(values, dtype=float), ddof=1))


def zscore_normalize(series: TimeSeries) -> TimeSeries:
    """Rescale to sample mean 0 and sample standard deviation 1."""
    if len(series) < 2:
        raise ValueError("z-score normalization needs at least 2 samples")
    std = sample_std(series.values)
    if std == 0.0 or not np.isfinite(std):
        raise ValueError("z-score normalization undefined for constant series")
    out = (series.values - float(np.mean(series.values))) / std
    return TimeSeries(out, dt=series.dt, origin=series.origin)
