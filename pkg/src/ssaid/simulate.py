"""Ground-truthed signal generators for benchmarks and tests.

The flagship generator produces slow-slip-like displacement series: a steady
background trend interrupted by smooth monotone reversals of configurable
amplitude and duration.  The reversal ramp is a rescaled logistic (or an
easing/linear alternative), so the signal is exactly linear outside events
and continuous everywhere, with the event start/end samples as ground-truth
change-points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core import GroundTruth, TimeSeries, sample_std

RAMP_SHAPES = ("smooth-sigmoid", "quadratic-ease", "linear")

# Logistic steepness placing the 1% and 99% points exactly at the event edges.
_LOGISTIC_K = 2.0 * math.log(99.0)


@dataclass(frozen=True)
class SseSignalSpec:
    """Geometry of a simulated slow-slip displacement signal."""

    length_days: int = 365
    n_events: int = 5
    event_duration: float = 7.0
    recurrence: float = 74.0
    inter_event_slope: float = 1.0
    event_amplitudes: Union[float, Sequence[float], None] = None
    ramp_shape: str = "smooth-sigmoid"

    def __post_init__(self) -> None:
        if self.length_days < 4:
            raise ValueError("length_days must be >= 4")
        if self.n_events < 0:
            raise ValueError("n_events must be non-negative")
        if self.n_events:
            if not (self.event_duration > 0):
                raise ValueError("event_duration must be positive")
            if not (self.recurrence > 0):
                raise ValueError("recurrence must be positive")
            if self.event_duration >= self.recurrence:
                raise ValueError("event_duration must be smaller than recurrence")
            if self.n_events * self.recurrence > self.length_days + self.recurrence:
                raise ValueError("events do not fit in the series")
        if self.ramp_shape not in RAMP_SHAPES:
            raise ValueError(f"ramp_shape must be one of {RAMP_SHAPES}")
        if self.event_amplitudes is not None and not np.isscalar(self.event_amplitudes):
            arr = np.asarray(self.event_amplitudes, dtype=float)
            if arr.size != self.n_events:
                raise ValueError(f"need {self.n_events} amplitudes, got {arr.size}")
            if not np.all(np.isfinite(arr)):
                raise ValueError("amplitudes must be finite")

    def amplitudes(self) -> np.ndarray:
        """Per-event amplitude vector (default: full reversal of the
        displacement accumulated between consecutive events)."""
        if self.event_amplitudes is None:
            amp = self.inter_event_slope * (self.recurrence - self.event_duration)
            return np.full(self.n_events, float(amp))
        if np.isscalar(self.event_amplitudes):
            return np.full(self.n_events, float(self.event_amplitudes))
        arr = np.asarray(self.event_amplitudes, dtype=float)
        if arr.size != self.n_events:
            raise ValueError(
                f"need {self.n_events} amplitudes, got {arr.size}"
            )
        return arr

    def event_starts(self) -> np.ndarray:
        """Event start indices: centred placement, one event per recurrence."""
        return np.array(
            [int(round((i + 0.5) * self.recurrence)) for i in range(self.n_events)],
            dtype=int,
        )


@dataclass(frozen=True)
class NoiseSpec:
    """White-noise wrapper: level (standard deviation) and stream seed."""

    c_wn: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.c_wn >= 0):
            raise ValueError("c_wn must be non-negative")


def _ramp(u: np.ndarray, shape: str) -> np.ndarray:
    """Monotone 0 -> 1 transition on [0, 1], exactly 0/1 outside."""
    u = np.clip(u, 0.0, 1.0)
    if shape == "linear":
        return u
    if shape == "quadratic-ease":
        return np.where(u < 0.5, 2.0 * u * u, 1.0 - 2.0 * (1.0 - u) ** 2)
    # Rescaled logistic: hits 0 and 1 exactly at the window edges.
    g = 1.0 / (1.0 + np.exp(-_LOGISTIC_K * (u - 0.5)))
    g0 = 1.0 / (1.0 + math.exp(_LOGISTIC_K / 2.0))
    g1 = 1.0 / (1.0 + math.exp(-_LOGISTIC_K / 2.0))
    return (g - g0) / (g1 - g0)


def generate_sse_like(spec: SseSignalSpec) -> tuple[TimeSeries, GroundTruth]:
    """Continuous trend-plus-reversals signal, z-score normalized.

    Returns the noiseless signal and the ground truth holding every event
    start and end index (2 per event).  A degenerate flat spec (no events,
    zero slope) is returned centered but unscaled.
    """
    t = np.arange(spec.length_days, dtype=float)
    values = spec.inter_event_slope * t

    starts = spec.event_starts()
    amps = spec.amplitudes()
    truth: list[int] = []
    for start, amp in zip(starts, amps):
        end = int(round(start + spec.event_duration))
        if start < 1 or end > spec.length_days - 2:
            raise ValueError(
                f"event [{start}, {end}] not interior to series of length {spec.length_days}"
            )
        values = values - amp * _ramp((t - start) / spec.event_duration, spec.ramp_shape)
        truth.extend((start, end))
    if any(b <= a for a, b in zip(truth, truth[1:])):
        raise ValueError("events overlap")

    std = sample_std(values) if values.size > 1 else 0.0
    centered = values - values.mean()
    normalized = centered / std if std > 0 else centered
    return TimeSeries(normalized), GroundTruth(tuple(truth))


def add_noise(signal: TimeSeries, noise: NoiseSpec) -> TimeSeries:
    """Add i.i.d. Gaussian noise with standard deviation c_wn."""
    rng = np.random.default_rng(np.random.SeedSequence(int(noise.seed)))
    eps = rng.standard_normal(len(signal))
    return TimeSeries(
        signal.values + noise.c_wn * eps, dt=signal.dt, origin=signal.origin
    )


def _check_knots(knots: Sequence[int], length: int) -> list[int]:
    ks = [int(k) for k in knots]
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("knots must be strictly increasing")
    if ks and (ks[0] < 1 or ks[-1] > length - 2):
        raise ValueError("knots must be interior indices")
    return ks


def generate_family(kind: str, **params) -> tuple[TimeSeries, GroundTruth]:
    """Continuous piecewise signal of a named family with knots as truth.

    Kinds and their parameters (all share ``length`` and ``knots``):

    - piecewise-linear: ``slopes`` (one per segment), optional ``start_value``.
    - piecewise-quadratic: ``curvatures`` (one per segment), optional
      ``initial_slope`` and ``start_value``; value and slope are continuous,
      so knots are exactly the curvature changes.
    - piecewise-exponential: ``rates`` (one per segment) and a non-zero
      ``start_value``.
    - sinusoidal: ``amplitudes`` and ``frequencies`` (one per segment),
      optional ``phase`` for the first segment; each segment's phase is
      solved so the join is continuous (requires |join value| <= |amplitude|).
    """
    length = int(params.pop("length"))
    if length < 4:
        raise ValueError("length must be >= 4")
    knots = _check_knots(params.pop("knots"), length)
    n_seg = len(knots) + 1
    bounds = [0] + knots + [length]
    values = np.empty(length, dtype=float)

    def seg_params(name: str) -> list[float]:
        arr = [float(v) for v in params.pop(name)]
        if len(arr) != n_seg:
            raise ValueError(f"{name} must have one entry per segment ({n_seg})")
        return arr

    if kind == "piecewise-linear":
        slopes = seg_params("slopes")
        v0 = float(params.pop("start_value", 0.0))
        for i in range(n_seg):
            lo, hi = bounds[i], bounds[i + 1]
            tau = np.arange(hi - lo, dtype=float)
            values[lo:hi] = v0 + slopes[i] * tau
            v0 = v0 + slopes[i] * (hi - lo)
    elif kind == "piecewise-quadratic":
        curvatures = seg_params("curvatures")
        v0 = float(params.pop("start_value", 0.0))
        slope = float(params.pop("initial_slope", 0.0))
        for i in range(n_seg):
            lo, hi = bounds[i], bounds[i + 1]
            tau = np.arange(hi - lo, dtype=float)
            values[lo:hi] = v0 + slope * tau + 0.5 * curvatures[i] * tau**2
            span = float(hi - lo)
            v0 = v0 + slope * span + 0.5 * curvatures[i] * span**2
            slope = slope + curvatures[i] * span
    elif kind == "piecewise-exponential":
        rates = seg_params("rates")
        v0 = float(params.pop("start_value", 1.0))
        if v0 == 0.0:
            raise ValueError("start_value must be non-zero for exponential segments")
        for i in range(n_seg):
            lo, hi = bounds[i], bounds[i + 1]
            tau = np.arange(hi - lo, dtype=float)
            values[lo:hi] = v0 * np.exp(rates[i] * tau)
            v0 = v0 * math.exp(rates[i] * (hi - lo))
    elif kind == "sinusoidal":
        amplitudes = seg_params("amplitudes")
        frequencies = seg_params("frequencies")
        phase = float(params.pop("phase", 0.0))
        v0 = amplitudes[0] * math.sin(phase)
        for i in range(n_seg):
            lo, hi = bounds[i], bounds[i + 1]
            amp, freq = amplitudes[i], frequencies[i]
            if amp == 0.0 or abs(v0) > abs(amp):
                raise ValueError(
                    f"segment {i} cannot join continuously: |{v0}| > |{amp}|"
                )
            phi = math.asin(v0 / amp)
            tau = np.arange(hi - lo, dtype=float)
            values[lo:hi] = amp * np.sin(freq * tau + phi)
            v0 = amp * math.sin(freq * (hi - lo) + phi)
    else:
        raise ValueError(f"unknown family kind: {kind}")

    if params:
        raise ValueError(f"unused parameters for {kind}: {sorted(params)}")
    return TimeSeries(values), GroundTruth(tuple(knots))


@dataclass(frozen=True)
class FamilySpec:
    """Named piecewise family plus its generate_family keyword parameters."""

    kind: str
    params: dict

    def __post_init__(self) -> None:
        if self.kind not in (
            "piecewise-linear",
            "piecewise-quadratic",
            "piecewise-exponential",
            "sinusoidal",
        ):
            raise ValueError(f"unknown family kind: {self.kind}")


def generate(spec: Union[SseSignalSpec, FamilySpec]) -> tuple[TimeSeries, GroundTruth]:
    """Dispatch a signal spec to its generator."""
    if isinstance(spec, SseSignalSpec):
        return generate_sse_like(spec)
    if isinstance(spec, FamilySpec):
        return generate_family(spec.kind, **dict(spec.params))
    raise TypeError(f"unsupported signal spec: {type(spec).__name__}")


def sse_benchmark_spec() -> SseSignalSpec:
    """One year, five events of ~7 days recurring every 74 days (10 truth points)."""
    return SseSignalSpec()


def two_sse_unequal_spec() -> SseSignalSpec:
    """Two events whose displacement jumps differ by a factor of 5."""
    full = 1.0 * (240.0 - 14.0)
    return SseSignalSpec(
        length_days=480,
        n_events=2,
        event_duration=14.0,
        recurrence=240.0,
        inter_event_slope=1.0,
        event_amplitudes=(full / 5.0, full),
    )


def two_sse_equal_spec() -> SseSignalSpec:
    """Two events with equal displacement jumps."""
    full = 1.0 * (240.0 - 14.0)
    return SseSignalSpec(
        length_days=480,
        n_events=2,
        event_duration=14.0,
        recurrence=240.0,
        inter_event_slope=1.0,
        event_amplitudes=(full, full),
    )
