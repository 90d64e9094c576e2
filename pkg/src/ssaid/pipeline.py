"""Noise-injection ensemble pipeline around the slope detector.

The input series is decomposed by SSA into cumulative reconstructions with
increasing residual noise; each reconstruction is re-noised at a grid of
levels; and at every (component, level) cell a group of independently
re-noised realizations is segmented by the detector.  Groups whose members
vote consistently (count mode, qualified fraction, location spread) mark
noise levels at which the piecewise-linear approximation works; their
column-mode locations are then aggregated into the final answer.  If no
group qualifies, the pipeline reports no change-points.

Group members run the detector with the noise scale pinned to
sqrt(sigma_input^2 + a_s^2) rather than a per-member estimate: a
reconstruction hides part of the input noise as smooth wander invisible to
difference-based estimates, and thresholding below that scale lets noise
bends masquerade as consistent change-points on signal-free inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from .core import DetectionResult, GroundTruth, TimeSeries, mode, quartile3, rmse, sample_std
from .isolate_detect import IdConfig, estimate_sigma, id_detect
from .ssa import SsaConfig, decompose, reconstruct_cumulative


@dataclass(frozen=True)
class SsaidConfig:
    """Ensemble sizes, thresholds, and seeding for the full pipeline.

    noise_levels (L) and realizations (Q) set the grid of M*L groups with Q
    members each; rmse_threshold (v) is the location-consistency bound in
    samples; noise_max_factor scales the top of the added-noise grid
    relative to the input sample std.  n_jobs > 1 parallelizes over groups
    without changing any result.
    """

    ssa: SsaConfig = field(default_factory=SsaConfig)
    noise_levels: int = 80
    realizations: int = 50
    rmse_threshold: float = 3.0
    noise_max_factor: float = 2.0
    seed: int = 0
    id: IdConfig = field(default_factory=IdConfig)
    n_jobs: int = 1

    def __post_init__(self) -> None:
        if self.noise_levels < 1:
            raise ValueError("noise_levels must be >= 1")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if not (self.rmse_threshold > 0):
            raise ValueError("rmse_threshold must be positive")
        if not (self.noise_max_factor > 0):
            raise ValueError("noise_max_factor must be positive")


def desk_config(**overrides) -> SsaidConfig:
    """Small preset (M=20, L=20, Q=30) for tests and quick runs."""
    base = dict(ssa=SsaConfig(num_components=20), noise_levels=20, realizations=30)
    base.update(overrides)
    return SsaidConfig(**base)


def full_config(**overrides) -> SsaidConfig:
    """Production-scale preset (M=100 clipped to the window, L=80, Q=50)."""
    base = dict(ssa=SsaConfig(), noise_levels=80, realizations=50)
    base.update(overrides)
    return SsaidConfig(**base)


@dataclass(frozen=True)
class GroupStats:
    """Vote diagnostics of one (component k, noise level s) group.

    h_mode is the modal change-point count over the group's members; a
    member is qualified when its count equals h_mode.  locations are the
    column modes of the qualified members' location matrix, canonicalized
    by sorting and deduplication; ``degenerate`` flags groups where
    deduplication lost a column.  omega3 is the third quartile of the
    qualified members' RMSE against those locations.
    """

    k: int
    s: int
    a_s: float
    h_mode: int
    r2: float
    kappa: int
    locations: tuple[int, ...]
    omega3: Optional[float]
    degenerate: bool = False


@dataclass(frozen=True)
class SsaidResult:
    detection: DetectionResult
    in_snl_groups: tuple[GroupStats, ...]
    all_groups: tuple[GroupStats, ...]
    config_echo: SsaidConfig
    warnings: tuple[str, ...] = ()


def noise_grid(series_std: float, num_levels: int, factor: float) -> np.ndarray:
    """Evenly spaced added-noise levels (s/L)*factor*std for s = 1..L."""
    if num_levels < 1:
        raise ValueError("num_levels must be >= 1")
    if not (series_std > 0):
        raise ValueError("series_std must be positive")
    s = np.arange(1, num_levels + 1, dtype=float)
    return (s / num_levels) * factor * series_std


def member_stream(seed: int, k: int, s: int, m: int) -> np.random.Generator:
    """Independent stream for ensemble member (k, s, m): reproducible and
    order-independent, so parallel schedules cannot change results."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=(int(k), int(s), int(m)))
    )


def voting_success_prob(p_s: float, q: int) -> float:
    """Probability that at least half of q independent detections succeed.

    Binomial tail sum from ceil(q/2) to q with per-trial success p_s,
    evaluated with log-binomial terms for numerical stability.
    """
    if not (0.0 <= p_s <= 1.0):
        raise ValueError(f"p_s must be in [0, 1], got {p_s}")
    if q < 1:
        raise ValueError("q must be >= 1")
    if p_s == 0.0:
        return 0.0
    if p_s == 1.0:
        return 1.0
    lp, lq = math.log(p_s), math.log1p(-p_s)
    lgq = math.lgamma(q + 1)
    total = 0.0
    for j in range(math.ceil(q / 2), q + 1):
        logterm = lgq - math.lgamma(j + 1) - math.lgamma(q - j + 1) + j * lp + (q - j) * lq
        total += math.exp(logterm)
    return min(total, 1.0)


def run_group(
    y: TimeSeries,
    a_s: float,
    streams: Sequence[np.random.Generator],
    id_cfg: IdConfig,
    k: int = 0,
    s: int = 0,
) -> GroupStats:
    """Vote over len(streams) re-noised realizations of y at level a_s."""
    if len(streams) < 1:
        raise ValueError("need at least one member stream")
    if a_s < 0:
        raise ValueError("a_s must be non-negative")
    counts: list[int] = []
    locations: list[tuple[int, ...]] = []
    n = len(y)
    for rng in streams:
        z = y.values + a_s * rng.standard_normal(n)
        det = id_detect(TimeSeries(z, dt=y.dt, origin=y.origin), id_cfg)
        counts.append(det.count)
        locations.append(det.locations)

    q = len(streams)
    h_mode = mode(counts)
    qualified = [loc for c, loc in zip(counts, locations) if c == h_mode]
    kappa = len(qualified)
    r2 = kappa / q

    if h_mode == 0:
        return GroupStats(k, s, float(a_s), 0, r2, kappa, (), None)

    column_modes = [mode([member[i] for member in qualified]) for i in range(h_mode)]
    canonical = tuple(sorted(set(column_modes)))
    if len(canonical) < h_mode:
        return GroupStats(k, s, float(a_s), h_mode, r2, kappa, canonical, None, degenerate=True)

    proxy = GroundTruth(canonical)
    errors = [rmse(DetectionResult(member), proxy) for member in qualified]
    omega3 = quartile3(errors)
    return GroupStats(k, s, float(a_s), h_mode, r2, kappa, canonical, omega3)


def identify_in_snl(groups: Sequence[GroupStats], v: float) -> list[GroupStats]:
    """Groups passing all three vote-consistency conditions, order preserved:
    qualified fraction >= 50%, non-zero count mode, location spread <= v."""
    return [
        g
        for g in groups
        if g.r2 >= 0.5
        and g.h_mode != 0
        and not g.degenerate
        and g.omega3 is not None
        and g.omega3 <= v
    ]


def _aggregate_verbose(in_snl: Sequence[GroupStats]) -> tuple[tuple[int, ...], bool]:
    n_hat = mode([g.h_mode for g in in_snl])
    majority = [g for g in in_snl if g.h_mode == n_hat]
    column_modes = [mode([g.locations[i] for g in majority]) for i in range(n_hat)]
    canonical = tuple(sorted(set(column_modes)))
    return canonical, len(canonical) < n_hat


def aggregate(in_snl: Sequence[GroupStats]) -> DetectionResult:
    """Final answer from qualifying groups: majority count, then column modes."""
    if not in_snl:
        raise ValueError("aggregate needs at least one qualifying group")
    locations, _ = _aggregate_verbose(in_snl)
    return DetectionResult(locations)


def _run_group_task(
    y_values: np.ndarray,
    dt: float,
    origin: float,
    a_s: float,
    seed: int,
    k: int,
    s: int,
    q: int,
    id_cfg: IdConfig,
) -> GroupStats:
    y = TimeSeries(y_values, dt=dt, origin=origin)
    streams = [member_stream(seed, k, s, m) for m in range(1, q + 1)]
    return run_group(y, a_s, streams, id_cfg, k=k, s=s)


def ssaid_detect(series: TimeSeries, config: SsaidConfig) -> SsaidResult:
    """Run the full pipeline on one series.

    Deterministic for a fixed (series, config): member noise streams are
    keyed by (seed, k, s, m), so the result does not depend on n_jobs or
    execution order.
    """
    n = len(series)
    if n < 30:
        raise ValueError(f"series too short for the pipeline, need >= 30, got {n}")

    std = sample_std(series.values)
    if not (std > 0):
        raise ValueError("input series is constant")
    grid = noise_grid(std, config.noise_levels, config.noise_max_factor)

    dec = decompose(series, config.ssa)
    m_comp = dec.num_components
    recon = [reconstruct_cumulative(dec, k) for k in range(1, m_comp + 1)]

    # Group members detect at sigma = hypot(input noise, injected noise);
    # see the module docstring for why per-member estimates are unsafe here.
    sigma_x = estimate_sigma(series)

    tasks = []
    for k in range(1, m_comp + 1):
        for s in range(1, config.noise_levels + 1):
            a_s = grid[s - 1]
            if config.id.sigma is None:
                id_cfg = replace(config.id, sigma=math.hypot(sigma_x, a_s))
            else:
                id_cfg = config.id
            tasks.append((recon[k - 1], a_s, k, s, id_cfg))

    q = config.realizations
    if config.n_jobs == 1:
        groups = [
            _run_group_task(y.values, y.dt, y.origin, a_s, config.seed, k, s, q, id_cfg)
            for (y, a_s, k, s, id_cfg) in tasks
        ]
    else:
        groups = Parallel(n_jobs=config.n_jobs)(
            delayed(_run_group_task)(
                y.values, y.dt, y.origin, a_s, config.seed, k, s, q, id_cfg
            )
            for (y, a_s, k, s, id_cfg) in tasks
        )

    in_snl = identify_in_snl(groups, config.rmse_threshold)
    warnings: tuple[str, ...] = ()
    if in_snl:
        locations, collided = _aggregate_verbose(in_snl)
        detection = DetectionResult(locations)
        if collided:
            warnings = ("duplicate aggregated locations were dropped",)
    else:
        detection = DetectionResult(())

    return SsaidResult(
        detection=detection,
        in_snl_groups=tuple(in_snl),
        all_groups=tuple(groups),
        config_echo=config,
        warnings=warnings,
    )


def _window_seed(seed: int, window_index: int) -> int:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(window_index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def ssaid_detect_sliding(
    series: TimeSeries, config: SsaidConfig, segment_len: int
) -> SsaidResult:
    """Windowed variant for signals with strongly unequal jump amplitudes.

    The series is cut into floor(T / segment_len) segments (the last absorbs
    the remainder); the pipeline runs on every window of three consecutive
    segments; window detections are mapped to global indices and merged by
    clustering within rmse_threshold samples, each cluster represented by
    the detection from the window where it sits most centrally.
    """
    if segment_len < 10:
        raise ValueError("segment_len must be >= 10")
    n = len(series)
    if n < 3 * segment_len:
        raise ValueError("series shorter than one window (3 * segment_len)")

    n_seg = n // segment_len
    windows: list[tuple[int, int]] = []
    for w in range(n_seg - 2):
        start = w * segment_len
        end = (w + 3) * segment_len if w + 3 < n_seg else n
        windows.append((start, end))

    all_groups: list[GroupStats] = []
    in_snl_groups: list[GroupStats] = []
    warnings: list[str] = []
    hits: list[tuple[int, int, float]] = []  # (global index, window, window centre)
    for w, (start, end) in enumerate(windows):
        sub = series.slice(start, end)
        sub_cfg = replace(config, seed=_window_seed(config.seed, w))
        res = ssaid_detect(sub, sub_cfg)
        all_groups.extend(res.all_groups)
        in_snl_groups.extend(res.in_snl_groups)
        warnings.extend(f"window {w}: {msg}" for msg in res.warnings)
        centre = (start + end - 1) / 2.0
        hits.extend((start + loc, w, centre) for loc in res.detection.locations)

    hits.sort()
    merged: list[int] = []
    v = config.rmse_threshold
    i = 0
    while i < len(hits):
        j = i + 1
        while j < len(hits) and hits[j][0] - hits[j - 1][0] <= v:
            j += 1
        cluster = hits[i:j]
        # Most central detection wins; ties go to the earlier window.
        best = min(cluster, key=lambda h: (abs(h[0] - h[2]), h[1]))
        merged.append(best[0])
        i = j

    detection = DetectionResult(tuple(sorted(set(merged))))
    return SsaidResult(
        detection=detection,
        in_snl_groups=tuple(in_snl_groups),
        all_groups=tuple(all_groups),
        config_echo=config,
        warnings=tuple(warnings),
    )
