"""Experiment harness: success-rate curves, noise-range scans, sensitivity sweeps.

A sweep fixes a ground-truthed signal, walks a grid of white-noise levels,
runs a chosen detector on seeded noisy instances, and reports per-level
success fractions plus the contiguous noise range where the detector
succeeds in at least half of the trials.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from .baseline import AicConfig, delta_aic_series, threshold_detect
from .core import DetectionResult, GroundTruth, TimeSeries, rmse
from .isolate_detect import IdConfig, id_detect
from .pipeline import SsaidConfig, desk_config, ssaid_detect, ssaid_detect_sliding
from .simulate import FamilySpec, SseSignalSpec, generate

DETECTORS = ("id-direct", "ssaid", "ssaid-sliding", "baseline")


def success(detection: DetectionResult, truth: GroundTruth, v: float) -> bool:
    """Correct count and location RMSE strictly below v."""
    if detection.count != truth.count:
        return False
    return rmse(detection, truth) < v


@dataclass(frozen=True)
class ExperimentConfig:
    signal: Union[SseSignalSpec, FamilySpec]
    noise_grid: tuple[float, ...]
    seeds_per_level: int = 20
    detector: str = "id-direct"
    v: float = 3.0
    id_cfg: IdConfig = field(default_factory=IdConfig)
    ssaid_cfg: SsaidConfig = field(default_factory=desk_config)
    aic_cfg: AicConfig = field(default_factory=AicConfig)
    zeta: float = -10.0
    segment_len: int = 80
    master_seed: int = 0
    n_jobs: int = 1

    def __post_init__(self) -> None:
        if self.seeds_per_level < 1:
            raise ValueError("seeds_per_level must be >= 1")
        grid = tuple(float(c) for c in self.noise_grid)
        if not grid:
            raise ValueError("noise_grid must be non-empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("noise_grid must be sorted ascending")
        if any(c < 0 for c in grid):
            raise ValueError("noise levels must be non-negative")
        object.__setattr__(self, "noise_grid", grid)
        if self.detector not in DETECTORS:
            raise ValueError(f"detector must be one of {DETECTORS}")


@dataclass(frozen=True)
class TrialRecord:
    level: float
    seed_index: int
    detected_count: int
    rmse: Optional[float]
    success: bool


@dataclass(frozen=True)
class LevelStats:
    r_sd: float
    r1: float
    mean_rmse_when_correct: Optional[float]


@dataclass(frozen=True)
class SnlReport:
    """Per-level success statistics and the derived suitable-noise interval."""

    per_level: dict[float, LevelStats]
    snl_interval: Optional[tuple[float, float]]
    trials: tuple[TrialRecord, ...]
    seeds_per_level: int

    def r_sd_curve(self) -> np.ndarray:
        return np.array([st.r_sd for st in self.per_level.values()])


def _run_trial(
    config: ExperimentConfig,
    signal_values: np.ndarray,
    dt: float,
    origin: float,
    truth: GroundTruth,
    level_index: int,
    level: float,
    seed_index: int,
) -> TrialRecord:
    ss = np.random.SeedSequence(
        entropy=int(config.master_seed), spawn_key=(level_index, seed_index)
    )
    noise_child, detector_child = ss.spawn(2)
    eps = np.random.default_rng(noise_child).standard_normal(signal_values.size)
    x = TimeSeries(signal_values + level * eps, dt=dt, origin=origin)
    det_seed = int(detector_child.generate_state(1, dtype=np.uint64)[0])

    if config.detector == "id-direct":
        detection = id_detect(x, config.id_cfg)
    elif config.detector == "ssaid":
        cfg = replace(config.ssaid_cfg, seed=det_seed, n_jobs=1)
        detection = ssaid_detect(x, cfg).detection
    elif config.detector == "ssaid-sliding":
        cfg = replace(config.ssaid_cfg, seed=det_seed, n_jobs=1)
        detection = ssaid_detect_sliding(x, cfg, config.segment_len).detection
    else:
        detection = threshold_detect(delta_aic_series(x, config.aic_cfg), config.zeta)

    if detection.count == truth.count:
        err = rmse(detection, truth)
        return TrialRecord(level, seed_index, detection.count, err, err < config.v)
    return TrialRecord(level, seed_index, detection.count, None, False)


def _extract_snl(
    grid: Sequence[float], r_sd: Sequence[float]
) -> Optional[tuple[float, float]]:
    """Longest contiguous run of levels with r_sd >= 0.5 (earliest on ties)."""
    best: Optional[tuple[int, int]] = None
    i = 0
    n = len(grid)
    while i < n:
        if r_sd[i] < 0.5:
            i += 1
            continue
        j = i
        while j + 1 < n and r_sd[j + 1] >= 0.5:
            j += 1
        if best is None or (j - i) > (best[1] - best[0]):
            best = (i, j)
        i = j + 1
    if best is None:
        return None
    return (float(grid[best[0]]), float(grid[best[1]]))


def run_sweep(config: ExperimentConfig) -> SnlReport:
    """Seeded Monte Carlo over (noise level, trial); deterministic given
    master_seed, independent of n_jobs."""
    signal, truth = generate(config.signal)
    jobs = [
        (li, level, j)
        for li, level in enumerate(config.noise_grid)
        for j in range(config.seeds_per_level)
    ]
    runner = (
        Parallel(n_jobs=config.n_jobs)
        if config.n_jobs != 1
        else None
    )
    if runner is None:
        trials = [
            _run_trial(config, signal.values, signal.dt, signal.origin, truth, li, level, j)
            for (li, level, j) in jobs
        ]
    else:
        trials = runner(
            delayed(_run_trial)(
                config, signal.values, signal.dt, signal.origin, truth, li, level, j
            )
            for (li, level, j) in jobs
        )

    per_level: dict[float, LevelStats] = {}
    xi = config.seeds_per_level
    for li, level in enumerate(config.noise_grid):
        chunk = trials[li * xi : (li + 1) * xi]
        n_success = sum(t.success for t in chunk)
        correct = [t.rmse for t in chunk if t.rmse is not None]
        per_level[level] = LevelStats(
            r_sd=n_success / xi,
            r1=len(correct) / xi,
            mean_rmse_when_correct=float(np.mean(correct)) if correct else None,
        )

    snl = _extract_snl(config.noise_grid, [per_level[c].r_sd for c in config.noise_grid])
    return SnlReport(
        per_level=per_level,
        snl_interval=snl,
        trials=tuple(trials),
        seeds_per_level=xi,
    )


def sensitivity_sweep(
    param: str, values: Sequence[int], base: ExperimentConfig
) -> dict[int, SnlReport]:
    """Re-run the sweep varying the ensemble size Q or the noise-level count L."""
    if param not in ("Q", "L"):
        raise ValueError("param must be 'Q' or 'L'")
    if not values:
        raise ValueError("values must be non-empty")
    reports: dict[int, SnlReport] = {}
    for value in values:
        if param == "Q":
            cfg = replace(base.ssaid_cfg, realizations=int(value))
        else:
            cfg = replace(base.ssaid_cfg, noise_levels=int(value))
        reports[int(value)] = run_sweep(replace(base, ssaid_cfg=cfg))
    return reports


def convergence_diagnostics(reports: dict[int, SnlReport]) -> list[tuple[int, int, float]]:
    """Sup-norm distance between success curves of consecutive parameter values."""
    keys = sorted(reports)
    out = []
    for a, b in zip(keys, keys[1:]):
        diff = float(np.max(np.abs(reports[a].r_sd_curve() - reports[b].r_sd_curve())))
        out.append((a, b, diff))
    return out


def calibrate_threshold_const(
    c_values: Sequence[float],
    n_series: int = 200,
    length: int = 365,
    master_seed: int = 0,
    base: IdConfig = IdConfig(),
) -> dict[float, float]:
    """False-detection rate of the slope detector on pure Gaussian noise,
    per candidate threshold constant.  Used to pin the default."""
    rates: dict[float, float] = {}
    series = []
    for i in range(n_series):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=int(master_seed), spawn_key=(i,))
        )
        series.append(TimeSeries(rng.standard_normal(length)))
    for c in c_values:
        cfg = replace(base, threshold_const=float(c))
        false = sum(id_detect(x, cfg).count > 0 for x in series)
        rates[float(c)] = false / n_series
    return rates
