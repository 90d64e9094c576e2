"""Singular spectrum analysis: trajectory-matrix SVD and cumulative reconstruction.

A series of length T is embedded into the W x (T-W+1) Hankel trajectory
matrix, decomposed by SVD into rank-one terms, and each term is mapped back
to a length-T series by anti-diagonal averaging.  Components are ordered by
singular value; everything beyond the first ``num_components - 1`` ranks is
grouped into the last component so the components always sum back to the
input exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import TimeSeries

DEFAULT_WINDOW_CAP = 120
DEFAULT_NUM_COMPONENTS = 100


@dataclass(frozen=True)
class SsaConfig:
    """Embedding window length and number of retained components.

    ``None`` means auto: window = min(T // 2, 120), num_components = 100
    clipped to what the window allows.
    """

    window: Optional[int] = None
    num_components: Optional[int] = None

    def resolve(self, n_samples: int) -> tuple[int, int]:
        """Concrete (window, num_components) for a series of given length."""
        t = int(n_samples)
        if t < 4:
            raise ValueError(f"series too short for SSA, need >= 4 samples, got {t}")
        w = self.window if self.window is not None else min(t // 2, DEFAULT_WINDOW_CAP)
        w = int(w)
        if not (2 <= w <= t - 1):
            raise ValueError(f"window must satisfy 2 <= W <= T-1, got W={w}, T={t}")
        max_m = min(w, t - w + 1)
        if self.num_components is None:
            m = min(DEFAULT_NUM_COMPONENTS, max_m)
        else:
            m = int(self.num_components)
        if not (1 <= m <= max_m):
            raise ValueError(
                f"num_components must satisfy 1 <= M <= min(W, T-W+1)={max_m}, got {m}"
            )
        return w, m


@dataclass(frozen=True)
class Decomposition:
    """Ordered SSA components whose sum reproduces the input exactly."""

    components: np.ndarray  # shape (M, T)
    singular_values: np.ndarray  # shape (M,), non-increasing
    original_length: int
    dt: float = 1.0
    origin: float = 0.0

    @property
    def num_components(self) -> int:
        return self.components.shape[0]


def _antidiagonal_counts(w: int, k: int) -> np.ndarray:
    t = np.arange(w + k - 1)
    return np.minimum.reduce([t + 1, np.full_like(t, w), np.full_like(t, k), w + k - 1 - t])


def decompose(series: TimeSeries, config: SsaConfig = SsaConfig()) -> Decomposition:
    """Embed, SVD, and Hankelize into num_components ordered series.

    The last component absorbs every rank beyond the first M-1, so
    sum(components) equals the input to machine precision regardless of
    truncation.
    """
    x = series.values
    t = x.size
    w, m = config.resolve(t)
    k = t - w + 1

    traj = np.lib.stride_tricks.sliding_window_view(x, w).T  # W x K
    u, s, vt = np.linalg.svd(traj, full_matrices=False)

    counts = _antidiagonal_counts(w, k).astype(float)
    comps = np.empty((m, t), dtype=float)
    for j in range(m - 1):
        # Anti-diagonal sums of a rank-one outer product are a convolution.
        comps[j] = s[j] * np.convolve(u[:, j], vt[j, :]) / counts
    comps[m - 1] = x - comps[: m - 1].sum(axis=0)

    return Decomposition(
        components=comps,
        singular_values=s[:m].copy(),
        original_length=t,
        dt=series.dt,
        origin=series.origin,
    )


def reconstruct_cumulative(dec: Decomposition, k: int) -> TimeSeries:
    """Sum of the first k components (k = M reproduces the input)."""
    if not (1 <= k <= dec.num_components):
        raise IndexError(
            f"k must be in [1, {dec.num_components}], got {k}"
        )
    values = dec.components[:k].sum(axis=0)
    return TimeSeries(values, dt=dec.dt, origin=dec.origin)
