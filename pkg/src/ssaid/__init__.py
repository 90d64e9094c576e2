"""Change-point detection for noisy series with unknown continuous piecewise structure."""

from .core import DetectionResult, GroundTruth, TimeSeries, mode, quartile3, rmse, zscore_normalize
from .isolate_detect import IdConfig, estimate_sigma, id_detect, slope_contrast
from .pipeline import (
    GroupStats,
    SsaidConfig,
    SsaidResult,
    desk_config,
    full_config,
    ssaid_detect,
    ssaid_detect_sliding,
)
from .ssa import Decomposition, SsaConfig, decompose, reconstruct_cumulative

__version__ = "0.1.0"

__all__ = [
    "DetectionResult",
    "GroundTruth",
    "TimeSeries",
    "mode",
    "quartile3",
    "rmse",
    "zscore_normalize",
    "Decomposition",
    "SsaConfig",
    "decompose",
    "reconstruct_cumulative",
    "IdConfig",
    "estimate_sigma",
    "id_detect",
    "slope_contrast",
    "GroupStats",
    "SsaidConfig",
    "SsaidResult",
    "desk_config",
    "full_config",
    "ssaid_detect",
    "ssaid_detect_sliding",
    "__version__",
]
