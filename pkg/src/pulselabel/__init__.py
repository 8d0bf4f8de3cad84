"""pulselabel: adaptive labeling of streaming PPG windows.

Signal chain and HRV features, PPG quality indices, activity detection,
a density-proportional EMA query engine, batch analytics, a desk-scale
ingestion service, and a subject simulator that makes it all reproducible.
"""
from .errors import ConfigError, PulseLabelError, QualityTooLow, ValidationError
from .hrv import (
    FEATURE_NAMES,
    FeatureVector,
    FilterSpec,
    NnSeries,
    PeakTrain,
    PpgWindow,
    bandpass_filter,
    detect_peaks,
    extract_nn,
    hrv_features,
    moving_average,
    process_window,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "PulseLabelError", "QualityTooLow", "ValidationError",
    "FEATURE_NAMES", "FeatureVector", "FilterSpec", "NnSeries", "PeakTrain",
    "PpgWindow", "bandpass_filter", "detect_peaks", "extract_nn",
    "hrv_features", "moving_average", "process_window", "__version__",
]
