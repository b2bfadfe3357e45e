"""Differentiable binaural spatial-cue losses, metrics and a small scene simulator."""

from binspatial.config import (
    DEFAULT_SAMPLE_RATE,
    EvalConfig,
    LossWeights,
    SpatialKind,
    StftConfig,
    max_lag_for,
)
from binspatial.signal import BinauralSignal

__all__ = [
    "DEFAULT_SAMPLE_RATE",
    "BinauralSignal",
    "EvalConfig",
    "LossWeights",
    "SpatialKind",
    "StftConfig",
    "max_lag_for",
]

__version__ = "0.1.0"
