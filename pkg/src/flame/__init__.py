"""Marginal-sample active learning toolkit for open-vocabulary detection
proposals: shot selection, lightweight classifiers, and executable
support-set theory checks."""

from .errors import (
    AnnotationIncompleteError,
    ConfigError,
    ConvergenceError,
    DegenerateVectorError,
    DimensionError,
    DivergenceError,
    EmptyBandError,
    EmptyPoolError,
    FlameError,
    FormatError,
    InsufficientSamplesError,
    NoPositivesError,
    NotSeparableError,
    SingleClassError,
    UnknownShotError,
)
from .sampler import FlameConfig

__all__ = [
    "AnnotationIncompleteError",
    "ConfigError",
    "ConvergenceError",
    "DegenerateVectorError",
    "DimensionError",
    "DivergenceError",
    "EmptyBandError",
    "EmptyPoolError",
    "FlameConfig",
    "FlameError",
    "FormatError",
    "InsufficientSamplesError",
    "NoPositivesError",
    "NotSeparableError",
    "SingleClassError",
    "UnknownShotError",
]

__version__ = "0.1.0"
