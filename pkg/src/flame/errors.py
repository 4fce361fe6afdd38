"""Exception types shared across the toolkit.

Every error carries a stable ``code`` string so the CLI and HTTP service can
emit machine-readable payloads without re-mapping exception classes.
"""

from __future__ import annotations


class FlameError(Exception):
    """Base class for all toolkit errors."""

    code = "flame_error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_payload(self) -> dict:
        return {"code": self.code, "message": self.message, "details": self.details}


class ConfigError(FlameError):
    """Invalid hyperparameter or configuration value."""

    code = "config_error"


class DimensionError(FlameError):
    """Operands with incompatible dimensions."""

    code = "dimension_error"


class DegenerateVectorError(FlameError):
    """Zero-norm vector where a direction is required."""

    code = "degenerate_vector"


class EmptyPoolError(FlameError):
    """An operation received an empty embedding pool."""

    code = "empty_pool"


class EmptyBandError(FlameError):
    """No pool point falls inside the requested density band.

    Carries diagnostics (mode density, min/max sample density) so callers can
    widen the ratio interval.
    """

    code = "empty_band"

    def __init__(self, message: str, *, mode_density: float, min_density: float,
                 max_density: float):
        super().__init__(message, mode_density=mode_density,
                         min_density=min_density, max_density=max_density)
        self.mode_density = mode_density
        self.min_density = min_density
        self.max_density = max_density


class InsufficientSamplesError(FlameError):
    """Fewer samples than requested clusters/shots."""

    code = "insufficient_samples"


class SingleClassError(FlameError):
    """Labels contain only one class; a binary classifier cannot train."""

    code = "single_class"


class ConvergenceError(FlameError):
    """Iterative solver hit its update budget before reaching tolerance."""

    code = "convergence_error"


class DivergenceError(FlameError):
    """Training loss became non-finite."""

    code = "divergence_error"


class NotSeparableError(FlameError):
    """Data is not separable in a regime that requires separability."""

    code = "not_separable"


class NoPositivesError(FlameError):
    """Evaluation requested with no positive ground-truth items."""

    code = "no_positives"


class UnknownShotError(FlameError):
    """A label refers to an id outside the current shot selection."""

    code = "unknown_shot"


class FormatError(FlameError):
    """A persisted file does not match its declared format."""

    code = "format_error"


class AnnotationIncompleteError(FlameError):
    """The labeling oracle did not produce a label for every shot."""

    code = "annotation_incomplete"

    def __init__(self, message: str, *, partial_labels: dict):
        super().__init__(message, partial_labels=dict(partial_labels))
        self.partial_labels = dict(partial_labels)
