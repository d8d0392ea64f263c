"""Exception types shared across the toolkit."""


class SurvbenchError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(SurvbenchError):
    """A table is missing required columns or has an incompatible layout."""


class DataError(SurvbenchError):
    """Input values violate a data invariant (negative counts, bad labels)."""


class ConfigError(SurvbenchError):
    """A benchmark configuration failed validation."""


class ConvergenceError(SurvbenchError):
    """An iterative fit did not reach its gradient tolerance."""

    def __init__(self, message, gradient_norm=None):
        super().__init__(message)
        self.gradient_norm = gradient_norm


class SeparationError(SurvbenchError):
    """Coefficients diverged during fitting, usually from perfect separation."""


class EvaluationError(SurvbenchError):
    """A metric could not be computed on the given predictions."""
