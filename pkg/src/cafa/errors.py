"""Exception hierarchy shared by the library and the CLI.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented exit codes: 2 usage, 3 data, 4 model, 5 explanation.
"""


class CafaError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class UsageError(CafaError):
    """Bad invocation: missing keys, unknown options, malformed config."""

    exit_code = 2


class IngestionError(CafaError):
    """Malformed input data (bad row, unknown category, constant column)."""

    exit_code = 3


class InvalidInputError(CafaError):
    """A value handed to an operation violates its preconditions."""

    exit_code = 3


class TrainingError(CafaError):
    """Model training cannot proceed (single class, too few rows, ...)."""

    exit_code = 4


class ModelFormatError(CafaError):
    """A serialized model document cannot be decoded."""

    exit_code = 4


class ExplanationError(CafaError):
    """Base class for explainer failures."""

    exit_code = 5


class NeighborhoodImbalanceError(ExplanationError):
    """Rejection sampling exhausted its attempt budget before every class
    reached the requested size. Carries the per-class counts observed so
    far so callers can see which side of the boundary was unreachable."""

    def __init__(self, message, class_counts=None, attempts=0):
        super().__init__(message)
        self.class_counts = dict(class_counts or {})
        self.attempts = attempts


class SurrogateError(ExplanationError):
    """The local surrogate model could not be trained on the neighborhood."""

    def __init__(self, message, neighborhood_stats=None):
        super().__init__(message)
        self.neighborhood_stats = dict(neighborhood_stats or {})


class SizeLimitError(ExplanationError):
    """Exact Shapley requested for more features than the exact budget."""


class FitError(ExplanationError):
    """A least-squares surrogate fit failed (degenerate design matrix)."""


class CorrelationUndefinedError(ExplanationError):
    """Pearson correlation requested for a zero-variance vector."""


class GlobalFailureError(ExplanationError):
    """Every instance of a batch explanation run failed."""
