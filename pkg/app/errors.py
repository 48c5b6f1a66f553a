"""Exception hierarchy and error classification for solver runs."""
from typing import Any, Dict, List, Optional, Tuple

from app.models import ErrorType


class FlowError(Exception):
    """Base class for every error raised by the solver package."""

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.context = context or {}


class DomainError(FlowError):
    """Argument outside the domain of a function (negative density, r < 0, ...)."""


class ConfigurationError(FlowError):
    """Invalid run configuration or geometry."""


class HypothesisError(FlowError):
    """Upstream data violating the admissibility hypotheses."""


class OutOfBranchError(FlowError):
    """Momentum density above the sonic value of the subsonic branch."""


class SingularityError(FlowError):
    """Sonic degeneracy in the density partials."""


class NumericalError(FlowError):
    """Non-finite values, linear-solver breakdown or inner-iteration failure."""


class DivergedError(FlowError):
    """Picard iteration failed to converge."""

    def __init__(self, message: str, history: Optional[List[float]] = None,
                 context: Optional[Dict[str, Any]] = None):
        super().__init__(message, context)
        self.history = list(history or [])


class TracingError(FlowError):
    """A traced streamline left the fluid through the obstacle."""


class InsufficientDataError(FlowError):
    """Not enough records to form the requested diagnostic."""


class PreconditionError(FlowError):
    """Caller violated a documented precondition."""


_CLASSIFICATION = (
    (ConfigurationError, ErrorType.CONFIGURATION, "Configuration error"),
    (HypothesisError, ErrorType.HYPOTHESIS, "Hypothesis violated"),
    (OutOfBranchError, ErrorType.OUT_OF_BRANCH, "Outside subsonic branch"),
    (SingularityError, ErrorType.SINGULARITY, "Sonic singularity"),
    (DivergedError, ErrorType.DIVERGED, "Picard iteration diverged"),
    (NumericalError, ErrorType.NUMERICAL, "Numerical failure"),
    (TracingError, ErrorType.TRACING, "Streamline tracing failed"),
    (InsufficientDataError, ErrorType.INSUFFICIENT_DATA, "Insufficient data"),
    (PreconditionError, ErrorType.PRECONDITION, "Precondition violated"),
    (DomainError, ErrorType.DOMAIN, "Domain error"),
)


def classify_error(exception: Exception) -> Tuple[ErrorType, str]:
    """Classify an exception into an error type."""
    error_message = str(exception)

    for exc_type, error_type, label in _CLASSIFICATION:
        if isinstance(exception, exc_type):
            return error_type, f"{label}: {error_message}"

    if isinstance(exception, (FileNotFoundError, PermissionError, IsADirectoryError)):
        return ErrorType.CONFIGURATION, f"File error: {error_message}"

    return ErrorType.UNKNOWN, f"Unknown error: {error_message}"


def exit_code_for(error_type: ErrorType) -> int:
    """Map an error type to a process exit status (1 usage/config, 2 run failure)."""
    if error_type in (ErrorType.CONFIGURATION, ErrorType.PRECONDITION):
        return 1
    return 2
