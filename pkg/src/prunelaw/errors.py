"""Exception types shared across the package."""


class PruneLawError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PruneLawError):
    """A value or object violates a documented invariant."""


class CurveFormatError(PruneLawError):
    """A curve file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"{message} (line {line_number})"
        super().__init__(message)
        self.line_number = line_number


class LawDomainError(PruneLawError):
    """An input lies outside the domain of the requested law."""


class LawEvaluationError(PruneLawError):
    """A law produced a non-finite or undefined value for admissible inputs."""


class FitError(PruneLawError):
    """Fitting failed; ``diagnostics`` holds one line per attempted start."""

    def __init__(self, message: str, diagnostics: list[str] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class MetricError(PruneLawError):
    """A goodness-of-fit metric is undefined for the given series."""


class SplitError(PruneLawError):
    """A generalization split is infeasible on the given curve set."""


class BracketError(PruneLawError):
    """A root bracket did not contain the sought crossing."""
