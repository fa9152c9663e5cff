"""Exception hierarchy shared by every module."""


class ErmConcError(Exception):
    """Base class for library errors."""


class ConfigurationError(ErmConcError):
    """Inconsistent or incomplete model/scenario configuration."""


class DomainViolationError(ErmConcError, ValueError):
    """A parameter or argument lies outside its admissible domain."""


class UnsupportedScenarioError(ErmConcError):
    """The requested computation is not available for this family."""


class SolverFailureError(ErmConcError):
    """An inner solver did not reach its residual tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConditionViolationError(ErmConcError):
    """A mathematical hypothesis of a bound evaluator does not hold."""
