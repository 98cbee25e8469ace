"""Exception types raised across the package."""


class StressGrowthError(Exception):
    """Base class for all package errors."""


class SingularMatrixError(StressGrowthError, ValueError):
    pass


class NotSPDError(StressGrowthError, ValueError):
    """Raised when a tensor expected to be symmetric positive definite is not.

    ``min_eigenvalue`` carries the smallest eigenvalue found (or ``nan`` when the
    input was too asymmetric to decompose).
    """

    def __init__(self, message, min_eigenvalue=float("nan")):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class AsymmetricInputError(StressGrowthError, ValueError):
    pass


class DegenerateDirectionError(StressGrowthError, ArithmeticError):
    pass


class LocalConvergenceError(StressGrowthError, ArithmeticError):
    """The integration-point Newton solve did not converge; ``report`` holds details."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ElementInversionError(StressGrowthError, ArithmeticError):
    pass


class StepFailureError(StressGrowthError, RuntimeError):
    """A load step failed even after the allowed number of bisections."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(StressGrowthError, ValueError):
    pass
