"""Exception types shared across the package."""


class DSPError(Exception):
    """Base class for all package errors."""


class InvalidDistributionError(DSPError, ValueError):
    pass


class DomainError(DSPError, ValueError):
    """An argument lies outside the region where a formula is defined."""


class CapExceededError(DSPError, ValueError):
    """Requested package count exceeds the coefficient-table cap."""


class QuadratureError(DSPError, ArithmeticError):
    """Adaptive quadrature failed to reach its tolerance.

    The best estimate reached so far is kept on the exception so callers
    can decide whether it is good enough.
    """

    def __init__(self, message, estimate, error_estimate):
        super().__init__(message)
        self.estimate = estimate
        self.error_estimate = error_estimate


class ConfigError(DSPError, ValueError):
    """Malformed command-line or config-file input."""
