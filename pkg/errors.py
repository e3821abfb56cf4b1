"""
Exception hierarchy for the KPP solver and inversion toolkit.
Every error raised on purpose by this package derives from KppError.
"""


class KppError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(KppError):
    """Invalid or incomplete run configuration."""


class DomainError(KppError):
    """A field was evaluated outside its domain."""


class OffGridError(KppError):
    """An observation point does not coincide with a grid node."""


class InvalidProblemError(KppError):
    """The problem violates the boundary/initial-data hypotheses."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid problem: " + "; ".join(self.violations))


class SolverError(KppError):
    """A nonlinear time step did not converge."""

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"{message} at step {step}"
        super().__init__(message)


class PositivityError(SolverError):
    """The discrete solution went negative beyond roundoff."""


class TraceError(KppError):
    """Malformed, empty or incompatible point trace."""


class StationaryError(KppError):
    """Time marching did not reach a positive equilibrium."""


class DegenerateFieldError(KppError):
    """A reference field is (numerically) identically zero."""


class BatchError(KppError):
    """A batch produced no usable result."""
