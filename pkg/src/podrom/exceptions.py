"""Exception types shared across the package."""


class AssemblyFailure(RuntimeError):
    """Raised when finite element assembly meets a degenerate element."""


class StepFailure(RuntimeError):
    """Implicit step did not converge.

    Carries the time at which the step was attempted and the last
    residual norm seen by the Newton iteration.
    """

    def __init__(self, time: float, residual: float, message: str = ""):
        self.time = time
        self.residual = residual
        super().__init__(
            message or f"implicit step failed at t={time:.6g} (residual {residual:.3e})"
        )


class InsufficientData(RuntimeError):
    """Not enough structure in the data to carry out the request."""


class EmptyBasis(RuntimeError):
    """All snapshot correlation eigenvalues fell below the rank tolerance."""


class UnsupportedAudit(ValueError):
    """The audited inequality does not apply to the given configuration."""


class DegenerateDensity(UserWarning):
    """Warning category used when a sampling density is numerically zero."""
