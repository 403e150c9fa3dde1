"""Exception hierarchy shared by all modules."""


class BubbleReduceError(Exception):
    """Base class for every error raised by the package."""


class DomainError(BubbleReduceError, ValueError):
    """Parameters outside the region where a formula or integral converges."""


class DegenerateConfigError(DomainError):
    """Configuration collapses (coincident centers, zero denominators)."""


class AdmissibilityError(DomainError):
    """Flatness data violate the sign condition needed by the reduced system."""


class ToleranceError(BubbleReduceError):
    """Adaptive quadrature could not reach the requested tolerance.

    The best available estimate is kept on the exception so callers can
    decide whether it is still usable.
    """

    def __init__(self, message, value, error):
        super().__init__(message)
        self.value = value
        self.error = error


class ConvergenceError(BubbleReduceError):
    """An iterative solver stopped without meeting its stopping rule."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class InconclusiveDegreeError(BubbleReduceError):
    """The planar map vanishes (numerically) on the boundary of the box."""


class CertificateError(BubbleReduceError):
    """A computed certificate (degree, sign ledger, ...) has the wrong value."""


class SeparationError(BubbleReduceError):
    """Energy minimizer sits on the box boundary; centers not far enough apart."""
