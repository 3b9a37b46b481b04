"""Exception types raised across the package.

Everything derives from VbquantError so callers can catch the package's
failures with a single except clause. Batch drivers (the CLI) rely on that.
"""


class VbquantError(Exception):
    """Base class for all package errors."""


class ParseError(VbquantError):
    """Input text could not be parsed. Carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class AxisError(VbquantError):
    """Spectrum axis is not strictly increasing or otherwise unusable."""


class EmptyError(VbquantError):
    """Too few valid samples to build a spectrum."""


class MissingExcitation(VbquantError):
    """Conversion to or from Raman shift requires the excitation energy."""


class DomainError(VbquantError):
    """Requested value lies outside the physically meaningful domain."""


class IllConditioned(VbquantError):
    """Baseline anchor region cannot support the requested polynomial."""


class EmptyWindow(VbquantError):
    """Integration or fit window contains no spectrum samples."""


class WindowTooSmall(VbquantError):
    """Fit window holds fewer samples than the fit has free parameters."""


class NonConvergence(VbquantError):
    """Iterative fit hit its iteration cap before meeting tolerance."""

    def __init__(self, message, iterations=None, cost=None, gradient_norm=None):
        super().__init__(message)
        self.iterations = iterations
        self.cost = cost
        self.gradient_norm = gradient_norm


class SingularJacobian(VbquantError):
    """Model Jacobian is rank deficient at the seed values."""


class AmbiguousAssignment(VbquantError):
    """A fitted peak is equidistant from two preset identities."""


class DegenerateGeometry(VbquantError):
    """Activation model geometry too close to its removable singularity."""


class InsufficientData(VbquantError):
    """Not enough observations to determine the requested parameters."""


class NoSolution(VbquantError):
    """Inversion target is outside the range any input could produce."""


class InsufficientAngles(VbquantError):
    """Polarization series has too few angles or too little coverage."""
