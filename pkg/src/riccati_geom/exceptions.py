"""Exception hierarchy shared by all modules.

The split mirrors the CLI exit codes: bad data or arguments raise
:class:`InputError` (exit 2), everything that goes wrong numerically raises a
subclass of :class:`NumericalError` (exit 3).
"""


class RiccatiGeomError(Exception):
    """Base class for all errors raised by this package."""


class InputError(RiccatiGeomError, ValueError):
    """Malformed, inconsistent or out-of-domain input data."""


class PoleError(InputError):
    """A rational matrix function was sampled at (or too close to) a pole."""


class NumericalError(RiccatiGeomError):
    """A numerical procedure failed or produced inconsistent results."""


class SolvabilityError(NumericalError):
    """A linear matrix equation has a singular operator (spectra overlap)."""


class NoStabilizingSolutionError(NumericalError):
    """The reduced Riccati problem has spectrum on the imaginary axis."""

    def __init__(self, message, eigenvalues=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues


class UnsupportedInstanceError(NumericalError):
    """The reduction-based solver cannot handle this problem instance."""
