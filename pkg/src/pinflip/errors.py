"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: ValidationError -> 2,
CapacityError -> 3, ConvergenceError -> 4.
"""


class PinflipError(Exception):
    """Base class for all package errors."""


class ValidationError(PinflipError, ValueError):
    """An argument violates a documented precondition."""


class CapacityError(PinflipError):
    """A size cap was exceeded; the message names the cap."""


class ConvergenceError(PinflipError):
    """An iterative numeric routine failed to reach its tolerance."""


class SamplingError(PinflipError):
    """A rejection sampler exceeded its attempt budget with no fallback."""
