"""Exception hierarchy.

Errors split into two families so the CLI can map them to exit codes:
input/validation problems (exit 2) and numerical failures (exit 3).
"""


class FreundlichError(Exception):
    """Base class for all package errors."""


class InvalidInputError(FreundlichError, ValueError):
    """A parameter or measurement is outside its valid domain."""


class InsufficientDataError(InvalidInputError):
    """Too few points, levels or replicates for the requested estimate."""


class NonpositiveObservableError(InvalidInputError):
    """A c_e or derived X value is not strictly positive, so its log is undefined."""


class RejectedIsotherm(InvalidInputError):
    """An isotherm cannot be weighted, e.g. an estimated fractional decrease is <= 0."""


class NumericalError(FreundlichError, ArithmeticError):
    """Base class for numerical failures."""


class BracketError(NumericalError):
    """The root is not bracketed by the supplied interval."""


class ConvergenceError(NumericalError):
    """An iterative routine hit its iteration cap."""


class DegenerateDesignError(NumericalError):
    """The regression design matrix is singular (all x equal)."""


class DegenerateSystemError(NumericalError):
    """A simulated system keeps producing unusable isotherms."""
