"""Exception hierarchy. The CLI maps ``InputError`` to exit code 1 and ``NumericError`` to 2."""


class TailDepError(Exception):
    """Base class for all errors raised by this package."""


class InputError(TailDepError, ValueError):
    """Malformed or out-of-range user input."""


class SizeError(InputError):
    pass


class ModeError(InputError):
    """An oracle quantity was requested but the sample carries no true uniforms."""


class BandwidthError(InputError):
    pass


class ModelError(InputError):
    """Invalid model parameters or an operation the family does not support."""


class NumericError(TailDepError, ArithmeticError):
    """Numerical failure: singular matrices, non-finite criterion values."""
