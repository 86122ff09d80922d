"""Exception types shared across the package.

The CLI maps :class:`InputError` to exit code 2 and
:class:`NumericalError` to exit code 3.
"""


class QsvtEmuError(Exception):
    """Base class for package errors."""


class InputError(QsvtEmuError, ValueError):
    """Malformed or unsupported input (files, specs, parameters)."""


class NumericalError(QsvtEmuError, ArithmeticError):
    """A computation could not reach the requested accuracy."""


class SizeCapError(InputError):
    """A desk-scale size cap was exceeded."""
