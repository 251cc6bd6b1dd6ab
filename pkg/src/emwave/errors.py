"""Exception hierarchy.

Validation problems (bad input, bad configuration) derive from
:class:`ValidationError`; failures of a numerical procedure on otherwise
valid input derive from :class:`NumericalError`.  The CLI maps the two
families onto exit codes 1 and 2.
"""


class EmwaveError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(EmwaveError, ValueError):
    pass


class NumericalError(EmwaveError, ArithmeticError):
    pass


class DisconnectedTopologyError(ValidationError):
    pass


class NoEquilibriumError(NumericalError):
    pass


class InsufficientLengthError(ValidationError):
    pass


class WindowError(ValidationError):
    pass


class SignalFormatError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass
