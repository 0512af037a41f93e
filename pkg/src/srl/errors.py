"""Exception hierarchy shared by the library and the CLI."""


class SRLError(Exception):
    """Base class for all errors raised by :mod:`srl`."""

    exit_code = 1


class ConfigError(SRLError, ValueError):
    """Invalid configuration, precondition breach or malformed input."""

    exit_code = 2


class DimensionError(ConfigError):
    """Input dimension does not match the network's input dimension."""


class DegenerateDirectionError(ConfigError):
    """A zero vector was passed where a sphere direction is required."""


class EmptyDataError(ConfigError):
    """An operation needs at least one sample."""


class DomainError(ConfigError):
    """Argument outside the domain of an analytic formula."""


class ParseError(ConfigError):
    """A model or data file could not be parsed."""


class NumericError(SRLError, ArithmeticError):
    """Non-finite values, divergence or failed numerical convergence."""

    exit_code = 3


class DivergenceError(NumericError):
    """The objective became non-finite during optimization."""


class RangeError(NumericError):
    """A root-finding bracket does not contain a crossing."""


class VerificationError(SRLError):
    """A property suite reported a failure."""

    exit_code = 4
