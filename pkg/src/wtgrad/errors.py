"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`WtgError`,
which subclasses ``ValueError`` so callers that already catch bad-input errors
keep working.
"""


class WtgError(ValueError):
    """Base class for all package errors."""


# distribution core
class EmptySample(WtgError):
    pass


class ValueOutsideSupport(WtgError):
    pass


class GridMismatch(WtgError):
    pass


class OutOfSupport(WtgError):
    pass


class InvalidIncrement(WtgError):
    pass


# regression / gradient
class DegenerateWindow(WtgError):
    """Too few distinct times inside the kernel window at the evaluation time."""


class NoAdmissibleBandwidth(WtgError):
    pass


class TimeOutOfRange(WtgError):
    pass


class LengthMismatch(WtgError):
    pass


# simulation
class InvalidProbability(WtgError):
    pass


class NumericalOverflow(WtgError):
    pass


class ZeroFrequency(WtgError):
    pass


# io
class ParseError(WtgError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyGroup(WtgError):
    pass


class AllZeroCounts(WtgError):
    pass


class BandwidthTooSmall(WtgError):
    pass


class ConfigError(WtgError):
    pass
