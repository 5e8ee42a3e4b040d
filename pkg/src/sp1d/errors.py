"""Exception hierarchy shared by every module."""
from __future__ import annotations


class SP1DError(Exception):
    """Base class for all package errors."""


class ConfigError(SP1DError):
    """Problems with a scenario configuration (exit code 1)."""


class ParseError(ConfigError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RangeError(ConfigError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class NumericalError(SP1DError):
    """Numerical failures (exit code 2)."""


class NonPositiveArgument(NumericalError, ValueError):
    pass


class NonPositiveCell(NumericalError):
    pass


class NonPositiveInput(NumericalError, ValueError):
    pass


class NotIntegrableAtInfinity(NumericalError):
    pass


class OutOfRange(NumericalError, ValueError):
    pass


class ConditionFails(NumericalError):
    pass


class MajorantViolation(NumericalError):
    def __init__(self, r: float, message: str):
        super().__init__(f"{message} at r={r:.6g}")
        self.r = r


class NoDefaultMajorant(NumericalError):
    pass


class NoMajorant(NumericalError):
    pass


class NoRoot(NumericalError):
    pass


class NoSignChange(NumericalError, ValueError):
    pass


class SingularSystem(NumericalError):
    pass


class StepFailure(NumericalError):
    def __init__(self, t: float, message: str = "step failed"):
        super().__init__(f"{message} at t={t:.6g}")
        self.t = t


class MassDefect(NumericalError):
    pass


class GridMismatch(NumericalError, ValueError):
    pass


class WrongFamily(NumericalError, ValueError):
    pass


class BadExponent(NumericalError, ValueError):
    pass
