"""Exception hierarchy shared by the solver suite."""

from __future__ import annotations


class TwrnError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(TwrnError, ValueError):
    """An input specification is invalid.

    ``field`` names the offending field so callers can report it.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericalError(TwrnError, ArithmeticError):
    """A non-finite value appeared where a finite one is required."""

    def __init__(self, message: str, sample=None):
        self.sample = sample
        super().__init__(message)


class SolverError(TwrnError):
    """Base class for failures inside the dual solvers."""


class BracketError(SolverError):
    """A rate target is not reachable with multipliers below ``bracket_max``."""

    def __init__(self, message: str, achieved: float | None = None):
        self.achieved = achieved
        super().__init__(message)


class MonotonicityError(SolverError):
    """A quantity assumed monotone in its multiplier was observed to decrease."""


class InfeasibleError(SolverError):
    """The time-fraction search could not make the fractions sum to one."""

    def __init__(self, message: str, closest_sum: float | None = None):
        self.closest_sum = closest_sum
        super().__init__(message)
