"""Exception types raised across the package."""


class LadpmError(Exception):
    """Base class for all package errors."""


class DomainError(LadpmError, ValueError):
    """A time or parameter lies outside the domain of a map."""


class OrderingError(LadpmError, ValueError):
    """Two times were supplied in the wrong order."""


class ScheduleError(LadpmError, ValueError):
    """A schedule violates its standing assumptions."""


class DegenerateTimeError(LadpmError, ValueError):
    """Evaluation at a time where sigma_t (or alpha_t) vanishes."""


class SequencingError(LadpmError, RuntimeError):
    """A multistep stepper was called without the history it needs."""


class ConfigError(LadpmError, ValueError):
    """Invalid sampler or experiment configuration."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvariantError(LadpmError, ArithmeticError):
    """A numerical check failed (used by the CLI to select exit code 3)."""


class RangeError(LadpmError, ValueError):
    """A logSNR value outside the range the schedule can reach."""
