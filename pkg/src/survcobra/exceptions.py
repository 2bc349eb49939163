"""Exception types shared across the package."""

from __future__ import annotations


class ConvergenceError(RuntimeError):
    """An iterative optimizer failed to converge.

    Carries the objective trace so callers can inspect what happened.
    """

    def __init__(self, message: str, trace: tuple[float, ...] = ()):
        super().__init__(message)
        self.trace = trace


class ConfigError(ValueError):
    """A user-supplied configuration file or flag is invalid."""


class TuningError(RuntimeError):
    """Every hyperparameter trial failed; carries the trial trace."""

    def __init__(self, message: str, trace=()):
        super().__init__(message)
        self.trace = tuple(trace)
