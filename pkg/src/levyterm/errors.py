"""Exception hierarchy shared by the pricing, simulation and CLI layers."""

from __future__ import annotations


class LevyTermError(Exception):
    """Base class for all package errors."""


class StripError(LevyTermError, ValueError):
    """An argument left the strip on which a moment generating function is finite.

    Attributes
    ----------
    lower, upper : float
        The admissible interval for the real part.
    value : float
        The offending real part.
    """

    def __init__(self, message: str, *, lower: float, upper: float, value: float):
        super().__init__(f"{message}: Re z = {value:.12g} not in [{lower:.12g}, {upper:.12g}]")
        self.lower = lower
        self.upper = upper
        self.value = value


class InfeasibleStripError(LevyTermError, ValueError):
    """The volatility structure is too large for the driver's exponential moments."""


class QuadratureError(LevyTermError, RuntimeError):
    """Adaptive quadrature or truncation failed to meet its tolerance."""


class NoSolutionError(LevyTermError, ValueError):
    """Implied volatility inversion has no solution for the given price."""


class PlanError(LevyTermError, ValueError):
    """A simulation plan is inconsistent with the model or contract."""


class ConfigError(LevyTermError, ValueError):
    """A run configuration failed validation."""
