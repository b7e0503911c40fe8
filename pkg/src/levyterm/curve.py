"""Initial zero-coupon curve ``T -> B(0, T)``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DiscountCurve:
    """Discount factors on pillar times, interpolated log-linearly.

    Beyond the last pillar the last log-slope (constant forward rate) is
    extended. ``B(0, 0) = 1`` is implied and must not be contradicted.

    Parameters
    ----------
    times : sequence of float
        Strictly increasing positive pillar times.
    discounts : sequence of float
        Zero-coupon prices at the pillars; positive and nonincreasing.
    """

    times: tuple
    discounts: tuple
    _t: np.ndarray = field(init=False, repr=False, compare=False)
    _logb: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        b = np.asarray(self.discounts, dtype=float)
        if t.ndim != 1 or t.shape != b.shape or t.size == 0:
            raise ValueError("times and discounts must be 1-d of equal nonzero length")
        if t[0] == 0.0:
            if b[0] != 1.0:
                raise ValueError(f"B(0,0) must be 1, got {b[0]}")
            t, b = t[1:], b[1:]
        if np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("pillar times must be positive and strictly increasing")
        if np.any(b <= 0):
            raise ValueError("discount factors must be positive")
        full = np.concatenate([[1.0], b])
        if np.any(np.diff(full) > 0):
            raise ValueError("discount factors must be nonincreasing in maturity")
        object.__setattr__(self, "times", tuple(t))
        object.__setattr__(self, "discounts", tuple(b))
        object.__setattr__(self, "_t", np.concatenate([[0.0], t]))
        object.__setattr__(self, "_logb", np.log(full))

    @classmethod
    def flat(cls, rate: float, horizon: float = 50.0) -> "DiscountCurve":
        """Flat continuously compounded curve ``B(0, T) = exp(-rate T)``."""
        if rate < 0:
            raise ValueError("flat curve needs a nonnegative rate")
        return cls((horizon,), (math.exp(-rate * horizon),))

    def __call__(self, T):
        T = np.asarray(T, dtype=float)
        if np.any(T < 0):
            raise ValueError("maturity must be nonnegative")
        t, lb = self._t, self._logb
        inside = np.interp(T, t, lb)
        slope = (lb[-1] - lb[-2]) / (t[-1] - t[-2])
        out = np.where(T > t[-1], lb[-1] + slope * (T - t[-1]), inside)
        res = np.exp(out)
        return float(res) if res.ndim == 0 else res

    def forward_price(self, T: float, U: float) -> float:
        """``B(0, T) / B(0, U)``."""
        return self(T) / self(U)
