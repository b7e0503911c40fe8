"""Tenor structures and cap/floor contracts on compositions of LIBOR rates.

A composition over ``T_1 < ... < T_{N+1} = T*`` with fixings ``s_i <= T_i`` pays
``prod_i (1 + delta_i L(s_i, T_i))`` at ``T*``. A cap with level ``K`` pays the
excess over ``K``, a floor the shortfall.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TenorStructure:
    """Dates ``T_1 < ... < T_{N+1}`` (``T_0 = 0`` implicit) with fixing dates.

    ``fixings[i]`` is ``s_{i+1}``, the fixing of period ``[T_{i+1}, T_{i+2}]``.
    Fixings default to the period start and must be strictly increasing with
    ``s_i <= T_i``.
    """

    dates: tuple
    fixings: tuple | None = None

    def __post_init__(self):
        dates = tuple(float(d) for d in self.dates)
        if len(dates) < 2:
            raise ValueError("a tenor needs at least two dates")
        if dates[0] <= 0 or any(b <= a for a, b in zip(dates, dates[1:])):
            raise ValueError(f"tenor dates must be positive and strictly increasing, got {dates}")
        fix = dates[:-1] if self.fixings is None else tuple(float(s) for s in self.fixings)
        if len(fix) != len(dates) - 1:
            raise ValueError(f"need {len(dates) - 1} fixing dates, got {len(fix)}")
        if fix[0] < 0 or any(b <= a for a, b in zip(fix, fix[1:])):
            raise ValueError(f"fixing dates must be nonnegative and strictly increasing, got {fix}")
        if any(s > T + 1e-14 for s, T in zip(fix, dates)):
            raise ValueError("each fixing date must not exceed its period start")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "fixings", fix)

    @classmethod
    def regular(cls, start: float, periods: int, accrual: float = 0.25) -> "TenorStructure":
        """``periods`` equal accrual periods starting at ``start``."""
        return cls(tuple(start + accrual * np.arange(periods + 1)))

    @property
    def N(self) -> int:
        return len(self.dates) - 1

    @property
    def horizon(self) -> float:
        return self.dates[-1]

    @property
    def accruals(self) -> tuple:
        return tuple(b - a for a, b in zip(self.dates, self.dates[1:]))

    def reversed_date(self, j: int) -> float:
        """``T*_j = T_{N+1-j}`` for ``j = 0..N`` (``T*_0 = T*``)."""
        if not 0 <= j <= self.N:
            raise IndexError(j)
        return self.dates[self.N - j]

    def reversed_fixing(self, j: int) -> float:
        """``s*_j = s_{N+1-j}`` for ``j = 1..N``."""
        if not 1 <= j <= self.N:
            raise IndexError(j)
        return self.fixings[self.N - j]

    def reversed_dates(self) -> tuple:
        """``(T*_0, ..., T*_N)`` with ``T*_j = T_{N+1-j}``."""
        return tuple(reversed(self.dates))

    def reversed_accruals(self) -> tuple:
        """``(delta*_1, ..., delta*_N)`` with ``delta*_j = T*_{j-1} - T*_j``."""
        rd = self.reversed_dates()
        return tuple(rd[j - 1] - rd[j] for j in range(1, self.N + 1))


@dataclass(frozen=True)
class CompositionSpec:
    """Cap or floor with level ``K`` on the composition over ``tenor``."""

    tenor: TenorStructure
    strike: float
    side: str = "cap"

    def __post_init__(self):
        if not self.strike > 0:
            raise ValueError(f"composition level K must be positive, got {self.strike}")
        if self.side not in ("cap", "floor"):
            raise ValueError(f"side must be 'cap' or 'floor', got {self.side!r}")

    @classmethod
    def regular(cls, start: float, periods: int, strike: float, accrual: float = 0.25,
                side: str = "cap") -> "CompositionSpec":
        return cls(TenorStructure.regular(start, periods, accrual), strike, side)

    @property
    def N(self) -> int:
        return self.tenor.N

    @property
    def horizon(self) -> float:
        return self.tenor.horizon

    @property
    def caplet_strike(self) -> float:
        """Rate strike ``(K - 1) / delta`` of the single-period case."""
        if self.N != 1:
            raise ValueError("caplet strike is only defined for a single period")
        return (self.strike - 1.0) / self.tenor.accruals[0]

    def with_strike(self, strike: float, side: str | None = None) -> "CompositionSpec":
        return CompositionSpec(self.tenor, strike, self.side if side is None else side)

    def payoff(self, composition):
        composition = np.asarray(composition, dtype=float)
        if self.side == "cap":
            return np.maximum(composition - self.strike, 0.0)
        return np.maximum(self.strike - composition, 0.0)
