"""Lévy forward-price model on a discrete tenor.

Forward prices ``F(t, T_i, T_{i+1}) = B(t, T_i) / B(t, T_{i+1}) = 1 + delta_i L(t, T_i)``
are built by backward induction from the terminal date. In reversed indexing
``T*_j = T_{N+1-j}`` and with the driver a martingale under the terminal
measure P_{T*} (cumulant ``theta``),

    F(t, T*_j, T*_{j-1}) = F(0, T*_j, T*_{j-1}) exp(int_0^t b(s, T*_j, T*) ds + int_0^t eta(s, T*_j) dL_s)

with terminal drift ``b(s, T*_j, T*) = -(theta(S_{j-1} + eta_j) - theta(S_{j-1}))`` and
``S_{j-1}(s) = sum_{k<j} eta(s, T*_k)``. The forward measure P_{T*_{j-1}} is the
Esscher tilt of P_{T*} by ``S_{j-1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .composition import CompositionSpec, TenorStructure
from .curve import DiscountCurve
from .errors import InfeasibleStripError, StripError
from .levy import LevyModel
from .quadrature import time_integral

_CENTERING_TOL = 1e-10
# relative allowance on the log-MGF; absolute error is meaningless once exp underflows
_MGF_REL_TOL = 1e-13
_SUP_GRID_FRACTION = 1e-3


@dataclass(frozen=True)
class ForwardVolatility:
    """Deterministic ``eta(s, T_i)`` for the calendar maturities ``T_1 < ... < T_N``.

    ``kind`` is one of

    * ``"constant"``: ``eta(s, T_i) = scales[i]``;
    * ``"exponential"``: ``eta(s, T_i) = scales[i] e^{-decay (T_i - s)}``;
    * ``"tabulated"``: ``eta(s, T_i)`` interpolated linearly in ``s`` from
      ``table[:, i]`` on ``grid``.

    In every case ``eta(s, T_i) = 0`` for ``s > T_i``.
    """

    maturities: tuple
    scales: tuple = ()
    kind: str = "constant"
    decay: float = 0.0
    grid: tuple = ()
    table: tuple = ()

    def __post_init__(self):
        mats = tuple(float(t) for t in self.maturities)
        if not mats or any(b <= a for a, b in zip(mats, mats[1:])):
            raise ValueError("maturities must be nonempty and strictly increasing")
        object.__setattr__(self, "maturities", mats)
        if self.kind in ("constant", "exponential"):
            scales = tuple(float(v) for v in self.scales)
            if len(scales) != len(mats):
                raise ValueError(f"need {len(mats)} scales, got {len(scales)}")
            if not all(math.isfinite(v) for v in scales):
                raise ValueError("scales must be finite")
            object.__setattr__(self, "scales", scales)
        elif self.kind == "tabulated":
            grid = np.asarray(self.grid, dtype=float)
            table = np.asarray(self.table, dtype=float)
            if grid.ndim != 1 or table.shape != (grid.size, len(mats)):
                raise ValueError("tabulated eta needs table of shape (len(grid), len(maturities))")
            if np.any(np.diff(grid) <= 0) or not np.all(np.isfinite(table)):
                raise ValueError("grid must be increasing and table finite")
            object.__setattr__(self, "grid", tuple(grid))
            object.__setattr__(self, "table", tuple(map(tuple, table)))
        else:
            raise ValueError(f"unknown forward volatility kind {self.kind!r}")

    @classmethod
    def constant(cls, maturities, scales) -> "ForwardVolatility":
        return cls(tuple(maturities), tuple(scales), "constant")

    @classmethod
    def exponential(cls, maturities, scales, decay: float) -> "ForwardVolatility":
        return cls(tuple(maturities), tuple(scales), "exponential", float(decay))

    @classmethod
    def vasicek_like(cls, tenor: TenorStructure, sigma_hat: float, a: float) -> "ForwardVolatility":
        """``eta(s, T_i) = sigma_hat/a (e^{-a (T_i - s)} - e^{-a (T_{i+1} - s)})``, the bond
        volatility spread of a Vasicek forward-rate structure over each period."""
        scales = [sigma_hat / a * -math.expm1(-a * d) for d in tenor.accruals]
        return cls.exponential(tenor.dates[:-1], scales, a)

    @property
    def N(self) -> int:
        return len(self.maturities)

    def values(self, s) -> np.ndarray:
        """``eta(s, T_i)`` as an array of shape ``(n, N)`` in calendar order."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        mats = np.asarray(self.maturities)
        if self.kind == "constant":
            out = np.broadcast_to(np.asarray(self.scales), (s.size, self.N)).copy()
        elif self.kind == "exponential":
            out = np.asarray(self.scales)[None, :] * np.exp(-self.decay * (mats[None, :] - s[:, None]))
        else:
            table = np.asarray(self.table)
            grid = np.asarray(self.grid)
            out = np.stack([np.interp(s, grid, table[:, i]) for i in range(self.N)], axis=1)
        out[s[:, None] > mats[None, :]] = 0.0
        return out

    def is_zero(self) -> bool:
        if self.kind == "tabulated":
            return not np.any(np.asarray(self.table))
        return not any(self.scales)


@dataclass(frozen=True)
class FpStripBound:
    """``M' = sup_s |partial sums of eta|`` and the admissible interval ``[-M/M', M/M']``."""

    M: float
    M_prime: float

    def __post_init__(self):
        if not 0 < self.M_prime < self.M:
            raise InfeasibleStripError(f"need 0 < M' < M, got M'={self.M_prime:.6g}, M={self.M:.6g}")

    @property
    def upper(self) -> float:
        return self.M / self.M_prime

    @property
    def lower(self) -> float:
        return -self.upper

    @property
    def call_interval(self) -> tuple[float, float]:
        return 1.0, self.upper

    def check(self, z) -> None:
        re = np.real(np.atleast_1d(np.asarray(z)))
        bad = np.abs(re) > self.upper * (1 + 1e-12)
        if np.any(bad):
            raise StripError("composition MGF argument outside its admissible strip",
                             lower=self.lower, upper=self.upper, value=float(re[bad][0]))


@dataclass(frozen=True)
class ForwardPriceModel:
    """Forward-price model: driver under P_{T*}, tenor, eta, initial curve.

    The driver must be centred (zero mean) under the terminal measure.
    """

    driver: LevyModel
    tenor: TenorStructure
    vol: ForwardVolatility
    curve: DiscountCurve

    kind = "forward_price"

    def __post_init__(self):
        if tuple(self.vol.maturities) != tuple(self.tenor.dates[:-1]):
            raise ValueError("eta maturities must be the tenor dates T_1..T_N")
        for piece in self.driver.pieces:
            if abs(piece.mean_rate) > _CENTERING_TOL:
                raise ValueError(f"driver must be centred under the terminal measure, "
                                 f"piece {piece} has mean rate {piece.mean_rate:.3g}")
        # cumulative volatility cap: sup_s |sum_k eta(s, T_k)| < M, on a grid of step 1e-3 T_N
        mats = self.vol.maturities
        grid = np.union1d(np.linspace(0.0, mats[-1], int(math.ceil(1.0 / _SUP_GRID_FRACTION)) + 1), mats)
        if self.vol.kind == "tabulated":
            grid = np.union1d(grid, [g for g in self.vol.grid if 0 < g < mats[-1]])
        cap = float(np.max(np.abs(self.vol.values(grid).sum(axis=1))))
        if not cap < self.driver.M:
            raise InfeasibleStripError(f"sup |sum eta| = {cap:.6g} must stay below M = {self.driver.M:.6g}")

    @property
    def N(self) -> int:
        return self.tenor.N

    def _check_j(self, j: int) -> None:
        if not 1 <= j <= self.N + 1:
            raise IndexError(f"reversed index j must be in 1..{self.N + 1}, got {j}")

    def _reversed_eta(self, s) -> np.ndarray:
        # columns j = 1..N, then a zero column for T*_{N+1} = T_0
        vals = self.vol.values(s)[:, ::-1]
        return np.concatenate([vals, np.zeros((vals.shape[0], 1))], axis=1)

    def eta(self, s, j: int):
        """``eta(s, T*_j)``."""
        self._check_j(j)
        out = self._reversed_eta(s)[:, j - 1]
        return float(out[0]) if np.ndim(s) == 0 else out

    def cumulative_eta(self, s, j: int):
        """``S_j(s) = sum_{k=1}^{j} eta(s, T*_k)``; ``S_0 = 0``."""
        if j == 0:
            return 0.0 if np.ndim(s) == 0 else np.zeros(np.shape(s))
        self._check_j(j)
        out = self._reversed_eta(s)[:, :j].sum(axis=1)
        return float(out[0]) if np.ndim(s) == 0 else out

    def _theta(self, s, z):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        z_arr = np.broadcast_to(np.asarray(z, dtype=complex), s_arr.shape)
        return self.driver.cumulant(s_arr, z_arr)

    def _theta_prime(self, s, z):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        z_arr = np.broadcast_to(np.asarray(z, dtype=complex), s_arr.shape)
        return self.driver.cumulant_derivative(s_arr, z_arr)

    @staticmethod
    def _shape_like(s, out):
        out = np.real(out)
        return float(out[0]) if np.ndim(s) == 0 else out

    def terminal_drift(self, s, j: int):
        """``b(s, T*_j, T*)``, the drift of ``log F(., T*_j, T*_{j-1})`` under P_{T*}."""
        prev = self.cumulative_eta(s, j - 1)
        eta = self.eta(s, j)
        return self._shape_like(s, -(self._theta(s, np.add(prev, eta)) - self._theta(s, prev)))

    def forward_drift(self, s, j: int):
        """``b(s, T*_j, T*_{j-1})``: ``-(eta^2 c / 2 + int (e^{eta x} - 1 - eta x) e^{x S_{j-1}} lambda(dx))``,
        the drift under the forward measure P_{T*_{j-1}}."""
        prev = self.cumulative_eta(s, j - 1)
        eta = self.eta(s, j)
        tilted = (self._theta(s, np.add(prev, eta)) - self._theta(s, prev)
                  - np.asarray(eta) * self._theta_prime(s, prev))
        return self._shape_like(s, -tilted)

    def measure_change_factor(self, s, x, j: int):
        """Lévy-density ratio ``exp(x S_{j-1}(s))`` between P_{T*_{j-1}} and P_{T*}."""
        self._check_j(j)
        prev = self.cumulative_eta(s, j - 1)
        return np.exp(np.multiply(x, prev))

    def brownian_shift(self, s, j: int):
        """Drift ``S_{j-1}(s) sqrt(c_s)`` added to the P_{T*} Brownian motion under P_{T*_{j-1}}."""
        self._check_j(j)
        prev = np.atleast_1d(self.cumulative_eta(s, j - 1))
        c = np.array([getattr(self.driver.piece_at(t), "c", 0.0)
                      for t in np.atleast_1d(np.asarray(s, dtype=float))])
        out = prev * np.sqrt(c)
        return float(out[0]) if np.ndim(s) == 0 else out

    def Z(self, spec: CompositionSpec) -> float:
        """``B(0, T*_N) / B(0, T*) = B(0, T_1) / B(0, T*)``."""
        self._check_spec(spec)
        return self.curve.forward_price(self.tenor.dates[0], self.tenor.dates[-1])

    def _check_spec(self, spec: CompositionSpec) -> None:
        if tuple(spec.tenor.dates) != tuple(self.tenor.dates):
            raise ValueError("composition tenor must match the model tenor")

    def composition_integrand(self, spec: CompositionSpec, s) -> np.ndarray:
        """``E(s) = sum_j eta(s, T*_j) 1{s <= s*_j}`` so that ``H = const + int E dL``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        eta = self.vol.values(s)
        alive = s[:, None] <= np.asarray(spec.tenor.fixings)[None, :]
        return np.where(alive, eta, 0.0).sum(axis=1)

    def composition_drift(self, spec: CompositionSpec, s) -> np.ndarray:
        """``sum_j b(s, T*_j, T*) 1{s <= s*_j}``; telescopes to ``-theta_s(E(s))``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return -np.real(self.driver.cumulant(s, self.composition_integrand(spec, s) + 0j))

    def _breakpoints(self, spec: CompositionSpec) -> list[float]:
        last = spec.tenor.fixings[-1]
        pts = {0.0, *spec.tenor.fixings, *[T for T in self.tenor.dates if T < last]}
        pts |= {b for b in self.driver.breakpoints if b < last}
        if self.vol.kind == "tabulated":
            pts |= {g for g in self.vol.grid if 0 < g < last}
        return sorted(p for p in pts if p <= last)

    def fp_composition_constant(self, spec: CompositionSpec, abs_tol: float = 1e-12) -> float:
        """Deterministic part of H: ``log Z + sum_j int_0^{s*_j} b(s, T*_j, T*) ds``."""
        log_z = math.log(self.Z(spec))
        if self.vol.is_zero():
            return log_z
        value, _ = time_integral(lambda s: self.composition_drift(spec, s),
                                 self._breakpoints(spec), abs_tol=abs_tol)
        return log_z + float(value)

    def composition_log_value_terms(self, spec: CompositionSpec):
        """``(constant, g)`` with ``H = constant + int g dL`` under P_{T*}."""
        return self.fp_composition_constant(spec), lambda s: self.composition_integrand(spec, s)

    def strip_bound(self, spec: CompositionSpec, M_prime: float | None = None) -> FpStripBound:
        """``M'`` is the sup over s and j of ``|sum_{k<=j} eta(s, T*_k) 1{s <= s*_k}|``,
        found on a grid of step ``1e-3 T*`` that contains every breakpoint."""
        self._check_spec(spec)
        if M_prime is None:
            last = spec.tenor.fixings[-1]
            n = int(math.ceil(1.0 / _SUP_GRID_FRACTION))
            grid = np.union1d(np.linspace(0.0, last, n + 1), self._breakpoints(spec))
            eta = self.vol.values(grid)
            alive = grid[:, None] <= np.asarray(spec.tenor.fixings)[None, :]
            rev = np.where(alive, eta, 0.0)[:, ::-1]
            M_prime = float(np.max(np.abs(np.cumsum(rev, axis=1))))
        if M_prime <= 0:
            raise InfeasibleStripError("forward volatility vanishes; no damping strip is needed")
        bound = FpStripBound(self.driver.M, M_prime)
        if bound.upper <= 1.0:
            raise InfeasibleStripError(
                f"M/M' = {bound.upper:.6g} <= 1 leaves no damping value in (1, M/M'] "
                f"(M={self.driver.M:.6g}, M'={M_prime:.6g})"
            )
        return bound

    def is_deterministic(self, spec: CompositionSpec) -> bool:
        return self.vol.is_zero()

    def mgf(self, spec: CompositionSpec, z, bound: FpStripBound | None = None,
            abs_tol: float = 1e-11):
        """Moment generating function of H under P_{T*}:
        ``Z^z exp int (theta_s(z E(s)) - z theta_s(E(s))) ds``."""
        self._check_spec(spec)
        z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
        log_z = math.log(self.Z(spec))
        if self.is_deterministic(spec):
            out = np.exp(z_arr * log_z)
            return out[0] if np.ndim(z) == 0 else out.reshape(np.shape(z))
        if bound is None:
            bound = self.strip_bound(spec)
        bound.check(z_arr)
        driver = self.driver

        def integrand(s):
            e = self.composition_integrand(spec, s)
            th_e = driver.cumulant(s, e + 0j)
            th_ze = driver.cumulant(s, e[:, None] * z_arr[None, :])
            return th_ze - z_arr[None, :] * th_e[:, None]

        value, _ = time_integral(integrand, self._breakpoints(spec), abs_tol=abs_tol, rel_tol=_MGF_REL_TOL)
        out = np.exp(z_arr * log_z + value)
        return out[0] if np.ndim(z) == 0 else out.reshape(np.shape(z))
