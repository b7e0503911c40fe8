"""Lévy forward-rate (HJM) model with deterministic volatility.

Forward rates follow ``df(t, T) = alpha(t, T) dt - sigma(t, T) dL_t``. With
``Sigma(s, T) = int_s^T sigma(s, u) du`` and the no-arbitrage drift
``A(s, T) = theta_s(Sigma(s, T))``, bond prices discounted by the money market
account are ``B(0, T) exp(int Sigma(s, T) dL_s - int A(s, T) ds)``.

The log of the composition ``prod (1 + delta_i L(s_i, T_i))`` is

    H = log Z + sum_i int_0^{s_i} A(s, T_i, T_{i+1}) ds - sum_i int_0^{s_i} Sigma(s, T_i, T_{i+1}) dL_s

with ``Z = B(0, T_1) / B(0, T*)``. The T*-forward measure is the Esscher tilt of
the driver by ``Sigma(s, T*)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .composition import CompositionSpec
from .curve import DiscountCurve
from .errors import InfeasibleStripError, StripError
from .levy import LevyModel
from .quadrature import time_integral

# relative allowance on the log-MGF; absolute error is meaningless once exp underflows
_MGF_REL_TOL = 1e-13
_SUP_GRID_STEP = 1e-4


@dataclass(frozen=True)
class VasicekVolatility:
    """``sigma(s, T) = sigma_hat e^{-a (T - s)}``, ``Sigma(s, T) = sigma_hat/a (1 - e^{-a (T - s)})``."""

    sigma_hat: float
    a: float

    kind = "vasicek"

    def __post_init__(self):
        if self.sigma_hat < 0 or self.a <= 0:
            raise ValueError(f"Vasicek needs sigma_hat >= 0 and a > 0, got {self.sigma_hat}, {self.a}")

    def Sigma(self, s, T):
        tau = np.maximum(np.asarray(T, dtype=float) - np.asarray(s, dtype=float), 0.0)
        return self.sigma_hat / self.a * -np.expm1(-self.a * tau)

    def sigma(self, s, T):
        s, T = np.asarray(s, dtype=float), np.asarray(T, dtype=float)
        return np.where(s <= T, self.sigma_hat * np.exp(-self.a * (T - s)), 0.0)

    def sup_on(self, s0: float, s1: float, T: float) -> float:
        """``sup_{s in [s0, s1]} Sigma(s, T)``; Sigma decreases in s."""
        return float(self.Sigma(s0, T))


@dataclass(frozen=True)
class HoLeeVolatility:
    """Constant ``sigma(s, T) = sigma_hat``, ``Sigma(s, T) = sigma_hat (T - s)``."""

    sigma_hat: float

    kind = "ho_lee"

    def __post_init__(self):
        if self.sigma_hat < 0:
            raise ValueError(f"Ho-Lee needs sigma_hat >= 0, got {self.sigma_hat}")

    def Sigma(self, s, T):
        tau = np.maximum(np.asarray(T, dtype=float) - np.asarray(s, dtype=float), 0.0)
        return self.sigma_hat * tau

    def sigma(self, s, T):
        s, T = np.asarray(s, dtype=float), np.asarray(T, dtype=float)
        return np.where(s <= T, self.sigma_hat, 0.0)

    def sup_on(self, s0: float, s1: float, T: float) -> float:
        return float(self.Sigma(s0, T))


@dataclass(frozen=True)
class TabulatedVolatility:
    """Stationary structure ``Sigma(s, T) = g(T - s)`` with ``g`` interpolated
    linearly from a table; ``g(0)`` must be 0 and ``g`` positive elsewhere."""

    taus: tuple
    values: tuple

    kind = "tabulated"

    def __post_init__(self):
        t = np.asarray(self.taus, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise ValueError("taus and values must be 1-d of equal length >= 2")
        if t[0] != 0.0 or v[0] != 0.0 or np.any(np.diff(t) <= 0) or np.any(v[1:] <= 0):
            raise ValueError("table must start at (0, 0), with increasing taus and positive values")
        object.__setattr__(self, "taus", tuple(t))
        object.__setattr__(self, "values", tuple(v))

    def Sigma(self, s, T):
        tau = np.maximum(np.asarray(T, dtype=float) - np.asarray(s, dtype=float), 0.0)
        return np.interp(tau, self.taus, self.values)

    def sigma(self, s, T):
        s, T = np.asarray(s, dtype=float), np.asarray(T, dtype=float)
        tau = T - s
        slopes = np.diff(self.values) / np.diff(self.taus)
        k = np.clip(np.searchsorted(self.taus, tau, side="right") - 1, 0, slopes.size - 1)
        return np.where(tau >= 0, slopes[k], 0.0)

    def sup_on(self, s0: float, s1: float, T: float) -> float:
        n = max(2, int(math.ceil((s1 - s0) / _SUP_GRID_STEP)) + 1)
        return float(np.max(self.Sigma(np.linspace(s0, s1, n), T)))


HjmVolatility = VasicekVolatility | HoLeeVolatility | TabulatedVolatility


@dataclass(frozen=True)
class HjmStripBounds:
    """Bounds ``M' >= Sigma``, ``M''`` on the fixing-restricted Sigma, and the
    admissible damping interval ``[lower, upper]`` for the composition MGF."""

    M: float
    M_prime: float
    M_second: float
    N: int
    lower: float
    upper: float

    @classmethod
    def from_bounds(cls, M: float, M_prime: float, M_second: float, N: int) -> "HjmStripBounds":
        if not 0 < M_second <= M_prime < M:
            raise InfeasibleStripError(
                f"need 0 < M'' <= M' < M, got M''={M_second:.6g}, M'={M_prime:.6g}, M={M:.6g}"
            )
        if not M / M_second > N + 1:
            raise InfeasibleStripError(
                f"M/M'' = {M / M_second:.6g} must exceed N+1 = {N + 1} "
                f"(M={M:.6g}, M''={M_second:.6g}); use a driver with larger M or a shorter composition"
            )
        w = (M - M_second * (N + 1)) / (M_prime + M_second * (N + 1))
        return cls(M, M_prime, M_second, N, 1.0 - w, 1.0 + w)

    def contains(self, re_z) -> bool:
        re = np.real(np.asarray(re_z))
        return bool(np.all((re >= self.lower - 1e-12) & (re <= self.upper + 1e-12)))

    def check(self, z) -> None:
        re = np.real(np.atleast_1d(np.asarray(z)))
        bad = (re < self.lower - 1e-12) | (re > self.upper + 1e-12)
        if np.any(bad):
            raise StripError("composition MGF argument outside its admissible strip",
                             lower=self.lower, upper=self.upper, value=float(re[bad][0]))

    @property
    def call_interval(self) -> tuple[float, float]:
        """Damping values admissible for the call transform: ``(1, upper]``."""
        return 1.0, self.upper


@dataclass(frozen=True)
class HjmModel:
    """Forward-rate model: driver under P, volatility structure, initial curve."""

    driver: LevyModel
    vol: HjmVolatility
    curve: DiscountCurve
    horizon: float | None = None

    kind = "hjm"

    def Sigma(self, s, T):
        return self.vol.Sigma(s, T)

    def drift_A(self, s, T):
        """``A(s, T) = theta_s(Sigma(s, T))``."""
        s = np.asarray(s, dtype=float)
        sig = self.Sigma(s, T)
        out = np.real(self.driver.cumulant(np.broadcast_to(s, np.shape(sig)), sig))
        return float(out) if np.ndim(out) == 0 else out

    def _check_spec(self, spec: CompositionSpec) -> None:
        if self.horizon is not None and spec.horizon > self.horizon + 1e-12:
            raise ValueError(f"composition ends at {spec.horizon} beyond model horizon {self.horizon}")

    def Z(self, spec: CompositionSpec) -> float:
        """``Z = B(0, T_1) / B(0, T*)``."""
        return self.curve.forward_price(spec.tenor.dates[0], spec.horizon)

    def _active_period(self, spec: CompositionSpec, s: np.ndarray) -> np.ndarray:
        # period k (0-based) is the first one whose fixing is >= s
        return np.searchsorted(np.asarray(spec.tenor.fixings), s, side="left")

    def composition_integrand(self, spec: CompositionSpec, s) -> np.ndarray:
        """``g(s) = -sum_i Sigma(s, T_i, T_{i+1}) 1{s <= s_i}``, so that ``H = const + int g dL``.

        For ordered fixings the sum telescopes to ``Sigma(s, T_k) - Sigma(s, T*)``
        with ``k`` the first period whose fixing is not before ``s``.
        """
        s = np.asarray(s, dtype=float)
        dates = np.asarray(spec.tenor.dates)
        k = self._active_period(spec, s)
        live = k < spec.N
        Tk = dates[np.minimum(k, spec.N - 1)]
        g = self.Sigma(s, Tk) - self.Sigma(s, spec.horizon)
        return np.where(live, g, 0.0)

    def composition_log_value_terms(self, spec: CompositionSpec, abs_tol: float = 1e-12):
        """Deterministic part of H and its stochastic integrand.

        Returns
        -------
        constant : float
            ``log Z + int sum_i A(s, T_i, T_{i+1}) 1{s <= s_i} ds``.
        g : callable
            ``s -> g(s)`` with ``H = constant + int_0^{T*} g(s) dL_s``.
        """
        self._check_spec(spec)
        log_z = math.log(self.Z(spec))
        if np.all(self.Sigma(0.0, np.asarray(spec.tenor.dates)) == 0.0):
            return log_z, lambda s: np.zeros_like(np.asarray(s, dtype=float))
        dates = np.asarray(spec.tenor.dates)

        def drift(s):
            k = self._active_period(spec, s)
            Tk = dates[np.minimum(k, spec.N - 1)]
            a = self.drift_A(s, spec.horizon) - self.drift_A(s, Tk)
            return np.where(k < spec.N, a, 0.0)

        value, _ = time_integral(drift, self._breakpoints(spec), abs_tol=abs_tol)
        return log_z + float(value), lambda s: self.composition_integrand(spec, s)

    def _breakpoints(self, spec: CompositionSpec) -> list[float]:
        last = spec.tenor.fixings[-1]
        pts = [0.0, *spec.tenor.fixings, *[T for T in spec.tenor.dates if T < last]]
        return sorted({p for p in pts if p <= last} | {b for b in self.driver.breakpoints if b < last})

    def strip_bounds(self, spec: CompositionSpec, M_prime: float | None = None,
                     M_second: float | None = None) -> HjmStripBounds:
        """Tightest ``M' = sup Sigma`` and ``M'' = max_i sup_{[s_i, s_{i+1}]} Sigma(s, T_{i+1})``
        (with ``s_0 = 0``, ``s_{N+1} = T*``), unless overridden."""
        self._check_spec(spec)
        tenor = spec.tenor
        if M_prime is None:
            M_prime = self.vol.sup_on(0.0, 0.0, spec.horizon)
        if M_second is None:
            fix = (0.0, *tenor.fixings, spec.horizon)
            M_second = max(self.vol.sup_on(fix[i], fix[i + 1], tenor.dates[i])
                           for i in range(spec.N + 1))
        return HjmStripBounds.from_bounds(self.driver.M, M_prime, M_second, spec.N)

    def is_deterministic(self, spec: CompositionSpec) -> bool:
        return bool(np.all(self.Sigma(0.0, np.asarray(spec.tenor.dates)) == 0.0))

    def mgf(self, spec: CompositionSpec, z, bounds: HjmStripBounds | None = None,
            abs_tol: float = 1e-11):
        """Moment generating function of H under the T*-forward measure.

        The integrand ``z sum A(...) - theta(Sigma(s, T*)) + theta(Sigma(s, T*) - z sum Sigma(...))``
        is evaluated in its telescoped form and vanishes after the last fixing.

        Parameters
        ----------
        z : complex or array of complex
            Arguments; their real parts must lie in the admissible strip.
        bounds : HjmStripBounds, optional
            Defaults to ``strip_bounds(spec)``.
        """
        self._check_spec(spec)
        z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
        log_z = math.log(self.Z(spec))
        if self.is_deterministic(spec):
            out = np.exp(z_arr * log_z)
            return out[0] if np.ndim(z) == 0 else out.reshape(np.shape(z))
        if bounds is None:
            bounds = self.strip_bounds(spec)
        bounds.check(z_arr)
        dates = np.asarray(spec.tenor.dates)
        T_star = spec.horizon
        driver = self.driver

        def integrand(s):
            k = self._active_period(spec, s)
            live = (k < spec.N)[:, None]
            Tk = dates[np.minimum(k, spec.N - 1)]
            sig_star = self.Sigma(s, T_star)[:, None]
            sig_k = self.Sigma(s, Tk)[:, None]
            zz = z_arr[None, :]
            th_star = driver.cumulant(s, sig_star + 0j)
            th_k = driver.cumulant(s, sig_k + 0j)
            arg = (1.0 - zz) * sig_star + zz * sig_k
            th_mix = driver.cumulant(s, arg)
            val = zz * (th_star - th_k) - th_star + th_mix
            return np.where(live, val, 0.0)

        value, _ = time_integral(integrand, self._breakpoints(spec), abs_tol=abs_tol, rel_tol=_MGF_REL_TOL)
        out = np.exp(z_arr * log_z + value)
        return out[0] if np.ndim(z) == 0 else out.reshape(np.shape(z))

    def discounted_bond_log(self, T: float):
        """Deterministic part and integrand of ``log(B(t, T) / B^M_t)``:
        ``log B(0, T) - int_0^t A(s, T) ds + int_0^t Sigma(s, T) dL_s``."""
        return math.log(self.curve(T)), (lambda s: self.drift_A(s, T)), (lambda s: self.Sigma(s, T))
