"""Smile marking, implied volatilities and calibration of the term-structure models.

The market is a SABR-marked caplet smile. Caplets are quoted in Bachelier
(normal) volatility. Model templates pair a driver family (Gaussian or NIG) with
a Vasicek volatility structure of fixed mean reversion; the NIG driver is kept
centred with unit variance so that the overall level is carried by ``sigma_hat``
alone.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.special import ndtr

from .composition import CompositionSpec, TenorStructure
from .curve import DiscountCurve
from .errors import NoSolutionError
from .forward_price import ForwardPriceModel, ForwardVolatility
from .forward_rate import HjmModel, VasicekVolatility
from .fourier import StrikeGridPricer
from .levy import NIG, Brownian, LevyModel

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _npdf(x):
    return np.exp(-0.5 * np.asarray(x) ** 2) / _SQRT_2PI


@dataclass(frozen=True)
class SabrMark:
    """SABR smile generator.

    ``sigma0`` is the initial volatility (a normal volatility when ``beta = 0``),
    ``nu`` the vol-of-vol, ``beta`` the CEV exponent and ``rho`` the correlation.
    """

    sigma0: float
    nu: float
    beta: float
    rho: float
    forward: float
    expiry: float

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")
        if not self.expiry > 0:
            raise ValueError("expiry must be positive")


def _zeta_over_x(zeta, rho):
    zeta = np.asarray(zeta, dtype=float)
    small = np.abs(zeta) < 1e-6
    safe = np.where(small, 1.0, zeta)
    # log((sqrt(1 - 2 rho z + z^2) + z - rho) / (1 - rho)) without cancellation near z = 0
    q = safe * (safe - 2.0 * rho)
    x = np.log1p((q / (np.sqrt(1.0 + q) + 1.0) + safe) / (1.0 - rho))
    series = 1.0 - 0.5 * rho * zeta + (2.0 - 3.0 * rho * rho) * zeta * zeta / 12.0
    return np.where(small, series, safe / np.where(small, 1.0, x))


def sabr_normal_vol(mark: SabrMark, K):
    """Normal implied volatility from the SABR asymptotic expansion.

    With ``beta = 0`` strikes and forwards may be negative; otherwise both must be positive.
    """
    F, T = mark.forward, mark.expiry
    a, b, r, nu = mark.sigma0, mark.beta, mark.rho, mark.nu
    K = np.asarray(K, dtype=float)
    if b == 0.0:
        zeta = nu / a * (F - K)
        lead = a
        corr = (2.0 - 3.0 * r * r) * nu * nu / 24.0
    else:
        if F <= 0 or np.any(K <= 0):
            raise ValueError("beta > 0 needs positive forward and strikes")
        f_av = np.sqrt(F * K)
        zeta = nu / a * (F - K) / f_av ** b
        near = np.abs(F - K) < 1e-12 * F
        diff = np.where(near, 1.0, F ** (1 - b) - K ** (1 - b))
        lead = np.where(near, a * f_av ** b, a * (1 - b) * (F - K) / diff)
        corr = (-b * (2 - b) * a * a / (24.0 * f_av ** (2 - 2 * b))
                + r * a * nu * b / (4.0 * f_av ** (1 - b))
                + (2.0 - 3.0 * r * r) * nu * nu / 24.0)
    out = lead * _zeta_over_x(zeta, r) * (1.0 + corr * T)
    return float(out) if out.ndim == 0 else out


def bachelier_price(F, K, T, vol, discount=1.0, side: str = "call"):
    """``discount ((F - K) Phi(d) + vol sqrt(T) phi(d))`` with ``d = (F - K) / (vol sqrt T)``; puts by parity."""
    F, K, vol = np.asarray(F, dtype=float), np.asarray(K, dtype=float), np.asarray(vol, dtype=float)
    sd = vol * math.sqrt(T)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(sd > 0, (F - K) / np.where(sd > 0, sd, 1.0), np.sign(F - K) * np.inf)
    call = np.where(sd > 0, (F - K) * ndtr(d) + sd * _npdf(d), np.maximum(F - K, 0.0))
    out = call if side == "call" else call - (F - K)
    out = discount * out
    return float(out) if np.ndim(out) == 0 else out


def black_price(F, K, T, vol, discount=1.0, side: str = "call"):
    """Lognormal (Black) price of an option on a positive forward."""
    sd = vol * math.sqrt(T)
    if sd <= 0:
        call = max(F - K, 0.0)
    else:
        d1 = (math.log(F / K) + 0.5 * sd * sd) / sd
        call = F * ndtr(d1) - K * ndtr(d1 - sd)
    out = call if side == "call" else call - (F - K)
    return discount * out


def _solve_vol(price_fn, vega_fn, target: float, lower_bound: float, scale: float, tol: float) -> float:
    """Safeguarded Newton on ``price_fn(vol) = target`` with a bisection bracket."""
    if not math.isfinite(target) or target <= lower_bound:
        raise NoSolutionError(f"price {target:.6g} is not above its zero-volatility value {lower_bound:.6g}")
    lo, hi = 0.0, scale
    while price_fn(hi) < target:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6 * scale:
            raise NoSolutionError(f"price {target:.6g} needs an implausibly large volatility")
    vol = 0.5 * (lo + hi)
    # deep out of the money the time value itself may be far below tol
    tol = min(tol, 1e-12 * (target - lower_bound))
    for _ in range(200):
        f = price_fn(vol) - target
        if abs(f) < tol:
            return vol
        if f > 0:
            hi = vol
        else:
            lo = vol
        vega = vega_fn(vol)
        step = vol - f / vega if vega > 0 else -1.0
        vol = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-15 * hi:
            return vol
    return vol


def implied_normal_vol(price: float, F: float, K: float, T: float, discount: float = 1.0,
                       side: str = "call", tol: float = 1e-13) -> float:
    """Bachelier volatility reproducing ``price``.

    Raises
    ------
    NoSolutionError
        If the price is not strictly above the discounted intrinsic value.
    """
    intrinsic = discount * max((F - K) if side == "call" else (K - F), 0.0)
    root_t = math.sqrt(T)

    def pf(v):
        return bachelier_price(F, K, T, v, discount, side)

    def vega(v):
        return discount * root_t * float(_npdf((F - K) / (v * root_t)))

    scale = max(abs(F), abs(K), 1e-4) * 0.01 + (price / (discount * root_t) if discount > 0 else 0.0)
    return _solve_vol(pf, vega, price, intrinsic, max(scale, 1e-8), tol * max(discount, 1e-300))


def implied_black_vol(price: float, F: float, K: float, T: float, discount: float = 1.0,
                      side: str = "call", tol: float = 1e-14) -> float:
    """Black volatility reproducing ``price``, equal to the normal volatility of ``log F_T``."""
    intrinsic = discount * max((F - K) if side == "call" else (K - F), 0.0)
    root_t = math.sqrt(T)

    def pf(v):
        return black_price(F, K, T, v, discount, side)

    def vega(v):
        d1 = (math.log(F / K) + 0.5 * v * v * T) / (v * root_t)
        return discount * F * root_t * float(_npdf(d1))

    return _solve_vol(pf, vega, price, intrinsic, 0.2, tol * max(discount * F, 1e-300))


@dataclass(frozen=True)
class SmilePoint:
    strike: float
    vol: float
    price: float

    def __post_init__(self):
        if not self.vol > 0:
            raise ValueError("implied vol must be positive")


@dataclass(frozen=True)
class CapletMarket:
    """Caplet on ``[start, end]`` fixed at ``fixing`` with a flat continuously compounded curve."""

    rate: float = 0.04
    fixing: float = 5.0
    start: float = 5.0
    end: float = 5.25

    @property
    def curve(self) -> DiscountCurve:
        return DiscountCurve.flat(self.rate)

    @property
    def accrual(self) -> float:
        return self.end - self.start

    @property
    def forward(self) -> float:
        c = self.curve
        return (c(self.start) / c(self.end) - 1.0) / self.accrual

    @property
    def discount(self) -> float:
        return self.curve(self.end)

    @property
    def spec_tenor(self) -> TenorStructure:
        return TenorStructure((self.start, self.end), (self.fixing,))

    def strike_grid(self, offsets=(-0.02, -0.015, -0.01, -0.005, 0.0, 0.005, 0.01, 0.015, 0.02)) -> np.ndarray:
        return self.forward + np.asarray(offsets, dtype=float)

    def sabr_mark(self, sigma0=0.01, nu=0.40, beta=0.0, rho=0.30) -> SabrMark:
        return SabrMark(sigma0, nu, beta, rho, self.forward, self.fixing)

    def targets(self, mark: SabrMark, strikes=None) -> list[SmilePoint]:
        strikes = self.strike_grid() if strikes is None else np.asarray(strikes, dtype=float)
        vols = np.atleast_1d(sabr_normal_vol(mark, strikes))
        return [SmilePoint(float(k), float(v),
                           bachelier_price(self.forward, k, self.fixing, v, self.discount))
                for k, v in zip(strikes, vols)]


@dataclass(frozen=True)
class ModelTemplate:
    """Parametrised model family used by the calibration.

    ``model_kind`` is ``"hjm"`` or ``"forward_price"``; ``family`` is ``"nig"`` or
    ``"gaussian"``. NIG parameters are ``x = (log alpha, atanh(beta/alpha), log sigma_hat)``
    with a centred unit-variance NIG; the Gaussian template has ``x = (log sigma_hat,)``
    with a standard Brownian driver.
    """

    model_kind: str = "hjm"
    family: str = "nig"
    a: float = 0.05
    curve: DiscountCurve = field(default_factory=lambda: DiscountCurve.flat(0.04))

    def __post_init__(self):
        if self.model_kind not in ("hjm", "forward_price"):
            raise ValueError(f"unknown model kind {self.model_kind!r}")
        if self.family not in ("nig", "gaussian"):
            raise ValueError(f"unknown family {self.family!r}")

    @property
    def size(self) -> int:
        return 3 if self.family == "nig" else 1

    def x0(self) -> np.ndarray:
        return np.array([math.log(5.0), 0.0, math.log(0.01)]) if self.family == "nig" \
            else np.array([math.log(0.01)])

    def bounds(self):
        if self.family == "nig":
            return np.array([math.log(0.2), -3.0, math.log(1e-4)]), np.array([math.log(500.0), 3.0, math.log(0.2)])
        return np.array([math.log(1e-4)]), np.array([math.log(0.2)])

    def params(self, x) -> dict:
        if self.family == "nig":
            alpha = math.exp(x[0])
            beta = alpha * math.tanh(x[1])
            piece = NIG.unit_variance(alpha, beta)
            return {"alpha": piece.alpha, "beta": piece.beta, "delta": piece.delta, "mu": piece.mu,
                    "sigma_hat": math.exp(x[-1]), "a": self.a}
        return {"b": 0.0, "c": 1.0, "sigma_hat": math.exp(x[0]), "a": self.a}

    def x_from_params(self, params: dict) -> np.ndarray:
        if self.family == "nig":
            return np.array([math.log(params["alpha"]), math.atanh(params["beta"] / params["alpha"]),
                             math.log(params["sigma_hat"])])
        return np.array([math.log(params["sigma_hat"])])

    def driver(self, x) -> LevyModel:
        p = self.params(x)
        if self.family == "nig":
            return LevyModel.homogeneous(NIG(p["alpha"], p["beta"], p["delta"], p["mu"]))
        return LevyModel.homogeneous(Brownian(0.0, 1.0))

    def model(self, x, tenor: TenorStructure):
        """Model instance for the given tenor (the forward-price model is tenor specific)."""
        sigma_hat = self.params(x)["sigma_hat"]
        if self.model_kind == "hjm":
            return HjmModel(self.driver(x), VasicekVolatility(sigma_hat, self.a), self.curve)
        return ForwardPriceModel(self.driver(x), tenor, ForwardVolatility.vasicek_like(tenor, sigma_hat, self.a),
                                 self.curve)


def model_caplet_vols(template: ModelTemplate, x, market: CapletMarket, strikes) -> tuple[np.ndarray, np.ndarray]:
    """Model caplet prices (per unit notional, on the rate) and their normal vols."""
    strikes = np.asarray(strikes, dtype=float)
    tenor = market.spec_tenor
    model = template.model(x, tenor)
    levels = 1.0 + market.accrual * strikes
    spec = CompositionSpec(tenor, float(levels[0]))
    prices = StrikeGridPricer(model, spec, tuple(levels), abs_tol=1e-12).prices() / market.accrual
    vols = np.array([implied_normal_vol(p, market.forward, k, market.fixing, market.discount)
                     for p, k in zip(prices, strikes)])
    return prices, vols


@dataclass
class CalibrationResult:
    template: ModelTemplate
    x: np.ndarray
    params: dict
    rmse: float
    residuals: np.ndarray
    strikes: np.ndarray
    model_vols: np.ndarray
    target_vols: np.ndarray
    iterations: int
    success: bool
    message: str

    def model(self, tenor: TenorStructure):
        return self.template.model(self.x, tenor)

    def to_dict(self) -> dict:
        return {
            "model_kind": self.template.model_kind,
            "family": self.template.family,
            "params": self.params,
            "rmse": self.rmse,
            "rmse_bp": self.rmse * 1e4,
            "iterations": self.iterations,
            "success": self.success,
            "message": self.message,
            "points": [
                {"strike": float(k), "target_vol": float(t), "model_vol": float(m), "residual": float(r)}
                for k, t, m, r in zip(self.strikes, self.target_vols, self.model_vols, self.residuals)
            ],
        }


def calibrate(targets: list[SmilePoint], template: ModelTemplate, market: CapletMarket | None = None,
              weights=None, x0=None, max_nfev: int = 200) -> CalibrationResult:
    """Least-squares fit of model normal vols to target normal vols.

    Parameters
    ----------
    targets : list of SmilePoint
        At least as many points as free parameters (four or more are expected).
    weights : array_like, optional
        Per-strike weights on the vol residuals; uniform by default.
    """
    market = market or CapletMarket()
    if len(targets) < template.size:
        raise ValueError(f"need at least {template.size} targets, got {len(targets)}")
    strikes = np.array([t.strike for t in targets])
    target_vols = np.array([t.vol for t in targets])
    w = np.ones_like(strikes) if weights is None else np.asarray(weights, dtype=float)
    lo, hi = template.bounds()

    def residuals(x):
        try:
            _, vols = model_caplet_vols(template, x, market, strikes)
        except (NoSolutionError, ValueError, ArithmeticError):
            return np.full(strikes.size, 1.0)
        return w * (vols - target_vols)

    start = template.x0() if x0 is None else np.asarray(x0, dtype=float)
    fit = least_squares(residuals, np.clip(start, lo + 1e-9, hi - 1e-9), bounds=(lo, hi), method="trf",
                        x_scale=1.0, diff_step=1e-6, xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=max_nfev)
    if not fit.success:
        warnings.warn(f"calibration stopped early: {fit.message}", RuntimeWarning, stacklevel=2)
    _, vols = model_caplet_vols(template, fit.x, market, strikes)
    res = vols - target_vols
    return CalibrationResult(template, fit.x, template.params(fit.x), float(np.sqrt(np.mean(res ** 2))), res,
                             strikes, vols, target_vols, int(fit.nfev), bool(fit.success), str(fit.message))


def atm_weights(strikes, forward: float) -> np.ndarray:
    """Weight 1 on the strike closest to the forward, 0 elsewhere."""
    strikes = np.asarray(strikes, dtype=float)
    w = np.zeros_like(strikes)
    w[int(np.argmin(np.abs(strikes - forward)))] = 1.0
    return w


@dataclass(frozen=True)
class CapletSmileRow:
    strike: float
    market_vol: float
    gaussian_vol: float
    nig_vol: float


def calibrate_sabr_smile(market: CapletMarket | None = None, model_kind: str = "hjm"):
    """Fit the Gaussian template at the money and the NIG template to the whole SABR smile."""
    market = market or CapletMarket()
    targets = market.targets(market.sabr_mark())
    strikes = np.array([t.strike for t in targets])
    gauss = calibrate(targets, ModelTemplate(model_kind, "gaussian", curve=market.curve), market,
                      weights=atm_weights(strikes, market.forward))
    nig = calibrate(targets, ModelTemplate(model_kind, "nig", curve=market.curve), market)
    return targets, gauss, nig


def caplet_smile_rows(targets, gauss: CalibrationResult, nig: CalibrationResult) -> list[CapletSmileRow]:
    return [CapletSmileRow(t.strike, t.vol, float(g), float(n))
            for t, g, n in zip(targets, gauss.model_vols, nig.model_vols)]


def composition_tenor(start: float = 0.25, periods: int = 20, accrual: float = 0.25) -> TenorStructure:
    """Quarterly composition ``T_i = start + (i - 1) accrual`` with fixings at period starts.

    The default runs from 0.25 to 5.25, so the last rate fixes in five years and the
    forward composition is ``B(0, 0.25) / B(0, 5.25) = e^{0.2}`` on a flat 4% curve.
    """
    return TenorStructure.regular(start, periods, accrual)


@dataclass(frozen=True)
class CompositionSmileRow:
    strike: float
    gaussian_vol: float
    nig_vol: float
    gaussian_price: float
    nig_price: float
    gaussian_normal_vol: float
    nig_normal_vol: float


def smile_report(gauss_model, nig_model, tenor: TenorStructure | None = None,
                 moneyness=(-0.12, -0.09, -0.06, -0.03, 0.0, 0.03, 0.06, 0.09, 0.12)):
    """Composition cap smile for two models.

    Returns the forward composition value (``M_H(1)``, the at-the-money level) and
    one row per strike ``K = ATM (1 + m)``. ``*_vol`` columns are the implied
    normal volatility of the log-composition (equivalently the Black volatility
    of the composition); ``*_normal_vol`` columns are Bachelier volatilities of
    the composition itself.
    """
    tenor = tenor or composition_tenor()
    expiry = tenor.fixings[-1]
    spec = CompositionSpec(tenor, 1.0)
    atm = float(np.real(nig_model.mgf(spec, 1.0)))
    strikes = atm * (1.0 + np.asarray(moneyness, dtype=float))
    B = float(nig_model.curve(tenor.horizon))
    out = []
    prices = {}
    for name, model in (("gaussian", gauss_model), ("nig", nig_model)):
        prices[name] = StrikeGridPricer(model, spec.with_strike(float(strikes[0])), tuple(strikes),
                                        abs_tol=1e-12).prices()
    for i, K in enumerate(strikes):
        row = {}
        for name in ("gaussian", "nig"):
            p = float(prices[name][i])
            row[name] = (p, implied_black_vol(p, atm, K, expiry, B), implied_normal_vol(p, atm, K, expiry, B))
        out.append(CompositionSmileRow(float(K), row["gaussian"][1], row["nig"][1], row["gaussian"][0], row["nig"][0],
                              row["gaussian"][2], row["nig"][2]))
    return atm, out


def write_rows_csv(rows, path, schema_version: int = 1, header_comment: str | None = None) -> None:
    """Dataclass rows to CSV, preceded by a schema-version comment line."""
    from dataclasses import fields as dc_fields

    names = [f.name for f in dc_fields(rows[0])]
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version={schema_version}\n")
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(names)
        for r in rows:
            w.writerow([f"{getattr(r, n):.12g}" for n in names])
