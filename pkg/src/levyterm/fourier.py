"""Fourier valuation of caps and floors on compositions.

With ``H`` the log of the composition and ``M_H`` its moment generating
function under the T*-forward measure,

    C(K) = B(0, T*) / pi * int_0^inf Re[M_H(R - iu) K^{1 + iu - R} / ((iu - R)(1 + iu - R))] du

for a damping value ``R > 1`` inside the strip where ``M_H`` is finite. The same
formula with ``R < 0`` gives the floor.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtr

from .composition import CompositionSpec, TenorStructure
from .errors import QuadratureError, StripError
from .forward_price import ForwardPriceModel
from .forward_rate import HjmModel, VasicekVolatility
from .levy import Brownian
from .quadrature import adaptive_gauss_kronrod, gauss_legendre_panels, time_integral

Model = HjmModel | ForwardPriceModel

# keep the default damping away from the strip edge
_ENDPOINT_MARGIN = 1e-3


def call_transform(z, K: float):
    """Fourier transform ``K^{1+iz} / (iz (1+iz))`` of ``x -> (e^x - K)^+``, for ``Im z > 1``."""
    z = np.asarray(z, dtype=complex)
    if K <= 0:
        raise ValueError(f"K must be positive, got {K}")
    if np.any(z.imag <= 1.0):
        bad = float(np.min(z.imag))
        raise StripError("call transform needs Im z > 1", lower=1.0, upper=math.inf, value=bad)
    iz = 1j * z
    out = np.exp((1.0 + iz) * math.log(K)) / (iz * (1.0 + iz))
    return out[()] if out.ndim == 0 else out


def put_transform(z, K: float):
    """Fourier transform of ``x -> (K - e^x)^+``; same expression, valid for ``Im z < 0``."""
    z = np.asarray(z, dtype=complex)
    if K <= 0:
        raise ValueError(f"K must be positive, got {K}")
    if np.any(z.imag >= 0.0):
        bad = float(np.max(z.imag))
        raise StripError("put transform needs Im z < 0", lower=-math.inf, upper=0.0, value=bad)
    iz = 1j * z
    out = np.exp((1.0 + iz) * math.log(K)) / (iz * (1.0 + iz))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class QuadratureSettings:
    """Tolerance on the price, node budget and truncation search for the u-integral."""

    abs_tol: float = 1e-9
    max_nodes: int = 100_000
    initial_truncation: float = 200.0
    max_doublings: int = 24
    mgf_tol: float = 1e-11


@dataclass(frozen=True)
class PricingRequest:
    """Model, contract and numerics for one price.

    ``R`` defaults to the geometric midpoint of the admissible call interval
    ``(1, upper]`` for caps, and to its negative mirror for the direct floor route.
    """

    model: Model
    spec: CompositionSpec
    R: float | None = None
    quadrature: QuadratureSettings = field(default_factory=QuadratureSettings)
    bounds: object | None = None


@dataclass(frozen=True)
class PriceResult:
    price: float
    side: str
    strike: float
    R: float | None
    strip: tuple[float, float] | None
    truncation: float
    nodes: int
    error_estimate: float
    tail_bound: float
    method: str
    discount: float
    Z: float

    def to_dict(self) -> dict:
        return asdict(self)


def strip_for(model: Model, spec: CompositionSpec):
    if isinstance(model, HjmModel):
        return model.strip_bounds(spec)
    return model.strip_bound(spec)


def default_call_R(bounds) -> float:
    upper = bounds.upper * (1.0 - _ENDPOINT_MARGIN)
    if upper <= 1.0:
        raise StripError("no damping value above 1 in the admissible strip",
                         lower=bounds.lower, upper=bounds.upper, value=1.0)
    return math.sqrt(upper)


def default_put_R(bounds) -> float:
    lower = bounds.lower * (1.0 - _ENDPOINT_MARGIN)
    if lower >= 0.0:
        raise StripError("no negative damping value in the admissible strip",
                         lower=bounds.lower, upper=bounds.upper, value=0.0)
    depth = -lower
    return -min(math.sqrt(depth), 0.5 * depth)


def _validate_R(R: float, bounds, side: str) -> None:
    if side == "cap" and not (R > 1.0 and R <= bounds.upper * (1 + 1e-12)):
        raise StripError("cap damping must lie in (1, upper]", lower=1.0, upper=bounds.upper, value=R)
    if side == "floor" and not (R < 0.0 and R >= bounds.lower * (1 + 1e-12)):
        raise StripError("floor damping must lie in [lower, 0)", lower=bounds.lower, upper=0.0, value=R)


def _discount(model: Model, spec: CompositionSpec) -> float:
    return float(model.curve(spec.horizon))


def _deterministic_result(model, spec, side, method="deterministic") -> PriceResult:
    B = _discount(model, spec)
    Z = model.Z(spec)
    K = spec.strike
    value = B * (max(Z - K, 0.0) if side == "cap" else max(K - Z, 0.0))
    return PriceResult(value, side, K, None, None, 0.0, 0, 0.0, 0.0, method, B, Z)


def _integrand_factory(model: Model, spec: CompositionSpec, bounds, R: float, K: float, mgf_tol: float):
    log_k = math.log(K)

    def integrand(u):
        u = np.asarray(u, dtype=float)
        w = R - 1j * u
        mh = model.mgf(spec, w, bounds, abs_tol=mgf_tol)
        kernel = np.exp((1.0 - w) * log_k) / ((-w) * (1.0 - w))
        return np.real(mh * kernel)

    return integrand


def _truncation(model, spec, bounds, R, log_k_extreme, scale, tol, settings) -> tuple[float, float]:
    """Smallest ``U = U0 2^k`` whose tail bound is below ``tol / 10``.

    ``|integrand(u)| <= |M_H(R - iu)| K^{1-R} / u^2``, so the tail beyond ``U`` is at
    most ``sup_{u >= U} |M_H(R - iu)| K^{1-R} / U``; the sup is sampled on
    ``U * [1, 64]``.
    """
    U = settings.initial_truncation
    probes = np.geomspace(1.0, 64.0, 25)
    k_factor = math.exp((1.0 - R) * log_k_extreme)
    for _ in range(settings.max_doublings):
        mh = np.abs(model.mgf(spec, R - 1j * U * probes, bounds, abs_tol=settings.mgf_tol))
        tail = scale * k_factor * float(np.max(mh)) / U
        if tail < tol / 10.0:
            return U, tail
        U *= 2.0
    raise QuadratureError(f"tail bound {tail:.3g} still above {tol / 10:.3g} at truncation U={U:g}")


def price_cap(request: PricingRequest) -> PriceResult:
    """Cap price by Fourier inversion with adaptive Gauss-Kronrod on ``[0, U]``."""
    return _price_transform(request, "cap")


def price_floor(request: PricingRequest, route: str = "parity") -> PriceResult:
    """Floor price, by cap-floor parity (default) or by the direct put transform.

    Parity: ``floor = cap - B(0, T_1) + K B(0, T*)``.
    """
    if route == "transform":
        return _price_transform(request, "floor")
    if route != "parity":
        raise ValueError(f"unknown floor route {route!r}")
    cap = price_cap(request)
    if cap.method == "deterministic":
        return _deterministic_result(request.model, request.spec, "floor")
    B, Z, K = cap.discount, cap.Z, request.spec.strike
    value = cap.price - B * Z + K * B
    return PriceResult(value, "floor", K, cap.R, cap.strip, cap.truncation, cap.nodes,
                       cap.error_estimate, cap.tail_bound, "parity", B, Z)


def _price_transform(request: PricingRequest, side: str) -> PriceResult:
    model, spec, settings = request.model, request.spec, request.quadrature
    if model.is_deterministic(spec):
        return _deterministic_result(model, spec, side)
    bounds = request.bounds if request.bounds is not None else strip_for(model, spec)
    R = request.R
    if R is None:
        R = default_call_R(bounds) if side == "cap" else default_put_R(bounds)
    _validate_R(R, bounds, side)
    K = spec.strike
    B = _discount(model, spec)
    Z = model.Z(spec)
    scale = B / math.pi
    tol = settings.abs_tol
    U, tail = _truncation(model, spec, bounds, R, math.log(K), scale, tol, settings)
    integrand = _integrand_factory(model, spec, bounds, R, K, settings.mgf_tol)
    quad = adaptive_gauss_kronrod(integrand, 0.0, U, abs_tol=0.9 * tol / scale, max_nodes=settings.max_nodes)
    value = scale * quad.value
    return PriceResult(value, side, K, R, (bounds.lower, bounds.upper), U, quad.nodes,
                       scale * quad.error, tail, "fourier", B, Z)


def price_caplet(model: Model, fixing: float, period: tuple[float, float], rate_strike: float,
                 R: float | None = None, quadrature: QuadratureSettings | None = None) -> PriceResult:
    """Caplet on ``L(fixing, T_1)`` over ``[T_1, T_2]`` with rate strike ``k``, per unit notional.

    The payoff ``delta (L - k)^+`` equals ``(1 + delta L - K)^+`` with ``K = 1 + delta k``,
    so the caplet is a single-period composition cap with that level. The returned
    price is quoted on the rate, that is divided by ``delta``.
    """
    T1, T2 = period
    delta = T2 - T1
    K = 1.0 + delta * rate_strike
    if not K > 0:
        raise ValueError(f"rate strike {rate_strike} gives nonpositive level {K}")
    spec = CompositionSpec(TenorStructure((T1, T2), (fixing,)), K, "cap")
    req = PricingRequest(model, spec, R, quadrature or QuadratureSettings())
    res = price_cap(req)
    return PriceResult(res.price / delta, "caplet", rate_strike, res.R, res.strip, res.truncation,
                       res.nodes, res.error_estimate / delta, res.tail_bound / delta, res.method,
                       res.discount, res.Z)


@dataclass(frozen=True)
class StrikeGridPricer:
    """Prices many strikes of one contract from a single evaluation of ``M_H``.

    ``M_H(R - iu)`` is tabulated on a composite Gauss-Legendre grid over ``[0, U]``
    with ``U`` from the tail bound for the most demanding strike, then reused for
    every strike. Used by calibration, where the same contract is priced for a
    strike strip at every optimizer step.
    """

    model: Model
    spec: CompositionSpec
    strikes: tuple
    R: float | None = None
    abs_tol: float = 1e-9
    panel_width: float = 4.0
    order: int = 16

    def prices(self) -> np.ndarray:
        model, spec = self.model, self.spec
        strikes = np.asarray(self.strikes, dtype=float)
        if np.any(strikes <= 0):
            raise ValueError("strikes must be positive")
        B = _discount(model, spec)
        if model.is_deterministic(spec):
            return B * np.maximum(model.Z(spec) - strikes, 0.0)
        bounds = strip_for(model, spec)
        R = default_call_R(bounds) if self.R is None else self.R
        _validate_R(R, bounds, "cap")
        settings = QuadratureSettings(abs_tol=self.abs_tol)
        log_k = np.log(strikes)
        extreme = float(log_k.min()) if R > 1 else float(log_k.max())
        U, _ = _truncation(model, spec, bounds, R, extreme, B / math.pi, self.abs_tol, settings)
        panels = int(math.ceil(U / self.panel_width))
        u, w = gauss_legendre_panels(0.0, U, panels, self.order)
        z = R - 1j * u
        mh = model.mgf(spec, z, bounds, abs_tol=settings.mgf_tol)
        kernel = np.exp((1.0 - z)[None, :] * log_k[:, None]) / ((-z) * (1.0 - z))[None, :]
        return B / math.pi * (np.real(mh[None, :] * kernel) @ w)


def gaussian_log_moments(model: Model, spec: CompositionSpec, abs_tol: float = 1e-14) -> tuple[float, float]:
    """Mean and variance of H under the T*-forward measure for a Brownian driver.

    For the forward-rate model the variance uses the closed form
    ``c sum_k C_k^2 (e^{2 a s_k} - e^{2 a s_{k-1}}) / (2a)`` with
    ``C_k = sigma_hat/a (e^{-a T_k} - e^{-a T*})`` when the structure is Vasicek and the
    driver homogeneous; otherwise ``int c g^2 ds`` is integrated numerically.
    The mean comes from the deterministic part plus ``int g (b + c Sigma(s, T*)) ds``.
    """
    if not all(isinstance(p, Brownian) for p in model.driver.pieces):
        raise TypeError("Gaussian moments need a Brownian driver")
    const, g = model.composition_log_value_terms(spec)
    breaks = model._breakpoints(spec)
    driver = model.driver

    def coef(s, name):
        return np.array([getattr(driver.piece_at(t), name) for t in s])

    def var_density(s):
        return coef(s, "c") * g(s) ** 2

    if isinstance(model, HjmModel):
        def mean_density(s):
            return g(s) * (coef(s, "b") + coef(s, "c") * model.Sigma(s, spec.horizon))
    else:
        def mean_density(s):
            return g(s) * coef(s, "b")

    if model.is_deterministic(spec):
        return const, 0.0
    mean_part, _ = time_integral(mean_density, breaks, abs_tol=abs_tol)
    vol = getattr(model, "vol", None)
    if isinstance(model, HjmModel) and isinstance(vol, VasicekVolatility) and len(driver.pieces) == 1:
        a, sh = vol.a, vol.sigma_hat
        c = driver.pieces[0].c
        T_star = spec.horizon
        fix = (0.0, *spec.tenor.fixings)
        var = 0.0
        for k in range(spec.N):
            Ck = sh / a * (math.exp(-a * spec.tenor.dates[k]) - math.exp(-a * T_star))
            var += Ck * Ck * (math.exp(2 * a * fix[k + 1]) - math.exp(2 * a * fix[k])) / (2 * a)
        var *= c
    else:
        var, _ = time_integral(var_density, breaks, abs_tol=abs_tol)
    return const + float(mean_part), float(var)


def gaussian_cap_price(model: Model, spec: CompositionSpec) -> float:
    """Lognormal closed form ``B(0,T*) (e^{m+v/2} Phi(d1) - K Phi(d2))`` for a Brownian driver."""
    m, v = gaussian_log_moments(model, spec)
    B = _discount(model, spec)
    K = spec.strike
    if v <= 0:
        return B * max(math.exp(m) - K, 0.0)
    sd = math.sqrt(v)
    d2 = (m - math.log(K)) / sd
    return B * (math.exp(m + 0.5 * v) * ndtr(d2 + sd) - K * ndtr(d2))
