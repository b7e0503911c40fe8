"""Time-inhomogeneous Lévy drivers (processes with independent increments and
absolutely continuous characteristics).

A driver is a piecewise-in-time concatenation of homogeneous pieces, each a
Brownian motion with drift or a normal inverse Gaussian (NIG) process. On a piece
the local characteristics ``(b, c, lambda)`` are constant, so the cumulant
generating function

    theta_s(z) = b z + c z^2 / 2 + int (e^{zx} - 1 - zx) lambda(dx)

is available in closed form and

    E[exp int_0^t f(s) dL_s] = exp int_0^t theta_s(f(s)) ds

reduces to a deterministic time integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import StripError
from .quadrature import time_integral

_STRIP_SLACK = 1e-12


@dataclass(frozen=True)
class Brownian:
    """Brownian motion with drift: ``b`` per unit time, diffusion rate ``c``."""

    b: float = 0.0
    c: float = 1.0

    family = "brownian"

    def __post_init__(self):
        if not self.c >= 0.0:
            raise ValueError(f"diffusion rate c must be nonnegative, got {self.c}")

    def cumulant(self, z):
        return self.b * z + 0.5 * self.c * z * z

    def cumulant_derivative(self, z):
        return self.b + self.c * z

    def moment_domain(self) -> tuple[float, float]:
        return -math.inf, math.inf

    def esscher(self, h: float) -> "Brownian":
        return Brownian(b=self.b + self.c * h, c=self.c)

    @property
    def mean_rate(self) -> float:
        return self.b

    @property
    def variance_rate(self) -> float:
        return self.c

    def sample(self, rng: np.random.Generator, dt: float, size: int) -> np.ndarray:
        return self.b * dt + math.sqrt(self.c * dt) * rng.standard_normal(size)

    def levy_density(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class NIG:
    """Normal inverse Gaussian process with parameters ``(alpha, beta, delta, mu)``.

    ``delta`` is the scale per unit time and ``mu`` the location per unit time.
    Exponential moments exist for real arguments in ``(-alpha - beta, alpha - beta)``.
    """

    alpha: float
    beta: float
    delta: float
    mu: float = 0.0

    family = "nig"

    def __post_init__(self):
        if not (self.alpha > abs(self.beta)):
            raise ValueError(f"NIG needs alpha > |beta|, got alpha={self.alpha}, beta={self.beta}")
        if not self.delta > 0.0:
            raise ValueError(f"NIG scale delta must be positive, got {self.delta}")

    @classmethod
    def centered(cls, alpha: float, beta: float, delta: float) -> "NIG":
        """NIG whose mean is zero (``mu = -delta beta / gamma``)."""
        gamma = math.sqrt(alpha * alpha - beta * beta)
        return cls(alpha, beta, delta, -delta * beta / gamma)

    @classmethod
    def unit_variance(cls, alpha: float, beta: float) -> "NIG":
        """Centered NIG with unit variance per unit time (``delta = gamma^3 / alpha^2``)."""
        gamma = math.sqrt(alpha * alpha - beta * beta)
        return cls.centered(alpha, beta, gamma ** 3 / (alpha * alpha))

    @property
    def gamma(self) -> float:
        return math.sqrt(self.alpha * self.alpha - self.beta * self.beta)

    def cumulant(self, z):
        # principal branch: inside the strip Re(alpha^2 - (beta + z)^2) > 0
        w = self.beta + z
        return self.mu * z + self.delta * (self.gamma - np.sqrt(self.alpha * self.alpha - w * w + 0j))

    def cumulant_derivative(self, z):
        w = self.beta + z
        return self.mu + self.delta * w / np.sqrt(self.alpha * self.alpha - w * w + 0j)

    def moment_domain(self) -> tuple[float, float]:
        return -self.alpha - self.beta, self.alpha - self.beta

    def esscher(self, h: float) -> "NIG":
        return NIG(self.alpha, self.beta + h, self.delta, self.mu)

    @property
    def mean_rate(self) -> float:
        return self.mu + self.delta * self.beta / self.gamma

    @property
    def variance_rate(self) -> float:
        return self.delta * self.alpha ** 2 / self.gamma ** 3

    def sample(self, rng: np.random.Generator, dt: float, size: int) -> np.ndarray:
        # subordination: X = mu dt + beta I + sqrt(I) Z with I ~ IG(delta dt / gamma, (delta dt)^2)
        scale = self.delta * dt
        subordinator = rng.wald(scale / self.gamma, scale * scale, size)
        return self.mu * dt + self.beta * subordinator + np.sqrt(subordinator) * rng.standard_normal(size)

    def levy_density(self, x):
        """Lévy density ``delta alpha / pi * e^{beta x} K_1(alpha |x|) / |x|`` (oracle use only)."""
        from scipy.special import k1e

        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        return self.delta * self.alpha / math.pi * np.exp(self.beta * x - self.alpha * ax) * k1e(self.alpha * ax) / ax


Family = Brownian | NIG


@dataclass(frozen=True)
class ExponentialMomentBound:
    """Claimed exponential-moment constants ``(M, epsilon)``: theta is finite for
    ``|Re z| <= (1 + epsilon) M``."""

    M: float
    epsilon: float = 0.1

    def __post_init__(self):
        if not (self.M > 0.0 and self.epsilon > 0.0):
            raise ValueError(f"M and epsilon must be positive, got M={self.M}, epsilon={self.epsilon}")

    @property
    def strip(self) -> float:
        return (1.0 + self.epsilon) * self.M


@dataclass(frozen=True)
class EmReport:
    valid: bool
    max_M: float
    violations: tuple[str, ...] = ()


def _family_max_M(piece: Family, epsilon: float) -> float:
    lo, hi = piece.moment_domain()
    return min(-lo, hi) / (1.0 + epsilon)


# Default M for Brownian pieces, whose exponential moments are unrestricted.
DEFAULT_BROWNIAN_M = 10.0


@dataclass(frozen=True)
class LevyModel:
    """Piecewise-homogeneous time-inhomogeneous Lévy process.

    Parameters
    ----------
    pieces : sequence of Brownian or NIG
        Homogeneous pieces in time order.
    ends : sequence of float
        Right end of each piece; the last one may be ``inf``.
    em : ExponentialMomentBound, optional
        Claimed (M, epsilon). Defaults to 99% of the largest admissible M with
        ``epsilon = 0.1`` (``DEFAULT_BROWNIAN_M`` when there are no jumps).
    """

    pieces: tuple
    ends: tuple
    em: ExponentialMomentBound | None = None
    _ends_arr: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pieces = tuple(self.pieces)
        ends = tuple(float(e) for e in self.ends)
        if not pieces or len(pieces) != len(ends):
            raise ValueError("need one end time per piece")
        if any(e <= 0 for e in ends) or any(b <= a for a, b in zip(ends, ends[1:])):
            raise ValueError(f"segment ends must be positive and strictly increasing, got {ends}")
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "ends", ends)
        object.__setattr__(self, "_ends_arr", np.array(ends))
        em = self.em
        if em is None:
            eps = 0.1
            sup = min(_family_max_M(p, eps) for p in pieces)
            em = ExponentialMomentBound(DEFAULT_BROWNIAN_M if math.isinf(sup) else 0.99 * sup, eps)
            object.__setattr__(self, "em", em)
        report = validate_em(self)
        if not report.valid:
            raise StripError(
                "claimed exponential-moment bound is inconsistent with the driver ("
                + "; ".join(report.violations) + ")",
                lower=-report.max_M, upper=report.max_M, value=em.M,
            )

    @classmethod
    def homogeneous(cls, piece: Family, em: ExponentialMomentBound | None = None) -> "LevyModel":
        return cls((piece,), (math.inf,), em)

    @property
    def family(self) -> str:
        names = {p.family for p in self.pieces}
        return names.pop() if len(self.pieces) == 1 else "composite"

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(e for e in self.ends[:-1])

    @property
    def M(self) -> float:
        return self.em.M

    def piece_at(self, s: float) -> Family:
        return self.pieces[self._index(np.atleast_1d(float(s)))[0]]

    def _index(self, s: np.ndarray) -> np.ndarray:
        # a piece covers (previous end, end]; time 0 belongs to the first piece
        idx = np.searchsorted(self._ends_arr, s, side="left")
        return np.minimum(idx, len(self.pieces) - 1)

    def check_strip(self, z, what: str = "cumulant argument") -> None:
        re = np.real(np.asarray(z))
        if re.size == 0:
            return
        bound = self.em.strip
        worst = float(np.max(np.abs(re)))
        if worst > bound * (1.0 + _STRIP_SLACK):
            raise StripError(what, lower=-bound, upper=bound, value=float(re.flat[np.argmax(np.abs(re))]))

    def cumulant(self, s, z, *, check: bool = True):
        """theta_s(z). ``z`` is a scalar or has leading axis aligned with ``s`` (shape ``(n,)`` or ``(n, m)``)."""
        z = np.asarray(z) + 0j
        if check:
            self.check_strip(z)
        if len(self.pieces) == 1:
            return self.pieces[0].cumulant(z)
        return self._dispatch("cumulant", s, z)

    def cumulant_derivative(self, s, z, *, check: bool = True):
        z = np.asarray(z) + 0j
        if check:
            self.check_strip(z)
        if len(self.pieces) == 1:
            return self.pieces[0].cumulant_derivative(z)
        return self._dispatch("cumulant_derivative", s, z)

    def _dispatch(self, name: str, s, z: np.ndarray) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        zb = np.broadcast_to(z, s.shape) if z.ndim == 0 else z
        if zb.shape[0] != s.shape[0]:
            raise ValueError(f"z leading axis {zb.shape} does not match times {s.shape}")
        idx = self._index(s)
        out = np.empty(zb.shape, dtype=complex)
        for k, piece in enumerate(self.pieces):
            mask = idx == k
            if mask.any():
                out[mask] = getattr(piece, name)(zb[mask])
        return out


def cumulant(model: LevyModel, s: float, z: complex) -> complex:
    """Cumulant generating function theta_s(z) at a single time."""
    model.check_strip(z)
    return complex(model.piece_at(s).cumulant(complex(z)))


def integrated_cumulant(model: LevyModel, f: Callable, t: float,
                        breakpoints: Sequence[float] = (), abs_tol: float = 1e-10):
    """``int_0^t theta_s(f(s)) ds``, the log of ``E[exp int_0^t f dL]``.

    ``f`` maps an array of times to an array of (complex) integrands, either of
    shape ``(n,)`` or ``(n, m)`` for a batch of ``m`` functions. Its
    discontinuities must be listed in ``breakpoints``; the driver's own segment
    boundaries are added automatically.
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t == 0:
        probe = np.asarray(f(np.zeros(1)))
        return np.zeros(probe.shape[1:], dtype=complex) if probe.ndim > 1 else 0j
    points = [0.0, t, *[b for b in breakpoints if 0 < b < t], *[b for b in model.breakpoints if b < t]]

    def integrand(s):
        z = np.asarray(f(s))
        model.check_strip(z, "integrand f(s)")
        return model.cumulant(s, z, check=False)

    value, _ = time_integral(integrand, points, abs_tol=abs_tol)
    return value[()] if np.ndim(value) == 0 else value


def char_function(model: LevyModel, t: float, u):
    """Characteristic function ``E[exp(i u L_t)]`` for scalar or array ``u``."""
    u = np.asarray(u, dtype=float)
    flat = np.atleast_1d(u).ravel()
    if t == 0:
        return np.ones_like(u, dtype=complex)[()]
    value = integrated_cumulant(model, lambda s: np.broadcast_to(1j * flat, (s.size, flat.size)), t)
    out = np.exp(np.atleast_1d(value)).reshape(u.shape)
    return out[()] if out.ndim == 0 else out


def validate_em(model: LevyModel, em: ExponentialMomentBound | None = None) -> EmReport:
    """Check the claimed (M, epsilon) against each piece's exponential-moment domain.

    NIG pieces admit ``(1 + epsilon) M < min(alpha - beta, alpha + beta)``; Brownian
    pieces admit any finite M. The returned ``max_M`` is the supremum of
    admissible M for the claimed epsilon (not itself admissible for NIG). Pass
    ``em`` to test a different claim against the same driver.
    """
    em = model.em if em is None else em
    eps = em.epsilon
    violations = []
    max_m = math.inf
    for k, piece in enumerate(model.pieces):
        sup = _family_max_M(piece, eps)
        max_m = min(max_m, sup)
        if isinstance(piece, NIG) and not (em.strip < min(piece.alpha - piece.beta, piece.alpha + piece.beta)):
            violations.append(
                f"piece {k}: (1+eps)M = {em.strip:.6g} must be < min(alpha-beta, alpha+beta) = "
                f"{min(piece.alpha - piece.beta, piece.alpha + piece.beta):.6g}"
            )
    return EmReport(valid=not violations, max_M=max_m, violations=tuple(violations))
