"""Monte Carlo oracle with exact driver increments.

Increments of every homogeneous piece are sampled exactly (Gaussian, or NIG by
inverse-Gaussian subordination). Deterministic integrands are frozen at cell
midpoints, and the drift terms use the same midpoint values, so every
martingale identity holds exactly for the discretised model and only the
midpoint approximation of the integrands separates it from the continuous one.

Streams are counter based: each (seed, batch, cell) triple gets its own Philox
generator, so a batch can be regenerated in isolation and results do not depend
on scheduling.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .composition import CompositionSpec
from .errors import PlanError
from .forward_price import ForwardPriceModel
from .forward_rate import HjmModel
from .levy import NIG, Brownian, LevyModel

MEASURES = ("P", "T*", "forward")
MIN_PATHS = 1_000
DEFAULT_CELLS_PER_YEAR = 24
DEFAULT_BATCH = 50_000


@dataclass(frozen=True)
class SimulationPlan:
    """Paths, time grid, seed and measure for one simulation.

    ``grid`` starts at 0 and must contain every time at which a simulated
    integrand or the driver's characteristics jump.
    """

    paths: int
    grid: tuple
    seed: int = 0
    measure: str = "T*"
    batch_size: int = DEFAULT_BATCH
    j: int | None = None

    def __post_init__(self):
        grid = tuple(float(t) for t in self.grid)
        if self.paths < MIN_PATHS:
            raise PlanError(f"need at least {MIN_PATHS} paths, got {self.paths}")
        if len(grid) < 2 or grid[0] != 0.0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise PlanError("grid must start at 0 and be strictly increasing")
        if self.measure not in MEASURES:
            raise PlanError(f"measure must be one of {MEASURES}, got {self.measure!r}")
        if self.measure == "forward" and (self.j is None or self.j < 1):
            raise PlanError("forward measure needs the reversed index j >= 1")
        if self.batch_size < 1:
            raise PlanError("batch size must be positive")
        object.__setattr__(self, "grid", grid)

    @classmethod
    def uniform(cls, paths: int, horizon: float, breakpoints=(), seed: int = 0,
                measure: str = "T*", cells_per_year: float = DEFAULT_CELLS_PER_YEAR,
                batch_size: int = DEFAULT_BATCH, j: int | None = None) -> "SimulationPlan":
        """Grid with every breakpoint and each gap split into cells of at most ``1/cells_per_year``."""
        knots = sorted({0.0, float(horizon), *[float(b) for b in breakpoints if 0 < b < horizon]})
        grid = [0.0]
        for a, b in zip(knots, knots[1:]):
            n = max(1, int(math.ceil((b - a) * cells_per_year - 1e-9)))
            grid.extend(np.linspace(a, b, n + 1)[1:].tolist())
        return cls(paths, tuple(grid), seed, measure, batch_size, j)

    @property
    def cells(self) -> int:
        return len(self.grid) - 1

    @property
    def batches(self) -> list[int]:
        full, rest = divmod(self.paths, self.batch_size)
        return [self.batch_size] * full + ([rest] if rest else [])

    def midpoints(self) -> np.ndarray:
        g = np.asarray(self.grid)
        return 0.5 * (g[1:] + g[:-1])

    def widths(self) -> np.ndarray:
        return np.diff(np.asarray(self.grid))

    def require(self, times) -> None:
        """Reject the plan unless every time in ``times`` (within the grid span) is a grid point."""
        grid = np.asarray(self.grid)
        for t in times:
            if 0 < t <= grid[-1] and not np.any(np.abs(grid - t) <= 1e-12 * max(1.0, t)):
                raise PlanError(f"simulation grid misses breakpoint {t}")


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with standard error ``sd / sqrt(paths)``; complex means carry
    componentwise errors in the real and imaginary parts of ``stderr``."""

    mean: complex | float
    stderr: complex | float
    paths: int
    seed: int

    def deviation(self, target) -> float:
        """Largest componentwise |mean - target| in units of standard errors."""
        d = self.mean - target
        parts = [(abs(d.real), self.stderr.real), (abs(d.imag), self.stderr.imag)] \
            if isinstance(self.mean, complex) else [(abs(d), self.stderr)]
        out = 0.0
        for diff, se in parts:
            if se > 0:
                out = max(out, diff / se)
            elif diff > 1e-13 * max(1.0, abs(target)):
                return math.inf
        return out


def _stream(seed: int, batch: int, cell: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, batch, cell])))


def _check_exact(driver: LevyModel) -> None:
    for piece in driver.pieces:
        if not isinstance(piece, (Brownian, NIG)):
            raise PlanError(f"no exact sampler for {type(piece).__name__}")


def _cell_pieces(driver: LevyModel, plan: SimulationPlan, tilt: np.ndarray | None):
    _check_exact(driver)
    plan.require(driver.breakpoints)
    mids = plan.midpoints()
    pieces = []
    for k, m in enumerate(mids):
        p = driver.piece_at(m)
        pieces.append(p if tilt is None or tilt[k] == 0 else p.esscher(float(tilt[k])))
    return pieces


def _increment_stream(driver: LevyModel, plan: SimulationPlan, batch: int, size: int,
                      tilt: np.ndarray | None = None) -> Iterator[np.ndarray]:
    pieces = _cell_pieces(driver, plan, tilt)
    for k, (piece, dt) in enumerate(zip(pieces, plan.widths())):
        yield piece.sample(_stream(plan.seed, batch, k), float(dt), size)


def simulate_increments(driver: LevyModel, plan: SimulationPlan, batch: int = 0,
                        tilt: np.ndarray | None = None) -> np.ndarray:
    """Driver increments of one batch, shape ``(paths in batch, cells)``.

    ``tilt`` optionally gives an Esscher parameter per cell (a change to an
    equivalent measure under which the driver is again piecewise homogeneous).
    """
    sizes = plan.batches
    if not 0 <= batch < len(sizes):
        raise PlanError(f"batch {batch} out of range 0..{len(sizes) - 1}")
    cols = list(_increment_stream(driver, plan, batch, sizes[batch], tilt))
    return np.stack(cols, axis=1)


def _theta_mid(driver: LevyModel, mids: np.ndarray, z: np.ndarray) -> np.ndarray:
    return np.real(driver.cumulant(mids, np.asarray(z, dtype=float) + 0j))


@dataclass(frozen=True)
class _Setup:
    """Discretised H = constant + sum_k g_k dL_k, simulated with per-cell tilt,
    optionally reweighted by exp(sum w_k dL_k - weight_const)."""

    constant: float
    g: np.ndarray
    tilt: np.ndarray | None
    weight: np.ndarray | None
    weight_const: float
    discount: float


def _composition_setup(model, spec: CompositionSpec, plan: SimulationPlan) -> _Setup:
    driver = model.driver
    plan.require([*spec.tenor.fixings, *spec.tenor.dates])
    mids, dt = plan.midpoints(), plan.widths()
    B = float(model.curve(spec.horizon))
    log_z = math.log(model.Z(spec))
    if isinstance(model, HjmModel):
        if plan.measure not in ("P", "T*"):
            raise PlanError("forward-rate composition is simulated under P or T*")
        g = model.composition_integrand(spec, mids)
        h = model.Sigma(mids, spec.horizon)
        live = g != 0
        # A(s, T*) - A(s, T_k) = theta(h) - theta(h + g) on live cells
        drift = np.where(live, _theta_mid(driver, mids, h) - _theta_mid(driver, mids, h + g), 0.0)
        constant = log_z + float(np.sum(drift * dt))
        if plan.measure == "T*":
            return _Setup(constant, g, h, None, 0.0, B)
        return _Setup(constant, g, None, h, float(np.sum(_theta_mid(driver, mids, h) * dt)), B)
    if isinstance(model, ForwardPriceModel):
        if plan.measure != "T*":
            raise PlanError("forward-price composition is simulated under T*")
        g = model.composition_integrand(spec, mids)
        constant = log_z + float(np.sum(-_theta_mid(driver, mids, g) * dt))
        return _Setup(constant, g, None, None, 0.0, B)
    raise TypeError(f"unsupported model {type(model).__name__}")


@dataclass(frozen=True)
class DiscretisedComposition:
    """The log-composition exactly as simulated on ``plan`` (T* measure).

    Its moment generating function is available in closed form, so pricing it by
    Fourier inversion isolates the time-discretisation bias of the oracle from its
    sampling error. Exposes the small model interface the Fourier pricer needs;
    pass the continuous model's strip bounds explicitly.
    """

    model: object
    spec: CompositionSpec
    plan: SimulationPlan

    def __post_init__(self):
        if self.plan.measure != "T*":
            raise PlanError("the discretised composition is defined under T*")

    @property
    def curve(self):
        return self.model.curve

    @property
    def driver(self):
        return self.model.driver

    def Z(self, spec: CompositionSpec) -> float:
        return self.model.Z(spec)

    def is_deterministic(self, spec: CompositionSpec) -> bool:
        return self.model.is_deterministic(spec)

    def mgf(self, spec: CompositionSpec, z, bounds=None, abs_tol: float | None = None):
        if spec.tenor != self.spec.tenor:
            raise ValueError("spec tenor differs from the discretised one")
        setup = _composition_setup(self.model, self.spec, self.plan)
        mids, dt = self.plan.midpoints(), self.plan.widths()
        z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
        h = np.zeros_like(mids) if setup.tilt is None else setup.tilt
        drv = self.model.driver
        th_h = drv.cumulant(mids, h + 0j, check=False)
        th_mix = drv.cumulant(mids, h[:, None] + setup.g[:, None] * z_arr[None, :], check=False)
        log_m = z_arr * setup.constant + dt @ (th_mix - th_h[:, None])
        out = np.exp(log_m)
        return out[0] if np.ndim(z) == 0 else out.reshape(np.shape(z))


def _h_batches(model, spec, plan) -> Iterator[tuple[np.ndarray, np.ndarray | None]]:
    """Yield ``(H, weight)`` per batch; weight is None under the pricing measure."""
    setup = _composition_setup(model, spec, plan)
    for b, size in enumerate(plan.batches):
        H = np.full(size, setup.constant)
        log_w = None if setup.weight is None else np.full(size, -setup.weight_const)
        if np.any(setup.g) or log_w is not None:
            for k, dL in enumerate(_increment_stream(model.driver, plan, b, size, setup.tilt)):
                if setup.g[k]:
                    H += setup.g[k] * dL
                if log_w is not None:
                    log_w += setup.weight[k] * dL
        yield H, (None if log_w is None else np.exp(log_w))


def _summarise(sums: list, sq_sums: list, n: int, seed: int, is_complex: bool) -> McEstimate:
    if is_complex:
        re = _summarise([s.real for s in sums], [q.real for q in sq_sums], n, seed, False)
        im = _summarise([s.imag for s in sums], [q.imag for q in sq_sums], n, seed, False)
        return McEstimate(complex(re.mean, im.mean), complex(re.stderr, im.stderr), n, seed)
    mean = math.fsum(sums) / n
    var = max(math.fsum(sq_sums) / n - mean * mean, 0.0) * n / (n - 1)
    return McEstimate(mean, math.sqrt(var / n), n, seed)


def _accumulate(samples: Iterator[np.ndarray], plan: SimulationPlan, is_complex=False) -> McEstimate:
    sums, sq = [], []
    for x in samples:
        sums.append(complex(np.sum(x)) if is_complex else float(np.sum(x)))
        if is_complex:
            sq.append(complex(np.sum(x.real ** 2), np.sum(x.imag ** 2)))
        else:
            sq.append(float(np.sum(x * x)))
    return _summarise(sums, sq, plan.paths, plan.seed, is_complex)


def mc_prices(model, spec: CompositionSpec, plan: SimulationPlan, strikes) -> list[McEstimate]:
    """Prices of the ``spec.side`` option for several levels on shared paths."""
    strikes = np.asarray(strikes, dtype=float)
    setup_B = float(model.curve(spec.horizon))
    per_strike = [([], []) for _ in strikes]
    for H, w in _h_batches(model, spec, plan):
        comp = np.exp(H)
        for i, K in enumerate(strikes):
            pay = setup_B * spec.with_strike(float(K)).payoff(comp)
            if w is not None:
                pay = pay * w
            per_strike[i][0].append(float(np.sum(pay)))
            per_strike[i][1].append(float(np.sum(pay * pay)))
    return [_summarise(s, q, plan.paths, plan.seed, False) for s, q in per_strike]


def mc_price(model, spec: CompositionSpec, plan: SimulationPlan) -> McEstimate:
    """``B(0, T*) E_{T*}[payoff(e^H)]``, or the P-measure estimate with density weights."""
    return mc_prices(model, spec, plan, [spec.strike])[0]


def mc_mgf(model, spec: CompositionSpec, plan: SimulationPlan, z: complex) -> McEstimate:
    """``E_{T*}[e^{zH}]`` with componentwise standard errors."""
    z = complex(z)

    def samples():
        for H, w in _h_batches(model, spec, plan):
            x = np.exp(z * H)
            yield x if w is None else x * w

    return _accumulate(samples(), plan, is_complex=True)


def mc_exp_integral(driver: LevyModel, f: Callable, plan: SimulationPlan) -> McEstimate:
    """``E[exp int f dL]`` for a deterministic real ``f`` frozen at cell midpoints."""
    mids = plan.midpoints()
    fv = np.asarray(f(mids), dtype=float)

    def samples():
        for b, size in enumerate(plan.batches):
            acc = np.zeros(size)
            for k, dL in enumerate(_increment_stream(driver, plan, b, size)):
                acc += fv[k] * dL
            yield np.exp(acc)

    return _accumulate(samples(), plan)


def mc_char_function(driver: LevyModel, t: float, u, paths: int, seed: int = 0) -> list[McEstimate]:
    """Empirical ``E[exp(iu L_t)]`` from exact increments over ``[0, t]``."""
    plan = SimulationPlan.uniform(paths, t, driver.breakpoints, seed, measure="P", cells_per_year=1e-9)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    sums = [[] for _ in u]
    sqs = [[] for _ in u]
    for b, size in enumerate(plan.batches):
        L = np.zeros(size)
        for dL in _increment_stream(driver, plan, b, size):
            L += dL
        for i, ui in enumerate(u):
            x = np.exp(1j * ui * L)
            sums[i].append(complex(np.sum(x)))
            sqs[i].append(complex(np.sum(x.real ** 2), np.sum(x.imag ** 2)))
    return [_summarise(s, q, paths, seed, True) for s, q in zip(sums, sqs)]


@dataclass(frozen=True)
class MartingaleRow:
    instrument: str
    t: float
    mc_mean: float
    initial: float
    stderr: float

    @property
    def deviation_se(self) -> float:
        d = abs(self.mc_mean - self.initial)
        if self.stderr > 0:
            return d / self.stderr
        return 0.0 if d <= 1e-13 * max(1.0, abs(self.initial)) else math.inf


def _martingale_rows(driver, plan, times, name, log_initial, integrand_at, drift_at, tilt=None, initial=None):
    """Estimate ``E[exp(log_initial + sum drift dt + sum integrand dL)]`` at each ``t``."""
    mids, dt = plan.midpoints(), plan.widths()
    grid = np.asarray(plan.grid)
    ints = np.asarray(integrand_at(mids), dtype=float)
    drifts = np.asarray(drift_at(mids), dtype=float)
    stops = [int(np.argmin(np.abs(grid - t))) for t in times]
    sums = [[] for _ in times]
    sqs = [[] for _ in times]
    for b, size in enumerate(plan.batches):
        X = np.full(size, log_initial)
        k_done = 0
        for k, dL in enumerate(_increment_stream(driver, plan, b, size, tilt)):
            X += drifts[k] * dt[k] + ints[k] * dL
            k_done = k + 1
            for i, stop in enumerate(stops):
                if stop == k_done:
                    v = np.exp(X)
                    sums[i].append(float(np.sum(v)))
                    sqs[i].append(float(np.sum(v * v)))
    rows = []
    for i, t in enumerate(times):
        est = _summarise(sums[i], sqs[i], plan.paths, plan.seed, False)
        rows.append(MartingaleRow(name, float(t), est.mean, math.exp(log_initial) if initial is None else initial,
                                  est.stderr))
    return rows


def mc_martingale_report(model, paths: int = 100_000, seed: int = 0, times=(1.0, 2.0),
                         maturities=(3.0, 5.0), max_j: int = 3,
                         cells_per_year: float = DEFAULT_CELLS_PER_YEAR) -> list[MartingaleRow]:
    """Martingale diagnostics.

    Forward-rate model: ``B(t, T) / B^M_t`` under P for each ``t`` in ``times`` and
    ``T`` in ``maturities``; it should stay at ``B(0, T)``.

    Forward-price model: ``F(t, T*_j, T*_{j-1})`` under its forward measure P_{T*_{j-1}}
    (the terminal driver Esscher-tilted by ``S_{j-1}``) for ``j <= max_j``; it
    should stay at ``F(0, T*_j, T*_{j-1})``. Times beyond ``T*_j`` are skipped.
    """
    driver = model.driver
    rows: list[MartingaleRow] = []
    if isinstance(model, HjmModel):
        for T in maturities:
            ts = [t for t in times if t <= T]
            if not ts:
                continue
            plan = SimulationPlan.uniform(paths, max(ts), [*ts, *driver.breakpoints], seed, "P", cells_per_year)
            log_b0 = math.log(model.curve(T))
            rows += _martingale_rows(
                driver, plan, ts, f"discounted_bond(T={T:g})", log_b0,
                lambda s, T=T: model.Sigma(s, T),
                lambda s, T=T: -_theta_mid(driver, s, model.Sigma(s, T)),
            )
        return rows
    if isinstance(model, ForwardPriceModel):
        tenor = model.tenor
        for j in range(1, min(max_j, model.N) + 1):
            Tj = tenor.reversed_date(j)
            ts = [t for t in times if t <= Tj]
            if not ts:
                continue
            plan = SimulationPlan.uniform(paths, max(ts), [*ts, *tenor.dates, *driver.breakpoints], seed,
                                          "forward", cells_per_year, j=j)
            mids = plan.midpoints()
            S = model.cumulative_eta(mids, j - 1)
            # under the tilted law dL has mean theta'(S) dt; compensate it so the
            # integrand is taken against the forward-measure martingale part
            comp = np.real(driver.cumulant_derivative(mids, S + 0j))
            f0 = model.curve.forward_price(Tj, tenor.reversed_date(j - 1))
            rows += _martingale_rows(
                driver, plan, ts, f"forward_price(j={j})", math.log(f0),
                lambda s, j=j: model.eta(s, j),
                lambda s, j=j, comp=comp: model.forward_drift(s, j) - model.eta(s, j) * comp,
                tilt=S,
            )
        return rows
    raise TypeError(f"unsupported model {type(model).__name__}")


def write_martingale_csv(rows: list[MartingaleRow], path, schema_version: int = 1) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version={schema_version}\n")
        w = csv.writer(fh)
        w.writerow(["instrument", "t", "mc_mean", "initial", "stderr", "deviation_se"])
        for r in rows:
            w.writerow([r.instrument, f"{r.t:.10g}", f"{r.mc_mean:.12g}", f"{r.initial:.12g}",
                        f"{r.stderr:.6g}", f"{r.deviation_se:.4f}"])


def composition_plan(model, spec: CompositionSpec, paths: int, seed: int = 0, measure: str = "T*",
                     cells_per_year: float = DEFAULT_CELLS_PER_YEAR,
                     batch_size: int = DEFAULT_BATCH) -> SimulationPlan:
    """Plan covering ``[0, s_N]`` with every fixing, tenor date and driver breakpoint."""
    last = spec.tenor.fixings[-1]
    horizon = last if last > 0 else spec.horizon
    breaks = [*spec.tenor.fixings, *spec.tenor.dates, *model.driver.breakpoints]
    return SimulationPlan.uniform(paths, horizon, breaks, seed, measure, cells_per_year, batch_size)
