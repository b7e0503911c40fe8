"""Batch command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 failed check.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .calibration import (ModelTemplate, atm_weights, calibrate, caplet_smile_rows, smile_report, write_rows_csv)
from .errors import ConfigError, LevyTermError
from .fourier import PricingRequest, QuadratureSettings, price_cap, price_floor
from .montecarlo import DEFAULT_BATCH, DEFAULT_CELLS_PER_YEAR, composition_plan, mc_prices

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4
OUT_ENV = "LEVYTERM_OUT"
SCHEMA_VERSION = cfgmod.SCHEMA_VERSION


class _Ctx:
    def __init__(self, out: Path, quiet: bool):
        self.out = out
        self.quiet = quiet

    def say(self, msg: str) -> None:
        if not self.quiet:
            print(msg)

    def write_json(self, name: str, payload: dict) -> Path:
        path = self.out / name
        doc = {"schema_version": SCHEMA_VERSION, **payload}
        path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")
        return path

    def write_csv(self, name: str, header: list[str], rows: list[list]) -> Path:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            fh.write(f"# schema_version={SCHEMA_VERSION}\n")
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        return path


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _quad(cfg) -> QuadratureSettings:
    n = cfg.numerics
    return QuadratureSettings(abs_tol=n.get("abs_tol", 1e-9), max_nodes=n.get("max_nodes", 100_000))


def _price(model, spec, cfg):
    req = PricingRequest(model, spec, cfg.numerics.get("R"), _quad(cfg))
    if spec.side == "cap":
        return price_cap(req)
    return price_floor(req, cfg.numerics.get("floor_route", "parity"))


def cmd_price(cfg, ctx: _Ctx) -> int:
    model = cfgmod.build_model(cfg)
    spec = cfgmod.build_spec(cfg)
    res = _price(model, spec, cfg)
    ctx.write_json("price.json", {"command": "price", "model": model.kind, "result": res.to_dict()})
    ctx.say(f"{spec.side} K={spec.strike:g}: {res.price:.12g} (method={res.method}, R={res.R})")
    return EXIT_OK


def _calibrations(cfg):
    market, mark = cfgmod.build_market(cfg)
    offsets = cfg.smile.get("strike_offsets")
    strikes = market.strike_grid() if offsets is None else market.strike_grid(offsets)
    targets = market.targets(mark, strikes)
    kind = cfg.smile.get("model_kind", "hjm")
    gauss = calibrate(targets, ModelTemplate(kind, "gaussian", curve=market.curve), market,
                      weights=atm_weights(strikes, market.forward))
    nig = calibrate(targets, ModelTemplate(kind, "nig", curve=market.curve), market)
    return market, mark, targets, gauss, nig


def cmd_calibrate(cfg, ctx: _Ctx) -> int:
    market, mark, targets, gauss, nig = _calibrations(cfg)
    ctx.write_json("calibration.json", {
        "command": "calibrate",
        "market": {"forward": market.forward, "expiry": market.fixing, "discount": market.discount,
                   "sabr": {"sigma0": mark.sigma0, "nu": mark.nu, "beta": mark.beta, "rho": mark.rho}},
        "gaussian": gauss.to_dict(),
        "nig": nig.to_dict(),
    })
    ctx.write_csv("targets.csv", ["strike", "normal_vol", "price"],
                  [[f"{t.strike:.12g}", f"{t.vol:.12g}", f"{t.price:.12g}"] for t in targets])
    ctx.say(f"gaussian rmse {gauss.rmse * 1e4:.4f} bp, nig rmse {nig.rmse * 1e4:.4f} bp")
    return EXIT_OK


def cmd_smile(cfg, ctx: _Ctx) -> int:
    market, mark, targets, gauss, nig = _calibrations(cfg)
    write_rows_csv(caplet_smile_rows(targets, gauss, nig), ctx.out / "caplet_smile.csv",
                   header_comment=f"caplet fixing {market.fixing:g} on [{market.start:g}, {market.end:g}], "
                                  f"forward {market.forward:.10g}; Bachelier normal vols")
    tenor = cfgmod.build_composition_tenor(cfg)
    moneyness = cfg.smile.get("moneyness")
    kwargs = {} if moneyness is None else {"moneyness": tuple(moneyness)}
    atm, rows = smile_report(gauss.model(tenor), nig.model(tenor), tenor, **kwargs)
    write_rows_csv(rows, ctx.out / "composition_smile.csv",
                   header_comment=f"composition over [{tenor.dates[0]:g}, {tenor.horizon:g}], ATM {atm:.10g}")
    ctx.write_json("smile.json", {"command": "smile", "atm_composition": atm,
                                  "gaussian": gauss.to_dict(), "nig": nig.to_dict()})
    ctx.say(f"ATM composition {atm:.6f}; caplet_smile.csv and composition_smile.csv written to {ctx.out}")
    return EXIT_OK


def cmd_mc_check(cfg, ctx: _Ctx) -> int:
    model = cfgmod.build_model(cfg)
    spec = cfgmod.build_spec(cfg)
    n = cfg.numerics
    Z = model.Z(spec)
    strikes = n.get("strikes") or [Z * m for m in n.get("strike_multipliers", [0.98, 1.0, 1.02])]
    max_se = n.get("max_se", 3.0)
    plan = composition_plan(model, spec, n.get("paths", 1_000_000), n.get("seed", 0),
                            cells_per_year=n.get("cells_per_year", DEFAULT_CELLS_PER_YEAR),
                            batch_size=n.get("batch_size", DEFAULT_BATCH))
    estimates = mc_prices(model, spec, plan, strikes)
    rows, ok = [], True
    for K, est in zip(strikes, estimates):
        fourier = _price(model, spec.with_strike(K), cfg).price
        dev = est.deviation(fourier)
        passed = dev < max_se
        ok &= passed
        rows.append([f"{K:.12g}", f"{fourier:.12g}", f"{est.mean:.12g}", f"{est.stderr:.6g}", f"{dev:.4f}",
                     "pass" if passed else "fail"])
        ctx.say(f"K={K:.6f} fourier={fourier:.8f} mc={est.mean:.8f}±{est.stderr:.2e} ({dev:.2f} se) "
                f"{'pass' if passed else 'FAIL'}")
    ctx.write_csv("mc_check.csv", ["strike", "fourier", "mc", "stderr", "deviation_se", "status"], rows)
    ctx.write_json("mc_check.json", {"command": "mc-check", "model": model.kind, "paths": plan.paths,
                                     "seed": plan.seed, "max_se": max_se, "passed": bool(ok)})
    return EXIT_OK if ok else EXIT_CHECK


def cmd_parity_check(cfg, ctx: _Ctx) -> int:
    model = cfgmod.build_model(cfg)
    spec = cfgmod.build_spec(cfg)
    n = cfg.numerics
    Z = model.Z(spec)
    strikes = n.get("strikes") or list(Z * np.linspace(0.9, 1.1, 20))
    tol = n.get("parity_tol", 1e-8)
    B_star = float(model.curve(spec.horizon))
    B_1 = float(model.curve(spec.tenor.dates[0]))
    rows, worst = [], 0.0
    quad = _quad(cfg)
    for K in strikes:
        s = spec.with_strike(float(K))
        cap = price_cap(PricingRequest(model, s, n.get("R"), quad)).price
        floor = price_floor(PricingRequest(model, s.with_strike(float(K), "floor"), None, quad), "transform").price
        gap = cap - floor - B_1 + K * B_star
        worst = max(worst, abs(gap))
        rows.append([f"{K:.12g}", f"{cap:.15g}", f"{floor:.15g}", f"{gap:.3e}"])
    ok = worst < tol
    ctx.write_csv("parity_check.csv", ["strike", "cap", "floor_direct", "parity_gap"], rows)
    ctx.write_json("parity_check.json", {"command": "parity-check", "max_abs_gap": worst, "tolerance": tol,
                                         "passed": bool(ok)})
    ctx.say(f"max |C - F - B(0,T_1) + K B(0,T*)| = {worst:.3e} ({'pass' if ok else 'FAIL'})")
    return EXIT_OK if ok else EXIT_CHECK


COMMAND_TABLE = {
    "price": cmd_price,
    "smile": cmd_smile,
    "calibrate": cmd_calibrate,
    "mc-check": cmd_mc_check,
    "parity-check": cmd_parity_check,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levyterm", description="Caps and floors on compositions of LIBOR rates "
                                "under Lévy term-structure models.")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./levyterm-out)")
    p.add_argument("--seed", type=int, default=None, help="override numerics.seed")
    p.add_argument("--paths", type=int, default=None, help="override numerics.paths")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return p


def _error_record(out: Path | None, exc: BaseException, code: int) -> None:
    record = {"schema_version": SCHEMA_VERSION, "error": type(exc).__name__, "message": str(exc),
              "exit_code": code}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    if out is not None and out.is_dir():
        (out / "error.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out or os.environ.get(OUT_ENV) or "levyterm-out")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _error_record(None, exc, EXIT_CONFIG)
        return EXIT_CONFIG
    try:
        cfg = cfgmod.load(args.config)
        if args.seed is not None or args.paths is not None:
            raw = dict(cfg.raw)
            numerics = dict(raw.get("numerics", {}))
            if args.seed is not None:
                numerics["seed"] = args.seed
            if args.paths is not None:
                numerics["paths"] = args.paths
            raw["numerics"] = numerics
            cfg = cfgmod.validate(raw)
    except ConfigError as exc:
        _error_record(out, exc, EXIT_CONFIG)
        return EXIT_CONFIG
    except LevyTermError as exc:
        # well-formed but numerically infeasible, e.g. volatility beyond the driver's moments
        _error_record(out, exc, EXIT_NUMERIC)
        return EXIT_NUMERIC
    ctx = _Ctx(out, args.quiet)
    try:
        return COMMAND_TABLE[cfg.command](cfg, ctx)
    except ConfigError as exc:
        _error_record(out, exc, EXIT_CONFIG)
        return EXIT_CONFIG
    except (LevyTermError, ArithmeticError, np.linalg.LinAlgError) as exc:
        _error_record(out, exc, EXIT_NUMERIC)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
