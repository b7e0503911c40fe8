"""Run configuration: JSON schema, validation and model construction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .calibration import CapletMarket, SabrMark, composition_tenor
from .composition import CompositionSpec, TenorStructure
from .curve import DiscountCurve
from .errors import ConfigError, InfeasibleStripError
from .forward_price import ForwardPriceModel, ForwardVolatility
from .forward_rate import HjmModel, HoLeeVolatility, TabulatedVolatility, VasicekVolatility
from .levy import NIG, Brownian, ExponentialMomentBound, LevyModel

SCHEMA_VERSION = 1
COMMANDS = ("price", "smile", "calibrate", "mc-check", "parity-check")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_num_list = {"type": "array", "items": _num, "minItems": 1}

_PIECE = {
    "oneOf": [
        {"type": "object", "required": ["family"], "additionalProperties": False,
         "properties": {"family": {"const": "brownian"}, "b": _num, "c": {"type": "number", "minimum": 0}}},
        {"type": "object", "required": ["family", "alpha", "beta", "delta"], "additionalProperties": False,
         "properties": {"family": {"const": "nig"}, "alpha": _pos, "beta": _num, "delta": _pos, "mu": _num}},
        {"type": "object", "required": ["family", "alpha", "beta"], "additionalProperties": False,
         "properties": {"family": {"const": "nig_unit_variance"}, "alpha": _pos, "beta": _num}},
    ]
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "command"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"enum": list(COMMANDS)},
        "curve": {
            "oneOf": [
                {"type": "object", "required": ["flat_rate"], "additionalProperties": False,
                 "properties": {"flat_rate": {"type": "number", "minimum": 0}}},
                {"type": "object", "required": ["times", "discounts"], "additionalProperties": False,
                 "properties": {"times": _num_list, "discounts": _num_list}},
            ]
        },
        "driver": {
            "type": "object",
            "required": ["segments"],
            "additionalProperties": False,
            "properties": {
                "segments": {
                    "type": "array", "minItems": 1,
                    "items": {"type": "object", "required": ["piece"], "additionalProperties": False,
                              "properties": {"end": {"type": ["number", "null"]}, "piece": _PIECE}},
                },
                "em": {"type": "object", "required": ["M"], "additionalProperties": False,
                       "properties": {"M": _pos, "epsilon": _pos}},
            },
        },
        "model": {
            "type": "object",
            "required": ["kind", "volatility"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["hjm", "forward_price"]},
                "volatility": {
                    "type": "object",
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["vasicek", "ho_lee", "tabulated", "vasicek_like", "constant",
                                          "exponential"]},
                        "sigma_hat": {"type": "number", "minimum": 0},
                        "a": _pos,
                        "taus": _num_list, "values": _num_list,
                        "scales": _num_list, "decay": _num,
                        "grid": _num_list, "table": {"type": "array", "items": _num_list},
                    },
                    "additionalProperties": False,
                },
            },
        },
        "spec": {
            "type": "object",
            "required": ["strike"],
            "additionalProperties": False,
            "properties": {
                "dates": _num_list, "fixings": _num_list,
                "start": _pos, "periods": {"type": "integer", "minimum": 1}, "accrual": _pos,
                "strike": _pos, "side": {"enum": ["cap", "floor"]},
            },
        },
        "numerics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "R": {"type": ["number", "null"]},
                "abs_tol": _pos,
                "max_nodes": {"type": "integer", "minimum": 15},
                "paths": {"type": "integer", "minimum": 1000},
                "seed": {"type": "integer", "minimum": 0},
                "cells_per_year": _pos,
                "batch_size": {"type": "integer", "minimum": 1},
                "strikes": {"type": "array", "items": _pos, "minItems": 1},
                "strike_multipliers": {"type": "array", "items": _pos, "minItems": 1},
                "floor_route": {"enum": ["parity", "transform"]},
                "max_se": _pos,
                "parity_tol": _pos,
            },
        },
        "smile": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rate": {"type": "number", "minimum": 0},
                "fixing": _pos, "start": _pos, "end": _pos,
                "sabr": {"type": "object", "additionalProperties": False,
                         "properties": {"sigma0": _pos, "nu": {"type": "number", "minimum": 0},
                                        "beta": {"type": "number", "minimum": 0, "maximum": 1},
                                        "rho": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1}}},
                "strike_offsets": _num_list,
                "composition": {"type": "object", "additionalProperties": False,
                                "properties": {"start": _pos, "periods": {"type": "integer", "minimum": 1},
                                               "accrual": _pos}},
                "moneyness": _num_list,
                "model_kind": {"enum": ["hjm", "forward_price"]},
            },
        },
    },
    "allOf": [
        {"if": {"properties": {"command": {"enum": ["price", "mc-check", "parity-check"]}}},
         "then": {"required": ["curve", "driver", "model", "spec"]}},
    ],
}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``raw`` is the parsed JSON document."""

    raw: dict

    @property
    def command(self) -> str:
        return self.raw["command"]

    @property
    def numerics(self) -> dict:
        return self.raw.get("numerics", {})

    @property
    def smile(self) -> dict:
        return self.raw.get("smile", {})


def validate(raw: dict) -> RunConfig:
    """Schema check plus semantic checks that only construction can reveal.

    All models are built once here so that no computation starts on a bad config.
    """
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    cfg = RunConfig(raw)
    try:
        if "model" in raw:
            build_model(cfg)
        if "spec" in raw:
            build_spec(cfg)
        if cfg.command in ("smile", "calibrate"):
            build_market(cfg)
    except (ConfigError, InfeasibleStripError):
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"config inconsistent: {exc}") from None
    return cfg


def load(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return validate(raw)


def build_curve(cfg: RunConfig) -> DiscountCurve:
    c = cfg.raw.get("curve", {"flat_rate": 0.04})
    if "flat_rate" in c:
        return DiscountCurve.flat(c["flat_rate"])
    return DiscountCurve(tuple(c["times"]), tuple(c["discounts"]))


def _piece(p: dict):
    fam = p["family"]
    if fam == "brownian":
        return Brownian(p.get("b", 0.0), p.get("c", 1.0))
    if fam == "nig":
        return NIG(p["alpha"], p["beta"], p["delta"], p.get("mu", 0.0))
    return NIG.unit_variance(p["alpha"], p["beta"])


def build_driver(cfg: RunConfig) -> LevyModel:
    d = cfg.raw["driver"]
    segs = d["segments"]
    pieces = [_piece(s["piece"]) for s in segs]
    ends = [s.get("end") for s in segs]
    if any(e is None for e in ends[:-1]):
        raise ConfigError("only the last driver segment may omit its end time")
    ends = [math.inf if e is None else float(e) for e in ends]
    em = d.get("em")
    bound = None if em is None else ExponentialMomentBound(em["M"], em.get("epsilon", 0.1))
    return LevyModel(tuple(pieces), tuple(ends), bound)


def build_spec(cfg: RunConfig) -> CompositionSpec:
    s = cfg.raw["spec"]
    side = s.get("side", "cap")
    if "dates" in s:
        tenor = TenorStructure(tuple(s["dates"]), tuple(s["fixings"]) if "fixings" in s else None)
    elif "start" in s and "periods" in s:
        tenor = TenorStructure.regular(s["start"], s["periods"], s.get("accrual", 0.25))
    else:
        raise ConfigError("spec needs either 'dates' or 'start' and 'periods'")
    return CompositionSpec(tenor, s["strike"], side)


def build_model(cfg: RunConfig):
    m = cfg.raw["model"]
    v = m["volatility"]
    curve = build_curve(cfg)
    driver = build_driver(cfg)
    kind = v["kind"]
    if m["kind"] == "hjm":
        if kind == "vasicek":
            vol = VasicekVolatility(v["sigma_hat"], v["a"])
        elif kind == "ho_lee":
            vol = HoLeeVolatility(v["sigma_hat"])
        elif kind == "tabulated":
            vol = TabulatedVolatility(tuple(v["taus"]), tuple(v["values"]))
        else:
            raise ConfigError(f"volatility kind {kind!r} is not a forward-rate structure")
        return HjmModel(driver, vol, curve)
    tenor = build_spec(cfg).tenor
    mats = tenor.dates[:-1]
    if kind == "vasicek_like":
        vol = ForwardVolatility.vasicek_like(tenor, v["sigma_hat"], v["a"])
    elif kind == "constant":
        vol = ForwardVolatility.constant(mats, v["scales"])
    elif kind == "exponential":
        vol = ForwardVolatility.exponential(mats, v["scales"], v["decay"])
    elif kind == "tabulated":
        vol = ForwardVolatility(mats, kind="tabulated", grid=tuple(v["grid"]), table=tuple(map(tuple, v["table"])))
    else:
        raise ConfigError(f"volatility kind {kind!r} is not a forward-price structure")
    return ForwardPriceModel(driver, tenor, vol, curve)


def build_market(cfg: RunConfig) -> tuple[CapletMarket, SabrMark]:
    s = cfg.smile
    market = CapletMarket(s.get("rate", 0.04), s.get("fixing", 5.0), s.get("start", 5.0), s.get("end", 5.25))
    if market.fixing > market.start or market.end <= market.start:
        raise ConfigError("smile caplet needs fixing <= start < end")
    sabr = {"sigma0": 0.01, "nu": 0.40, "beta": 0.0, "rho": 0.30, **s.get("sabr", {})}
    return market, market.sabr_mark(**sabr)


def build_composition_tenor(cfg: RunConfig) -> TenorStructure:
    c = cfg.smile.get("composition", {})
    return composition_tenor(c.get("start", 0.25), c.get("periods", 20), c.get("accrual", 0.25))
