"""Model builders shared by the test modules."""

import functools
import math

from levyterm import (NIG, Brownian, CompositionSpec, DiscountCurve, ForwardPriceModel, ForwardVolatility,
                      HjmModel, LevyModel, TenorStructure, VasicekVolatility)

# NIG parameters fitted to the SABR caplet smile (see configs/mc_check_*.json)
HJM_NIG = (0.39673797065922645, -0.15255790036764297, 0.014188769725838653)
FP_NIG = (0.35616071232586444, 0.1042456386959501, 0.013839442477432838)

ACCEPTANCE_LINES: list[str] = []


def quarterly(start=5.0, periods=4):
    return TenorStructure.regular(start, periods, 0.25)


def hjm_model(driver, sigma_hat=0.01, a=0.05, rate=0.04):
    return HjmModel(driver, VasicekVolatility(sigma_hat, a), DiscountCurve.flat(rate))


def fp_model(driver, tenor, sigma_hat=0.01, a=0.05, rate=0.04):
    return ForwardPriceModel(driver, tenor, ForwardVolatility.vasicek_like(tenor, sigma_hat, a),
                             DiscountCurve.flat(rate))


def spec_on(tenor, strike=1.04, side="cap"):
    return CompositionSpec(tenor, strike, side)


def brownian():
    return LevyModel.homogeneous(Brownian(0.0, 1.0))


def nig(alpha=3.0, beta=-1.0):
    return LevyModel.homogeneous(NIG.unit_variance(alpha, beta))


def composite():
    return LevyModel((Brownian(0.0, 1.0), NIG.unit_variance(3.0, -1.0)), (2.0, math.inf))


DRIVERS = {"brownian": brownian, "nig": nig, "composite": composite}


def build(kind, driver, tenor=None, sigma_hat=0.01):
    tenor = tenor or quarterly()
    return hjm_model(driver, sigma_hat) if kind == "hjm" else fp_model(driver, tenor, sigma_hat)


@functools.lru_cache(maxsize=None)
def sabr_calibration(model_kind="hjm"):
    """Gaussian and NIG fits to the SABR caplet smile, computed once per session."""
    from levyterm.calibration import calibrate_sabr_smile

    return calibrate_sabr_smile(model_kind=model_kind)
