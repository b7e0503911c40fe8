"""Caps and floors on compositions of LIBOR rates under time-inhomogeneous Lévy
term-structure models: forward-rate (HJM) and forward-price models, Fourier
pricing, a Monte Carlo oracle and smile calibration."""

from .calibration import (CalibrationResult, CapletMarket, ModelTemplate, SabrMark, SmilePoint, bachelier_price,
                          calibrate, implied_black_vol, implied_normal_vol, sabr_normal_vol, smile_report)
from .composition import CompositionSpec, TenorStructure
from .curve import DiscountCurve
from .errors import (ConfigError, InfeasibleStripError, LevyTermError, NoSolutionError, PlanError,
                     QuadratureError, StripError)
from .forward_price import ForwardPriceModel, ForwardVolatility, FpStripBound
from .forward_rate import HjmModel, HjmStripBounds, HoLeeVolatility, TabulatedVolatility, VasicekVolatility
from .fourier import (PriceResult, PricingRequest, QuadratureSettings, StrikeGridPricer, call_transform,
                      gaussian_cap_price, price_cap, price_caplet, price_floor)
from .levy import (NIG, Brownian, ExponentialMomentBound, LevyModel, char_function, cumulant,
                   integrated_cumulant, validate_em)
from .montecarlo import (DiscretisedComposition, McEstimate, SimulationPlan, composition_plan,
                         mc_martingale_report, mc_mgf, mc_price, mc_prices, simulate_increments)

__all__ = [
    "bachelier_price", "Brownian", "calibrate", "CalibrationResult", "call_transform", "CapletMarket",
    "char_function", "composition_plan", "CompositionSpec", "ConfigError", "cumulant", "DiscountCurve",
    "DiscretisedComposition", "ExponentialMomentBound", "ForwardPriceModel", "ForwardVolatility", "FpStripBound",
    "gaussian_cap_price", "HjmModel", "HjmStripBounds", "HoLeeVolatility", "implied_black_vol", "implied_normal_vol",
    "InfeasibleStripError", "integrated_cumulant", "LevyModel", "LevyTermError", "mc_martingale_report", "mc_mgf",
    "mc_price", "mc_prices", "McEstimate", "ModelTemplate", "NIG", "NoSolutionError", "PlanError", "price_cap",
    "price_caplet", "price_floor", "PriceResult", "PricingRequest", "QuadratureError", "QuadratureSettings",
    "sabr_normal_vol", "SabrMark", "simulate_increments", "SimulationPlan", "smile_report", "SmilePoint",
    "StrikeGridPricer", "StripError", "TabulatedVolatility", "TenorStructure", "validate_em", "VasicekVolatility",
]

__version__ = "0.1.0"
