"""Black-Scholes pricing under pure time-dependent arbitrage bubbles."""
from .analytic import (ContractSpec, OptionKind, bs_derivative, bs_price, price_dilation,
                       price_effective_rate, price_strike_shift)
from .errors import (BubbleError, InputError, NumericalError, OutOfRange, PoleProximity,
                     StrikeShiftUnsupported, TruncationNotConverged, ValidationError)
from .market import (BubbleProfile, BubbleSegment, MarketParams, PotentialProfile, arbitrage_number,
                     effective_rate, potential_of_amplitude, potential_profile)
from .montecarlo import McConfig, McEstimate, mc_price, terminal_samples
from .pde import GridConfig, PriceSurface, solve_pde
from .qpoly import alpha, q_poly, series_weights
from .series import SeriesResult, price_series

__version__ = "0.1.0"

__all__ = [
    "ContractSpec",
    "OptionKind",
    "bs_derivative",
    "bs_price",
    "price_dilation",
    "price_effective_rate",
    "price_strike_shift",
    "BubbleError",
    "InputError",
    "NumericalError",
    "OutOfRange",
    "PoleProximity",
    "StrikeShiftUnsupported",
    "TruncationNotConverged",
    "ValidationError",
    "BubbleProfile",
    "BubbleSegment",
    "MarketParams",
    "PotentialProfile",
    "arbitrage_number",
    "effective_rate",
    "potential_of_amplitude",
    "potential_profile",
    "McConfig",
    "McEstimate",
    "mc_price",
    "terminal_samples",
    "GridConfig",
    "PriceSurface",
    "solve_pde",
    "alpha",
    "q_poly",
    "series_weights",
    "SeriesResult",
    "price_series",
]
