"""Pricing path-dependent payoffs from market prices with truncated signatures."""

from .calibrate import (
    ImpliedExpectedSignature,
    PayoffFunctional,
    Regularization,
    SignatureBasis,
    fit_implied_signature,
    fit_payoff_functional,
    fit_payoff_functionals,
    price_payoff,
)
from .leadlag import LeadLagPath, PricePath, lead_lag
from .models import Market, market_prices, sample_paths
from .payoffs import Kind, Payoff, build_families, build_family
from .signature import lead_lag_signatures, sig_path
from .tensor import LinearFunctional, TruncatedTensor, pair, shuffle, tensor_mul

__version__ = "0.1.0"
