"""Heston stochastic-volatility option pricing by Monte Carlo.

Exact (conditional-law) and discretised (Euler / Milstein full-truncation)
path simulation, pseudo and Sobol sampling, pathwise Delta/Rho estimators,
and a deterministic parallel engine with multi-run statistics.
"""

from .backend import BACKEND_NAME, get_backend
from .engine import greeks, price, run_experiment
from .errors import (BesselNonConvergence, ConfigInvalid, DofOutOfRange,
                     HestonError, InvalidParams, QuadratureNonConvergence,
                     RootNotBracketed, UnsupportedProduct, UsageError,
                     ValidationError)
from .model import (DEFAULT_PARAMS, GridSpec, HestonParams, McSummary,
                    OptionSpec, PathObservables, SimConfig)

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME", "get_backend",
    "price", "greeks", "run_experiment",
    "HestonParams", "OptionSpec", "GridSpec", "PathObservables",
    "SimConfig", "McSummary", "DEFAULT_PARAMS",
    "HestonError", "InvalidParams", "DofOutOfRange", "ConfigInvalid",
    "BesselNonConvergence", "QuadratureNonConvergence", "RootNotBracketed",
    "UnsupportedProduct", "ValidationError", "UsageError",
    "__version__",
]
