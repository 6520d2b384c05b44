"""Payoff evaluation and pathwise Greek estimators.

Pathwise Delta and Rho are derived for calls only (the put analogues would
need the mirrored indicator and are a documented extension, not implemented).
The indicator at equality S = K contributes 0.

The Asian Rho estimator is the r-derivative of the discounted Asian payoff,

    e^{-rT} 1{avg > K} * ( (1/N) sum_i S_{t_i} t_i - T (avg - K) ),

combining the discount-factor term with the pathwise rate sensitivity of each
averaging-date price.
"""

from __future__ import annotations

import math

from .errors import UnsupportedProduct
from .model import OptionSpec, PathObservables


def payoff(spec: OptionSpec, obs: PathObservables) -> float:
    """Undiscounted payoff of one path."""
    s = obs.avg if spec.is_asian else obs.s_T
    if spec.right == "call":
        return max(s - spec.strike, 0.0)
    return max(spec.strike - s, 0.0)


def pathwise_delta(spec: OptionSpec, obs: PathObservables, r: float) -> float:
    """Per-path Delta contribution, e^{-rT} * (S/S0) * 1{S > K} with S the
    terminal price (european) or the running average (asian)."""
    _require_call(spec)
    s = obs.avg if spec.is_asian else obs.s_T
    if s <= spec.strike:
        return 0.0
    return math.exp(-r * spec.maturity) * s / spec.spot


def pathwise_rho(spec: OptionSpec, obs: PathObservables, r: float) -> float:
    """Per-path Rho (d price / d r) contribution."""
    _require_call(spec)
    disc = math.exp(-r * spec.maturity)
    if spec.is_asian:
        if obs.avg <= spec.strike:
            return 0.0
        return disc * (obs.tw_sum - spec.maturity * (obs.avg - spec.strike))
    if obs.s_T <= spec.strike:
        return 0.0
    return disc * spec.strike * spec.maturity


def _require_call(spec: OptionSpec):
    if spec.right != "call":
        raise UnsupportedProduct(
            "pathwise Greeks are derived for calls only; put support is a "
            "documented extension")
