"""Discretised path generation: Euler and Milstein (full truncation) steps on
a uniform time grid.

Both schemes update the asset multiplicatively (log-Euler exponential form)
and consume exactly two normals per step, ordered (Z1 asset, Z2 variance), so
a shared stream yields pathwise-coupled scheme comparisons.  The stored
variance is clamped at zero after every update and the clamped value feeds
the next step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParams, ValidationError
from .model import GridSpec, HestonParams, PathObservables
from .rng import UniformStream, correlated_pair


@dataclass(frozen=True)
class PathState:
    s: float
    v: float
    t: float


def _asset_update(params: HestonParams, s: float, v: float, dt: float,
                  z1: float) -> float:
    return s * math.exp((params.r - 0.5 * v) * dt + math.sqrt(v * dt) * z1)


def euler_step(stream: UniformStream, params: HestonParams, state: PathState,
               dt: float) -> PathState:
    """Full-truncation Euler step; two normals from `stream`."""
    if dt <= 0.0:
        raise InvalidParams(f"dt must be > 0, got {dt}")
    z1, z2 = correlated_pair(stream, params.rho)
    s, v = state.s, state.v
    s_new = _asset_update(params, s, v, dt, z1)
    v_new = v + params.kappa * (params.theta - v) * dt \
        + params.sigma * math.sqrt(v * dt) * z2
    return PathState(s=s_new, v=max(v_new, 0.0), t=state.t + dt)


def milstein_step(stream: UniformStream, params: HestonParams,
                  state: PathState, dt: float) -> PathState:
    """Milstein step: Euler plus the variance correction sigma^2 dt (Z2^2-1)/4.

    The asset update carries no correction term (its log-diffusion has zero
    state derivative).
    """
    if dt <= 0.0:
        raise InvalidParams(f"dt must be > 0, got {dt}")
    z1, z2 = correlated_pair(stream, params.rho)
    s, v = state.s, state.v
    s_new = _asset_update(params, s, v, dt, z1)
    v_new = v + params.kappa * (params.theta - v) * dt \
        + params.sigma * math.sqrt(v * dt) * z2 \
        + 0.25 * params.sigma * params.sigma * dt * (z2 * z2 - 1.0)
    return PathState(s=s_new, v=max(v_new, 0.0), t=state.t + dt)


_STEP_FNS = {"euler": euler_step, "milstein": milstein_step}


def averaging_indices(grid: GridSpec, averaging_times: tuple[float, ...]) -> list[int]:
    """Grid indices of the averaging dates; errors if any date is off-grid."""
    return [grid.index_of(t) for t in averaging_times]


def simulate_path(stream: UniformStream, params: HestonParams, grid: GridSpec,
                  scheme: str, s0: float,
                  averaging_times: tuple[float, ...] = ()) -> PathObservables:
    """Simulate one path from (s0, v0) and accumulate the observables needed
    by payoffs and pathwise Greeks.

    With no averaging dates the path is European: avg = s_T and the
    time-weighted sum uses the single date T.
    """
    if scheme not in _STEP_FNS:
        raise ValidationError(f"unknown discretisation scheme {scheme!r}")
    step_fn = _STEP_FNS[scheme]
    avg_idx = set(averaging_indices(grid, averaging_times)) if averaging_times \
        else {grid.n_steps}
    state = PathState(s=s0, v=params.v0, t=0.0)
    dt = grid.dt
    n_dates = len(avg_idx)
    price_sum = 0.0
    tw_sum = 0.0
    for k in range(1, grid.n_steps + 1):
        state = step_fn(stream, params, state, dt)
        if k in avg_idx:
            t_k = k * grid.maturity / grid.n_steps
            price_sum += state.s
            tw_sum += state.s * t_k
    return PathObservables(s_T=state.s, avg=price_sum / n_dates,
                           tw_sum=tw_sum / n_dates)
