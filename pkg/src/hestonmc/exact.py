"""Broadie-Kaya exact one-step transition of (S, V) over an interval.

Each step consumes exactly three logical draws from the main stream (variance
transition normal, integrated-variance inversion uniform, terminal normal),
so a dimension-3 Sobol stream drives one European step.  The open-ended Gamma
rejection loop inside the variance transition draws from a dedicated pseudo
substream, never from QMC coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParams
from .ivlaw import IntegratedVarianceLaw
from .model import HestonParams
from .rng import (NccsParams, UniformStream, inverse_normal_cdf, sample_gamma,
                  sample_normal)


def nccs_coefficients(params: HestonParams, dt: float,
                      v_u: float) -> tuple[float, float]:
    """(scale c, noncentrality lambda) of the variance transition
    v_t = c * chi'2_d(lambda)."""
    if dt <= 0.0:
        raise InvalidParams(f"dt must be > 0, got {dt}")
    kappa, sigma = params.kappa, params.sigma
    ek = math.exp(-kappa * dt)
    c = sigma * sigma * (1.0 - ek) / (4.0 * kappa)
    lam = 4.0 * kappa * ek * v_u / (sigma * sigma * (1.0 - ek))
    return c, lam


def variance_transition(stream: UniformStream, params: HestonParams,
                        v_u: float, dt: float,
                        gamma_stream: UniformStream | None = None) -> float:
    """Sample v_t given v_u from the scaled non-central chi-squared law.

    Consumes one draw from `stream` (the shifted normal); the Gamma part
    comes from `gamma_stream` when given, else from `stream`.
    """
    c, lam = nccs_coefficients(params, dt, v_u)
    p = NccsParams(dof=params.dof, noncentrality=lam)
    z = sample_normal(stream)
    g = sample_gamma(gamma_stream if gamma_stream is not None else stream,
                     0.5 * (p.dof - 1.0), 2.0)
    s = z + math.sqrt(lam)
    return c * (g + s * s)


@dataclass(frozen=True)
class ExactStepResult:
    s_t: float
    v_t: float
    integrated_variance: float


def exact_step(stream: UniformStream, params: HestonParams, s_u: float,
               v_u: float, dt: float,
               gamma_stream: UniformStream | None = None) -> ExactStepResult:
    """One exact transition of (S, V) over [u, u+dt].

    Steps: (1) variance transition, (2) integrated variance by CDF inversion,
    (3) recover int sqrt(V) dW2 = (v_t - v_u - kappa*theta*dt + kappa*iv)/sigma,
    (4) ln S_t gaussian with mean ln s_u + r dt - iv/2 + rho * intW2 and
    variance (1 - rho^2) * iv.  Three logical draws from `stream`.
    """
    if s_u <= 0.0:
        raise InvalidParams(f"s_u must be > 0, got {s_u}")
    v_t = variance_transition(stream, params, v_u, dt, gamma_stream)
    law = IntegratedVarianceLaw(params, v_u, v_t, dt)
    u_iv = stream.next_uniform()
    iv = law.inverse_cdf(u_iv)
    if law.is_point_mass:
        # vanishing vol-of-vol: the endpoint identity below degenerates to
        # 0/0, but int sqrt(V) dW2 is exactly N(0, iv) in this limit, so
        # draw it from the same logical uniform (iv no longer needs it)
        int_w2 = math.sqrt(iv) * float(inverse_normal_cdf(u_iv))
    else:
        int_w2 = (v_t - v_u - params.kappa * params.theta * dt
                  + params.kappa * iv) / params.sigma
    mean_ln = (math.log(s_u) + params.r * dt - 0.5 * iv
               + params.rho * int_w2)
    var_ln = (1.0 - params.rho * params.rho) * iv
    z = sample_normal(stream)
    s_t = math.exp(mean_ln + math.sqrt(max(var_ln, 0.0)) * z)
    return ExactStepResult(s_t=s_t, v_t=v_t, integrated_variance=iv)
