"""Pure-python (numpy) batch path simulators: the fallback backend.

Both backends share one contract:

* per-run key: key_run = derive(root(seed), run)
* per-path keys: key_path = derive(key_run, path), main = derive(key_path, 0),
  gamma for step s = derive(derive(key_path, 1), s)
* pseudo draws: main-stream draw j for a discretised step s is index 2*s+j,
  for an exact step 3*s+j
* sobol mode: the caller supplies a (chunk, dims) uniform block that replaces
  the main stream; the gamma substream stays pseudo.

Outputs land in a (chunk, 3) float64 array: terminal price, arithmetic mean
over averaging dates, and the time-weighted mean (1/N) sum S_{t_i} t_i.
"""

from __future__ import annotations

import math

import numpy as np

from .ivlaw import IntegratedVarianceLaw
from .model import HestonParams
from .rng import (_uniform_keys, derive_keys, gamma_batch, inverse_normal_cdf)

BACKEND_NAME = "python"
_U64 = np.uint64


def _main_uniform(main_keys: np.ndarray, draw_index: int) -> np.ndarray:
    ctr = np.full(main_keys.shape, draw_index, dtype=np.uint64)
    return _uniform_keys(main_keys, ctr)


def discretised_batch(params: HestonParams, s0: float, T: float, n_steps: int,
                      milstein: bool, path_lo: int, path_hi: int,
                      key_run: int, uniforms: np.ndarray | None,
                      avg_indices: np.ndarray) -> np.ndarray:
    """Euler/Milstein paths for the half-open path range [path_lo, path_hi)."""
    n = path_hi - path_lo
    paths = np.arange(path_lo, path_hi, dtype=np.uint64)
    main_keys = derive_keys(derive_keys(_U64(key_run), paths), 0)
    kappa, theta, sigma, rho, r = (params.kappa, params.theta, params.sigma,
                                   params.rho, params.r)
    dt = T / n_steps
    sq_onemr2 = math.sqrt(1.0 - rho * rho)
    avg_set = set(int(k) for k in avg_indices)
    n_dates = len(avg_set)

    s = np.full(n, s0)
    v = np.full(n, params.v0)
    price_sum = np.zeros(n)
    tw_sum = np.zeros(n)
    for k in range(1, n_steps + 1):
        step = k - 1
        if uniforms is None:
            u1 = _main_uniform(main_keys, 2 * step)
            u2 = _main_uniform(main_keys, 2 * step + 1)
        else:
            u1 = uniforms[:, 2 * step]
            u2 = uniforms[:, 2 * step + 1]
        z_a = inverse_normal_cdf(u1)
        z_b = inverse_normal_cdf(u2)
        z1 = z_a
        z2 = rho * z_a + sq_onemr2 * z_b
        sqv = np.sqrt(v * dt)
        s = s * np.exp((r - 0.5 * v) * dt + sqv * z1)
        v_new = v + kappa * (theta - v) * dt + sigma * sqv * z2
        if milstein:
            v_new = v_new + 0.25 * sigma * sigma * dt * (z2 * z2 - 1.0)
        v = np.maximum(v_new, 0.0)
        if k in avg_set:
            t_k = k * T / n_steps
            price_sum += s
            tw_sum += s * t_k
    out = np.empty((n, 3))
    out[:, 0] = s
    out[:, 1] = price_sum / n_dates
    out[:, 2] = tw_sum / n_dates
    return out


def exact_batch(params: HestonParams, s0: float, step_times: np.ndarray,
                avg_flags: np.ndarray, path_lo: int, path_hi: int,
                key_run: int, uniforms: np.ndarray | None) -> np.ndarray:
    """Broadie-Kaya paths stepping through `step_times` (starting at 0).

    avg_flags[i] marks whether step i's endpoint is an averaging date.
    """
    n = path_hi - path_lo
    n_steps = len(step_times) - 1
    paths = np.arange(path_lo, path_hi, dtype=np.uint64)
    key_paths = derive_keys(_U64(key_run), paths)
    main_keys = derive_keys(key_paths, 0)
    gamma_roots = derive_keys(key_paths, 1)
    kappa, theta, sigma, rho, r = (params.kappa, params.theta, params.sigma,
                                   params.rho, params.r)
    dof = params.dof
    sq_onemr2 = math.sqrt(1.0 - rho * rho)
    n_dates = int(np.sum(avg_flags))

    ln_s = np.full(n, math.log(s0))
    v = np.full(n, params.v0)
    price_sum = np.zeros(n)
    tw_sum = np.zeros(n)
    for step in range(n_steps):
        dt = step_times[step + 1] - step_times[step]
        if uniforms is None:
            u1 = _main_uniform(main_keys, 3 * step)
            u2 = _main_uniform(main_keys, 3 * step + 1)
            u3 = _main_uniform(main_keys, 3 * step + 2)
        else:
            u1 = uniforms[:, 3 * step]
            u2 = uniforms[:, 3 * step + 1]
            u3 = uniforms[:, 3 * step + 2]
        # variance transition: c * (Gamma((d-1)/2, 2) + (Z + sqrt(lam))^2)
        ek = math.exp(-kappa * dt)
        c = sigma * sigma * (1.0 - ek) / (4.0 * kappa)
        lam = 4.0 * kappa * ek * v / (sigma * sigma * (1.0 - ek))
        z1 = inverse_normal_cdf(u1)
        g = gamma_batch(derive_keys(gamma_roots, step), 0.5 * (dof - 1.0), 2.0)
        shifted = z1 + np.sqrt(lam)
        v_new = c * (g + shifted * shifted)
        # integrated variance by per-path CDF inversion
        iv = np.empty(n)
        for i in range(n):
            law = IntegratedVarianceLaw(params, float(v[i]), float(v_new[i]), dt)
            iv[i] = law.inverse_cdf(float(u2[i]))
        if sigma < 1e-4 * kappa:
            # vanishing vol-of-vol: iv is a point mass and the endpoint
            # identity degenerates; int sqrt(V) dW2 is N(0, iv) in the limit
            int_w2 = np.sqrt(iv) * inverse_normal_cdf(u2)
        else:
            int_w2 = (v_new - v - kappa * theta * dt + kappa * iv) / sigma
        z3 = inverse_normal_cdf(u3)
        ln_s = ln_s + r * dt - 0.5 * iv + rho * int_w2 \
            + np.sqrt(np.maximum((1.0 - rho * rho) * iv, 0.0)) * z3
        v = v_new
        if avg_flags[step]:
            s_now = np.exp(ln_s)
            price_sum += s_now
            tw_sum += s_now * step_times[step + 1]
    out = np.empty((n, 3))
    out[:, 0] = np.exp(ln_s)
    out[:, 1] = price_sum / n_dates
    out[:, 2] = tw_sum / n_dates
    return out
