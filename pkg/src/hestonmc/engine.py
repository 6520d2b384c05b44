"""Monte Carlo / quasi-Monte Carlo orchestration: parallel path fan-out,
discounting, single-pass aggregation of price and pathwise Greeks, multi-run
statistics and timing.

Determinism contract: results are a pure function of (seed, inputs) and are
bit-identical across parallelism widths.  Paths are processed in fixed-size
chunks whose boundaries do not depend on the worker count; per-chunk sums use
numpy's fixed pairwise reduction and chunk sums are combined with math.fsum
in chunk order.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .backend import get_backend
from .errors import ConfigInvalid, UnsupportedProduct
from .model import GridSpec, HestonParams, McSummary, OptionSpec, SimConfig
from .rng import derive_key, root_key, sobol_points
from .schemes import averaging_indices

#: path-chunk size; fixed so that parallel width cannot change reductions
CHUNK = 4096

_PRICE, _DELTA, _RHO = 0, 1, 2


def exact_step_times(spec: OptionSpec) -> np.ndarray:
    """Exact-scheme step endpoints: one step per averaging interval for
    asians, a single [0, T] step for europeans."""
    if spec.is_asian:
        return np.concatenate([[0.0], np.asarray(spec.averaging_times)])
    return np.array([0.0, spec.maturity])


def sobol_dimension(spec: OptionSpec, config: SimConfig) -> int:
    """QMC dimension: 3 per exact step, 2 per discretised step."""
    if config.scheme == "exact":
        return 3 * (len(exact_step_times(spec)) - 1)
    return 2 * config.n_steps


def _per_path_stats(spec: OptionSpec, obs: np.ndarray, r: float,
                    want_greeks: bool) -> np.ndarray:
    """(n, 3) array of per-path discounted payoff, delta and rho."""
    disc = math.exp(-r * spec.maturity)
    s = obs[:, 1] if spec.is_asian else obs[:, 0]
    out = np.zeros((obs.shape[0], 3))
    if spec.right == "call":
        out[:, _PRICE] = disc * np.maximum(s - spec.strike, 0.0)
    else:
        out[:, _PRICE] = disc * np.maximum(spec.strike - s, 0.0)
    if want_greeks:
        itm = s > spec.strike
        out[:, _DELTA] = np.where(itm, disc * s / spec.spot, 0.0)
        if spec.is_asian:
            out[:, _RHO] = np.where(
                itm,
                disc * (obs[:, 2] - spec.maturity * (s - spec.strike)),
                0.0)
        else:
            out[:, _RHO] = np.where(itm, disc * spec.strike * spec.maturity,
                                    0.0)
    return out


def _simulate_chunk(backend, params: HestonParams, spec: OptionSpec,
                    config: SimConfig, key_run: int, lo: int, hi: int,
                    uniforms: np.ndarray | None) -> np.ndarray:
    u_chunk = None if uniforms is None else uniforms[lo:hi]
    if config.scheme == "exact":
        times = exact_step_times(spec)
        avg_flags = np.ones(len(times) - 1, dtype=np.int64) if spec.is_asian \
            else np.array([1], dtype=np.int64)
        return backend.exact_batch(params, spec.spot, times, avg_flags,
                                   lo, hi, key_run, u_chunk)
    grid = GridSpec(maturity=spec.maturity, n_steps=config.n_steps)
    if spec.is_asian:
        avg_idx = np.array(averaging_indices(grid, spec.averaging_times),
                           dtype=np.int64)
    else:
        avg_idx = np.array([config.n_steps], dtype=np.int64)
    return backend.discretised_batch(params, spec.spot, spec.maturity,
                                     config.n_steps,
                                     config.scheme == "milstein",
                                     lo, hi, key_run, u_chunk, avg_idx)


def _run_sums(backend, params, spec, config, run: int, pool,
              want_greeks: bool) -> list[float]:
    """Fixed-order per-run sums of [payoff, delta, rho] over all paths."""
    key_run = derive_key(root_key(config.seed), run)
    uniforms = None
    if config.sampler == "sobol":
        dim = sobol_dimension(spec, config)
        start = 1 + run * config.n_paths
        uniforms = sobol_points(dim, start, config.n_paths)
    bounds = list(range(0, config.n_paths, CHUNK)) + [config.n_paths]
    jobs = [(lo, hi) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]

    def work(job):
        lo, hi = job
        obs = _simulate_chunk(backend, params, spec, config, key_run, lo, hi,
                              uniforms)
        stats = _per_path_stats(spec, obs, params.r, want_greeks)
        return stats.sum(axis=0)

    if pool is None:
        partials = [work(j) for j in jobs]
    else:
        partials = list(pool.map(work, jobs))
    return [math.fsum(p[k] for p in partials) for k in range(3)]


def _validate(spec: OptionSpec, config: SimConfig, want_greeks: bool):
    if want_greeks and spec.right != "call":
        raise UnsupportedProduct("pathwise Greeks are derived for calls only")
    if config.scheme != "exact" and spec.is_asian:
        # raises ValidationError if any averaging date is off-grid
        grid = GridSpec(maturity=spec.maturity, n_steps=config.n_steps)
        averaging_indices(grid, spec.averaging_times)


def _summaries(config: SimConfig, runs: np.ndarray,
               wall_ms: list[float]) -> dict[str, McSummary]:
    out = {}
    wall_mean = float(np.mean(wall_ms))
    for k, name in ((_PRICE, "price"), (_DELTA, "delta"), (_RHO, "rho")):
        vals = runs[:, k]
        sd = float(np.std(vals, ddof=1)) if config.n_runs > 1 else 0.0
        out[name] = McSummary(estimate=float(np.mean(vals)), std_error=sd,
                              per_run_values=[float(v) for v in vals],
                              wall_ms=wall_mean, n_paths=config.n_paths,
                              n_runs=config.n_runs)
    return out


def _execute(params: HestonParams, spec: OptionSpec, config: SimConfig,
             want_greeks: bool) -> dict[str, McSummary]:
    _validate(spec, config, want_greeks)
    backend = get_backend()
    workers = config.workers()
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        runs = np.empty((config.n_runs, 3))
        wall = []
        for run in range(config.n_runs):
            t0 = time.perf_counter()
            sums = _run_sums(backend, params, spec, config, run, pool,
                             want_greeks)
            wall.append((time.perf_counter() - t0) * 1000.0)
            runs[run] = [s / config.n_paths for s in sums]
    finally:
        if pool is not None:
            pool.shutdown()
    return _summaries(config, runs, wall)


def price(params: HestonParams, spec: OptionSpec,
          config: SimConfig) -> McSummary:
    """Discounted-payoff estimate: per-run path average, summarised over runs."""
    return _execute(params, spec, config, want_greeks=False)["price"]


def greeks(params: HestonParams, spec: OptionSpec,
           config: SimConfig) -> dict[str, McSummary]:
    """Price plus pathwise Delta and Rho from one pass over the same paths."""
    return _execute(params, spec, config, want_greeks=True)


def run_experiment(grid: list[SimConfig], params: HestonParams,
                   spec: OptionSpec,
                   want_greeks: bool = False) -> list[dict]:
    """One result row per configuration (the Tables 2-7 sweep structure)."""
    rows = []
    for config in grid:
        res = _execute(params, spec, config, want_greeks)
        row = {"scheme": config.scheme, "sampler": config.sampler,
               "paths": config.n_paths, "steps": config.n_steps,
               "runs": config.n_runs, "summaries": res}
        rows.append(row)
    return rows
