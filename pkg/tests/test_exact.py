"""Exact one-step transition of (S, V): variance transition, integrated
variance, and the conditional lognormal asset draw."""

import math

import numpy as np
import pytest
from scipy import stats

from hestonmc import _batch_py
from hestonmc.backend import get_backend
from hestonmc.errors import InvalidParams
from hestonmc.exact import (ExactStepResult, exact_step, nccs_coefficients,
                            variance_transition)
from hestonmc.model import DEFAULT_PARAMS, HestonParams
from hestonmc.rng import (UniformStream, derive_key, gamma_batch, derive_keys,
                          inverse_normal_cdf, root_key, _uniform_keys)

BACKEND = get_backend()


def variance_transition_block(params, v_u: float, dt: float, seed: int,
                              n: int) -> np.ndarray:
    """Vectorised mirror of variance_transition for moment tests."""
    c, lam = nccs_coefficients(params, dt, v_u)
    keys = derive_keys(np.uint64(root_key(seed)), np.arange(n, dtype=np.uint64))
    z = inverse_normal_cdf(_uniform_keys(derive_keys(keys, 0),
                                         np.zeros(n, dtype=np.uint64)))
    g = gamma_batch(derive_keys(keys, 1), 0.5 * (params.dof - 1.0), 2.0)
    s = z + math.sqrt(lam)
    return c * (g + s * s)


class TestVarianceTransition:
    def test_mean_matches_cir_conditional_mean(self, params):
        v = variance_transition_block(params, 0.010201, 1.0, seed=7, n=1_000_000)
        expected = params.theta + (0.010201 - params.theta) * math.exp(-params.kappa)
        assert abs(v.mean() - expected) / expected < 0.005

    def test_tiny_dt_stays_near_start(self, params):
        v = variance_transition_block(params, 0.010201, 1e-8, seed=8, n=20_000)
        near = np.abs(v - 0.010201) < 1e-4
        assert near.mean() > 0.999

    def test_zero_start_is_valid(self, params):
        v = variance_transition_block(params, 0.0, 0.5, seed=9, n=10_000)
        assert np.all(v >= 0.0)

    def test_scalar_api(self, params):
        s = UniformStream(seed=3)
        v = variance_transition(s, params, 0.010201, 1.0)
        assert v >= 0.0

    def test_rejects_bad_dt(self, params):
        with pytest.raises(InvalidParams):
            nccs_coefficients(params, 0.0, 0.01)


class TestExactStep:
    def test_draw_budget_is_three(self, params):
        main = UniformStream(seed=5)
        gamma = UniformStream(seed=5, stream_index=1)
        exact_step(main, params, 100.0, 0.010201, 1.0, gamma_stream=gamma)
        assert main._counter == 3

    def test_result_fields(self, params):
        res = exact_step(UniformStream(seed=6), params, 100.0, 0.010201, 1.0)
        assert isinstance(res, ExactStepResult)
        assert res.s_t > 0.0 and res.v_t >= 0.0 and res.integrated_variance > 0.0

    def test_rejects_nonpositive_spot(self, params):
        with pytest.raises(InvalidParams):
            exact_step(UniformStream(seed=6), params, 0.0, 0.01, 1.0)

    def test_martingale(self, params):
        # discounted terminal mean over 10^5 exact paths equals S0 within 3 SE
        kr = int(derive_key(root_key(11), 0))
        times = np.array([0.0, 1.0])
        flags = np.array([1], dtype=np.int64)
        obs = BACKEND.exact_batch(params, 100.0, times, flags, 0, 100_000,
                                  kr, None)
        disc = math.exp(-params.r * 1.0) * obs[:, 0]
        se = disc.std(ddof=1) / math.sqrt(disc.size)
        assert abs(disc.mean() - 100.0) < 3.0 * se

    def test_composability_across_partitions(self, params):
        # one step over [0,1] vs two steps over [0,.5],[.5,1]: same S_T law
        kr1 = int(derive_key(root_key(21), 0))
        kr2 = int(derive_key(root_key(22), 0))
        one = BACKEND.exact_batch(params, 100.0, np.array([0.0, 1.0]),
                                  np.array([1], dtype=np.int64),
                                  0, 50_000, kr1, None)[:, 0]
        two = BACKEND.exact_batch(params, 100.0, np.array([0.0, 0.5, 1.0]),
                                  np.array([0, 1], dtype=np.int64),
                                  0, 50_000, kr2, None)[:, 0]
        assert stats.ks_2samp(one, two).pvalue > 0.01

    def test_integrated_variance_identity(self, params):
        # step 3 identity: int sqrt(V) dW2 recovered from endpoints and iv
        res = exact_step(UniformStream(seed=30), params, 100.0, 0.010201, 1.0)
        int_w2 = (res.v_t - 0.010201 - params.kappa * params.theta * 1.0
                  + params.kappa * res.integrated_variance) / params.sigma
        assert math.isfinite(int_w2)
