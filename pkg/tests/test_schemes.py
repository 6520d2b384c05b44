"""Euler and Milstein (full truncation) steps and whole-path simulation."""

import math

import numpy as np
import pytest
from scipy.special import ndtr

from hestonmc.backend import get_backend
from hestonmc.errors import ValidationError
from hestonmc.model import DEFAULT_PARAMS, GridSpec, HestonParams
from hestonmc.rng import UniformStream, derive_key, root_key
from hestonmc.schemes import (PathState, euler_step, milstein_step,
                              simulate_path)

BACKEND = get_backend()


class _FixedStream(UniformStream):
    """Stream returning a fixed cycle of uniforms (for forced-normal tests)."""

    def __init__(self, values):
        super().__init__(kind="pseudo", seed=0)
        self._values = list(values)
        self._pos = 0

    def next_uniform(self) -> float:
        u = self._values[self._pos % len(self._values)]
        self._pos += 1
        return u


class TestForcedSteps:
    def test_euler_drift_only(self, params):
        state = PathState(s=100.0, v=0.02, t=0.0)
        out = euler_step(_FixedStream([0.5]), params, state, 0.25)
        assert out.s == pytest.approx(100.0 * math.exp((params.r - 0.01) * 0.25))
        assert out.v == pytest.approx(0.02 + params.kappa * (params.theta - 0.02) * 0.25)
        assert out.t == 0.25

    def test_milstein_drift_only_has_correction(self, params):
        state = PathState(s=100.0, v=0.02, t=0.0)
        out = milstein_step(_FixedStream([0.5]), params, state, 0.25)
        expected_v = (0.02 + params.kappa * (params.theta - 0.02) * 0.25
                      - 0.25 * params.sigma ** 2 * 0.25)
        assert out.v == pytest.approx(max(expected_v, 0.0))

    def test_milstein_equals_euler_when_z2_is_one(self):
        # rho = 0 makes Z2 = Zb; u2 = ndtr(1) forces Z2 = 1, where the
        # Milstein correction (Z2^2 - 1) vanishes
        p = HestonParams(**{**DEFAULT_PARAMS, "rho": 0.0})
        state = PathState(s=100.0, v=0.02, t=0.0)
        us = [0.31, float(ndtr(1.0))]
        a = euler_step(_FixedStream(us), p, state, 0.125)
        b = milstein_step(_FixedStream(us), p, state, 0.125)
        assert a.s == b.s
        assert a.v == pytest.approx(b.v, rel=1e-12)

    def test_truncation_clamps_to_zero(self):
        # v = 0 kills the diffusion term; with small theta the Milstein
        # -sigma^2 dt/4 correction drives the update negative and must clamp
        p = HestonParams(**{**DEFAULT_PARAMS, "theta": 0.001})
        state = PathState(s=100.0, v=0.0, t=0.0)
        out = milstein_step(_FixedStream([0.5]), p, state, 0.25)
        assert out.v == 0.0
        assert out.s > 0.0


class TestPathProperties:
    def test_variance_nonnegative_under_stress(self):
        p = HestonParams(kappa=2.0, theta=0.01, sigma=2.0, rho=-0.5,
                         r=0.0, v0=1e-6)
        stream = UniformStream(seed=99)
        state = PathState(s=100.0, v=1e-6, t=0.0)
        for _ in range(20_000):
            state = milstein_step(stream, p, state, 1.0 / 128)
            assert state.v >= 0.0
            assert state.s > 0.0

    def test_schemes_agree_as_vol_of_vol_vanishes(self):
        p = HestonParams(**{**DEFAULT_PARAMS, "sigma": 1e-8})
        grid = GridSpec(maturity=1.0, n_steps=32)
        for i in range(50):
            a = simulate_path(UniformStream(seed=4, stream_index=i), p, grid,
                              "euler", 100.0)
            b = simulate_path(UniformStream(seed=4, stream_index=i), p, grid,
                              "milstein", 100.0)
            assert a.s_T == pytest.approx(b.s_T, rel=1e-6)

    def test_terminal_date_average_equals_european(self, params):
        grid = GridSpec(maturity=1.0, n_steps=16)
        a = simulate_path(UniformStream(seed=8), params, grid, "milstein",
                          100.0, averaging_times=(1.0,))
        b = simulate_path(UniformStream(seed=8), params, grid, "milstein",
                          100.0)
        assert a.avg == b.s_T == b.avg
        assert a.tw_sum == pytest.approx(a.s_T * 1.0)

    def test_off_grid_averaging_date_rejected(self, params):
        grid = GridSpec(maturity=1.0, n_steps=16)
        with pytest.raises(ValidationError):
            simulate_path(UniformStream(seed=8), params, grid, "milstein",
                          100.0, averaging_times=(0.3,))

    def test_single_drift_step_terminal(self, params):
        grid = GridSpec(maturity=1.0, n_steps=1)
        out = simulate_path(_FixedStream([0.5]), params, grid, "euler", 100.0)
        assert out.s_T == pytest.approx(
            100.0 * math.exp(params.r - 0.5 * params.v0))

    @pytest.mark.parametrize("milstein", [False, True])
    def test_martingale_32k_paths(self, params, milstein):
        kr = int(derive_key(root_key(13), 0))
        obs = BACKEND.discretised_batch(params, 100.0, 1.0, 128, milstein,
                                        0, 32_000, kr, None,
                                        np.array([128], dtype=np.int64))
        disc = math.exp(-params.r) * obs[:, 0]
        se = disc.std(ddof=1) / math.sqrt(disc.size)
        assert abs(disc.mean() - 100.0) < 3.0 * se

    def test_unknown_scheme_rejected(self, params):
        grid = GridSpec(maturity=1.0, n_steps=4)
        with pytest.raises(ValidationError):
            simulate_path(UniformStream(seed=1), params, grid, "heun", 100.0)
