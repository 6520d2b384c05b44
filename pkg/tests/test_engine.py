"""Engine orchestration: determinism, sampler rules, statistics, sweeps."""

import math

import numpy as np
import pytest

from hestonmc import engine
from hestonmc.errors import ConfigInvalid, UnsupportedProduct
from hestonmc.model import OptionSpec, SimConfig


def cfg(**kw) -> SimConfig:
    base = dict(scheme="milstein", sampler="pseudo", n_paths=8192,
                n_steps=32, n_runs=3, seed=42)
    base.update(kw)
    return SimConfig(**base)


class TestDeterminism:
    @pytest.mark.parametrize("scheme,steps,paths", [
        ("milstein", 32, 8192), ("exact", 1, 1024)])
    def test_bit_identical_across_parallelism(self, params, euro_call,
                                              scheme, steps, paths):
        a = engine.price(params, euro_call,
                         cfg(scheme=scheme, n_steps=steps, n_paths=paths,
                             max_parallelism=1))
        b = engine.price(params, euro_call,
                         cfg(scheme=scheme, n_steps=steps, n_paths=paths,
                             max_parallelism=8))
        assert a.per_run_values == b.per_run_values
        assert a.estimate == b.estimate

    def test_repeatable_across_calls(self, params, euro_call):
        a = engine.price(params, euro_call, cfg())
        b = engine.price(params, euro_call, cfg())
        assert a.per_run_values == b.per_run_values

    def test_single_pass_greeks_match_price(self, params, euro_call):
        g = engine.greeks(params, euro_call, cfg())
        p = engine.price(params, euro_call, cfg())
        assert g["price"].per_run_values == p.per_run_values


class TestSamplerRules:
    def test_sobol_discretised_needs_ack(self, params, euro_call):
        with pytest.raises(ConfigInvalid):
            cfg(sampler="sobol")
        c = cfg(sampler="sobol", sobol_highdim_ack=True, n_paths=512,
                n_steps=8)
        s = engine.price(params, euro_call, c)
        assert s.estimate > 0.0

    def test_sobol_dimension_accounting(self, params, euro_call, asian_call):
        assert engine.sobol_dimension(euro_call, cfg(scheme="exact")) == 3
        assert engine.sobol_dimension(asian_call, cfg(scheme="exact")) == 12
        assert engine.sobol_dimension(
            euro_call, cfg(sampler="sobol", sobol_highdim_ack=True,
                           n_steps=16)) == 32

    def test_sobol_runs_use_distinct_blocks(self, params, euro_call):
        c = cfg(scheme="exact", sampler="sobol", n_paths=256, n_steps=1,
                n_runs=4)
        s = engine.price(params, euro_call, c)
        assert len(set(s.per_run_values)) == 4


class TestStatistics:
    def test_summary_echoes_config(self, params, euro_call):
        s = engine.price(params, euro_call, cfg(n_runs=5))
        assert s.n_runs == 5 and s.n_paths == 8192
        assert len(s.per_run_values) == 5
        assert s.estimate == pytest.approx(np.mean(s.per_run_values))
        assert s.std_error == pytest.approx(
            np.std(s.per_run_values, ddof=1))
        assert s.wall_ms > 0.0

    def test_se_scaling_one_over_sqrt_n(self, params, euro_call):
        small = engine.price(params, euro_call,
                             cfg(n_paths=2000, n_steps=64, n_runs=30))
        large = engine.price(params, euro_call,
                             cfg(n_paths=8000, n_steps=64, n_runs=30))
        ratio = large.std_error / small.std_error
        assert 0.5 * 0.7 < ratio < 0.5 * 1.3

    def test_delta_approaches_discounted_forward_as_strike_vanishes(
            self, params):
        spec = OptionSpec(style="european", right="call", strike=1e-6,
                          maturity=1.0, spot=100.0)
        g = engine.greeks(params, spec, cfg(n_paths=20000, n_steps=64,
                                            n_runs=10))
        d = g["delta"]
        assert abs(d.estimate - 1.0) < 3.0 * d.std_error / math.sqrt(d.n_runs)

    def test_put_greeks_rejected(self, params):
        put = OptionSpec(style="european", right="put", strike=100.0,
                         maturity=1.0, spot=100.0)
        with pytest.raises(UnsupportedProduct):
            engine.greeks(params, put, cfg())


class TestRunExperiment:
    def test_empty_grid(self, params, euro_call):
        assert engine.run_experiment([], params, euro_call) == []

    def test_rows_echo_configs(self, params, euro_call):
        grid = [cfg(n_paths=1000, n_runs=2), cfg(n_paths=2000, n_runs=2)]
        rows = engine.run_experiment(grid, params, euro_call)
        assert [r["paths"] for r in rows] == [1000, 2000]
        assert all("price" in r["summaries"] for r in rows)

    def test_paths_sweep_shrinks_spread(self, params, euro_call):
        grid = [cfg(n_paths=n, n_steps=64, n_runs=20)
                for n in (2000, 32000)]
        rows = engine.run_experiment(grid, params, euro_call)
        assert (rows[1]["summaries"]["price"].std_error
                < rows[0]["summaries"]["price"].std_error)
