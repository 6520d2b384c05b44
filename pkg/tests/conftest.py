import numpy as np
import pytest

from hestonmc.model import DEFAULT_PARAMS, HestonParams, OptionSpec
from hestonmc.rng import inverse_normal_cdf, gamma_batch, stream_key, uniforms_at


@pytest.fixture(scope="session")
def params() -> HestonParams:
    """The benchmark parameter set used throughout the experiment tables."""
    return HestonParams(**DEFAULT_PARAMS)


@pytest.fixture(scope="session")
def euro_call() -> OptionSpec:
    return OptionSpec(style="european", right="call", strike=100.0,
                      maturity=1.0, spot=100.0)


@pytest.fixture(scope="session")
def asian_call() -> OptionSpec:
    return OptionSpec(style="asian_arithmetic", right="call", strike=100.0,
                      maturity=1.0, spot=100.0,
                      averaging_times=(0.25, 0.5, 0.75, 1.0))


def normal_block(seed: int, stream_index: int, n: int) -> np.ndarray:
    """n standard normals from one pseudo substream, vectorised."""
    key = stream_key(seed, stream_index)
    return inverse_normal_cdf(uniforms_at(key, 0, n))


def pytest_terminal_summary(terminalreporter):
    """Echo one line per acceptance criterion after the test run, outside
    output capture."""
    import sys

    mod = next((m for name, m in sys.modules.items()
                if name.rpartition(".")[2] == "test_acceptance"), None)
    lines = getattr(mod, "REPORT_LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def nccs_block(seed: int, dof: float, lam: float, n: int) -> np.ndarray:
    """n non-central chi-squared draws via the Gamma + shifted-normal
    decomposition, using independent per-draw substreams (vectorised
    mirror of rng.sample_nccs for moment tests)."""
    from hestonmc.rng import derive_keys, root_key, _uniform_keys

    keys = derive_keys(np.uint64(root_key(seed)),
                       np.arange(n, dtype=np.uint64))
    z_keys = derive_keys(keys, 0)
    g_keys = derive_keys(keys, 1)
    z = inverse_normal_cdf(_uniform_keys(z_keys, np.zeros(n, dtype=np.uint64)))
    g = gamma_batch(g_keys, 0.5 * (dof - 1.0), 2.0)
    s = z + np.sqrt(lam)
    return g + s * s
