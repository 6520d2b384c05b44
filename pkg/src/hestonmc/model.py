"""Core model and configuration types shared by all modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigInvalid, InvalidParams, ValidationError


@dataclass(frozen=True)
class HestonParams:
    """Heston model constants.

    kappa: mean-reversion speed (1/year)
    theta: long-run variance level
    sigma: volatility of variance
    rho:   correlation between the asset and variance Brownian drivers
    r:     risk-free rate (1/year)
    v0:    initial variance
    """

    kappa: float
    theta: float
    sigma: float
    rho: float
    r: float
    v0: float

    def __post_init__(self):
        if not (self.kappa > 0.0):
            raise InvalidParams(f"kappa must be > 0, got {self.kappa}")
        if not (self.theta > 0.0):
            raise InvalidParams(f"theta must be > 0, got {self.theta}")
        if not (self.sigma > 0.0):
            raise InvalidParams(f"sigma must be > 0, got {self.sigma}")
        if not (-1.0 <= self.rho <= 1.0):
            raise InvalidParams(f"rho must lie in [-1, 1], got {self.rho}")
        if self.v0 < 0.0:
            raise InvalidParams(f"v0 must be >= 0, got {self.v0}")

    @property
    def dof(self) -> float:
        """Degrees of freedom of the variance transition, 4*kappa*theta/sigma^2."""
        return 4.0 * self.kappa * self.theta / (self.sigma * self.sigma)


#: Parameter set used throughout the benchmark experiments.
DEFAULT_PARAMS = dict(
    kappa=6.21, theta=0.019, sigma=0.61, rho=-0.7, r=0.0319, v0=0.010201
)


@dataclass(frozen=True)
class OptionSpec:
    """Product definition: European or arithmetic-average Asian call/put."""

    style: str  # "european" | "asian_arithmetic"
    right: str  # "call" | "put"
    strike: float
    maturity: float
    spot: float
    averaging_times: tuple[float, ...] = ()

    def __post_init__(self):
        if self.style not in ("european", "asian_arithmetic"):
            raise ValidationError(f"unknown option style {self.style!r}")
        if self.right not in ("call", "put"):
            raise ValidationError(f"unknown option right {self.right!r}")
        for name, val in (("strike", self.strike), ("maturity", self.maturity),
                          ("spot", self.spot)):
            if not (val > 0.0):
                raise ValidationError(f"{name} must be > 0, got {val}")
        if self.style == "asian_arithmetic":
            ts = self.averaging_times
            if not ts:
                raise ValidationError("asian option needs averaging_times")
            if any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])):
                raise ValidationError("averaging_times must be strictly increasing")
            if ts[0] <= 0.0 or ts[-1] > self.maturity + 1e-12:
                raise ValidationError("averaging_times must lie in (0, maturity]")
        elif self.averaging_times:
            raise ValidationError("averaging_times only apply to asian options")

    @property
    def is_asian(self) -> bool:
        return self.style == "asian_arithmetic"


@dataclass(frozen=True)
class GridSpec:
    """Uniform time grid, t_k = k*T/n_steps."""

    maturity: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValidationError(f"n_steps must be >= 1, got {self.n_steps}")
        if not (self.maturity > 0.0):
            raise ValidationError(f"maturity must be > 0, got {self.maturity}")

    @property
    def dt(self) -> float:
        return self.maturity / self.n_steps

    def times(self) -> list[float]:
        return [k * self.maturity / self.n_steps for k in range(self.n_steps + 1)]

    def index_of(self, t: float) -> int:
        """Grid index of an averaging date; errors if the date is off-grid."""
        k = round(t * self.n_steps / self.maturity)
        if not math.isclose(k * self.maturity / self.n_steps, t, rel_tol=1e-9,
                            abs_tol=1e-12) or not (1 <= k <= self.n_steps):
            raise ValidationError(
                f"averaging date {t} does not fall on the simulation grid "
                f"(T={self.maturity}, n_steps={self.n_steps})")
        return k


@dataclass(frozen=True)
class PathObservables:
    """Per-path outputs needed by payoffs and pathwise Greeks.

    s_T:    terminal asset price
    avg:    arithmetic mean over the averaging dates (= s_T for european)
    tw_sum: (1/N) * sum_i S_{t_i} * t_i, the time-weighted average used by
            the Asian Rho estimator
    """

    s_T: float
    avg: float
    tw_sum: float


SCHEMES = ("exact", "euler", "milstein")
SAMPLERS = ("pseudo", "sobol")


@dataclass(frozen=True)
class SimConfig:
    """Engine settings for one Monte Carlo experiment."""

    scheme: str = "exact"
    sampler: str = "pseudo"
    n_paths: int = 2048
    n_steps: int = 128
    n_runs: int = 30
    seed: int = 0
    max_parallelism: int | str = "auto"
    sobol_highdim_ack: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigInvalid(f"unknown scheme {self.scheme!r}")
        if self.sampler not in SAMPLERS:
            raise ConfigInvalid(f"unknown sampler {self.sampler!r}")
        if self.n_paths < 1:
            raise ConfigInvalid(f"n_paths must be >= 1, got {self.n_paths}")
        if self.n_steps < 1:
            raise ConfigInvalid(f"n_steps must be >= 1, got {self.n_steps}")
        if self.n_runs < 1:
            raise ConfigInvalid(f"n_runs must be >= 1, got {self.n_runs}")
        if self.sampler == "sobol" and self.scheme in ("euler", "milstein") \
                and not self.sobol_highdim_ack:
            raise ConfigInvalid(
                "sobol sampling with a discretised scheme is high-dimensional "
                "and known to perform poorly; pass sobol_highdim_ack=True "
                "(--sobol-highdim-ack) to use it anyway")
        if self.max_parallelism != "auto":
            if not isinstance(self.max_parallelism, int) or self.max_parallelism < 1:
                raise ConfigInvalid(
                    f"max_parallelism must be 'auto' or a positive integer, "
                    f"got {self.max_parallelism!r}")

    def workers(self) -> int:
        if self.max_parallelism == "auto":
            import os
            return min(8, os.cpu_count() or 1)
        return self.max_parallelism


@dataclass
class McSummary:
    """Estimate and run-level spread for one quantity.

    std_error follows the benchmark reporting convention: the sample standard
    deviation of the per-run estimates (not divided by sqrt(n_runs)).
    """

    estimate: float
    std_error: float
    per_run_values: list[float] = field(default_factory=list)
    wall_ms: float = 0.0
    n_paths: int = 0
    n_runs: int = 0
