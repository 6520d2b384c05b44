"""All randomness: counter-based uniform streams, Sobol points, inverse-normal,
Gamma and non-central chi-squared sampling, correlated normal pairs.

The pseudo generator is a counter-based SplitMix64 construction: draw i of the
stream with key k is ``mix64(k + (i+1)*GOLDEN)``.  Every draw is a pure
function of (seed, stream_index, draw index), which is what makes the engine's
parallel-determinism contract cheap to honour.  Statistical quality matches
the MT19937 bar (SplitMix64 passes BigCrush); the exact MT bitstream is not
reproduced.

Sobol points come from scipy's unscrambled Joe-Kuo direction numbers
(scipy.stats.qmc.Sobol, 21201 dimensions).  Index 0 (the all-zeros point) is
always skipped for sampling use, since the inverse-normal of 0 is -inf.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import DofOutOfRange, ValidationError

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_ROOT_SALT = 0x8CB92BA72F3D8DD7
_INDEX_SALT = 0xD1B54A32D192ED03

#: substream purpose codes used by the engine's per-path key derivation
PURPOSE_MAIN = 0
PURPOSE_GAMMA = 1

_U64 = np.uint64
_INV_2_53 = 2.0 ** -53


def mix64(z: int) -> int:
    """SplitMix64 finalizer (Stafford variant 13)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def root_key(seed: int) -> int:
    return mix64((seed & _MASK) ^ _ROOT_SALT)


def derive_key(parent: int, index: int) -> int:
    """Independent substream key for a non-negative index."""
    return mix64(parent ^ mix64((index + _INDEX_SALT) & _MASK))


def stream_key(seed: int, *indices: int) -> int:
    """Key for a hierarchically indexed substream, e.g. (run, path, purpose)."""
    k = root_key(seed)
    for ix in indices:
        k = derive_key(k, ix)
    return k


def uniform_at(key: int, i: int) -> float:
    """Draw i of the stream with the given key, in [0, 1)."""
    return (mix64((key + (i + 1) * _GOLDEN) & _MASK) >> 11) * _INV_2_53


def uniforms_at(key: int, start: int, count: int) -> np.ndarray:
    """Vectorised ``uniform_at`` for draws start..start+count-1."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _U64(key) + idx * _U64(_GOLDEN)
    z = mix64_vec(z)
    return (z >> _U64(11)).astype(np.float64) * _INV_2_53


# ---------------------------------------------------------------------------
# Inverse normal CDF
# ---------------------------------------------------------------------------

# Acklam rational approximation, refined below to near machine precision.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)

_P_LOW = 0.02425
_SQRT_2PI = 2.5066282746310002


def inverse_normal_cdf(u):
    """Standard-normal quantile, elementwise; |error| well below 1e-9.

    Acklam's rational approximation plus one Halley refinement step, so one
    uniform maps to one normal (QMC dimension bookkeeping stays exact).
    Inputs are clamped away from {0, 1}.
    """
    from scipy.special import erfc

    u = np.asarray(u, dtype=np.float64)
    scalar = u.ndim == 0
    u = np.atleast_1d(u).copy()
    np.clip(u, 1e-300, 1.0 - 1e-16, out=u)
    x = np.empty_like(u)

    lo = u < _P_LOW
    hi = u > 1.0 - _P_LOW
    mid = ~(lo | hi)

    if np.any(mid):
        q = u[mid] - 0.5
        s = q * q
        num = ((((_A[0] * s + _A[1]) * s + _A[2]) * s + _A[3]) * s + _A[4]) * s + _A[5]
        den = ((((_B[0] * s + _B[1]) * s + _B[2]) * s + _B[3]) * s + _B[4]) * s + 1.0
        x[mid] = q * num / den
    for mask, sign in ((lo, 1.0), (hi, -1.0)):
        if np.any(mask):
            p = u[mask] if sign > 0 else 1.0 - u[mask]
            q = np.sqrt(-2.0 * np.log(p))
            num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
            den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
            x[mask] = sign * num / den

    # one Halley step against the exact CDF
    err = 0.5 * erfc(-x / np.sqrt(2.0)) - u
    corr = err * _SQRT_2PI * np.exp(0.5 * x * x)
    x -= corr / (1.0 + 0.5 * x * corr)
    return float(x[0]) if scalar else x


# ---------------------------------------------------------------------------
# Streams
# ---------------------------------------------------------------------------

#: Sobol points reserved per sobol stream_index block
SOBOL_BLOCK = 1 << 20


def sobol_points(dimension: int, start: int, count: int) -> np.ndarray:
    """Rows start..start+count-1 of the unscrambled Sobol sequence.

    Row 0 is the all-zeros point; callers sampling through an inverse-normal
    transform should start at 1.
    """
    eng = qmc.Sobol(d=dimension, scramble=False)
    if start > 0:
        eng.fast_forward(start)
    return eng.random(count)


@dataclass
class UniformStream:
    """Single-owner stream of uniforms in [0, 1).

    kind "pseudo": counter-based SplitMix64 stream; distinct stream_index
    values give statistically independent sequences for the same seed.
    kind "sobol": coordinates of successive Sobol points of the given
    dimension; stream_index selects a disjoint block of the sequence and the
    all-zeros point is skipped, so draws are never exactly 0.
    """

    kind: str = "pseudo"
    seed: int = 0
    dimension: int = 1
    stream_index: int = 0
    _key: int = field(init=False, default=0)
    _counter: int = field(init=False, default=0)
    _buffer: np.ndarray | None = field(init=False, default=None, repr=False)
    _buf_pos: int = field(init=False, default=0)

    _SOBOL_CHUNK = 4096

    def __post_init__(self):
        if self.kind not in ("pseudo", "sobol"):
            raise ValidationError(f"unknown stream kind {self.kind!r}")
        if self.dimension < 1:
            raise ValidationError("dimension must be >= 1")
        if self.stream_index < 0:
            raise ValidationError("stream_index must be >= 0")
        self._key = stream_key(self.seed, self.stream_index)

    # -- pseudo/sobol common ------------------------------------------------

    def next_uniform(self) -> float:
        """Next draw; for sobol this is one coordinate of the current point."""
        if self.kind == "pseudo":
            u = uniform_at(self._key, self._counter)
            self._counter += 1
            return u
        if self._buffer is None or self._buf_pos >= self._buffer.size:
            self._fill_sobol()
        u = float(self._buffer.flat[self._buf_pos])
        self._buf_pos += 1
        return u

    def next_point(self) -> np.ndarray:
        """All coordinates of one point (pseudo: `dimension` fresh draws)."""
        return np.array([self.next_uniform() for _ in range(self.dimension)])

    def _fill_sobol(self):
        start = 1 + self.stream_index * SOBOL_BLOCK + self._counter
        self._buffer = sobol_points(self.dimension, start, self._SOBOL_CHUNK)
        self._counter += self._SOBOL_CHUNK
        self._buf_pos = 0

    def spawn(self, stream_index: int) -> "UniformStream":
        """Independent substream of the same seed."""
        return UniformStream(kind=self.kind, seed=self.seed,
                             dimension=self.dimension, stream_index=stream_index)


# ---------------------------------------------------------------------------
# Variates
# ---------------------------------------------------------------------------

def sample_normal(stream: UniformStream) -> float:
    """Standard normal via the inverse-CDF transform; strictly increasing in
    the underlying uniform."""
    return float(inverse_normal_cdf(stream.next_uniform()))


def correlated_pair(stream: UniformStream, rho: float) -> tuple[float, float]:
    """Two standard normals with correlation rho, consuming exactly two draws.

    Z1 = Za, Z2 = rho*Z1 + sqrt(1-rho^2)*Zb.
    """
    if not (-1.0 <= rho <= 1.0):
        raise ValidationError(f"rho must lie in [-1, 1], got {rho}")
    z_a = sample_normal(stream)
    z_b = sample_normal(stream)
    return z_a, rho * z_a + np.sqrt(1.0 - rho * rho) * z_b


def sample_gamma(stream: UniformStream, shape: float, scale: float = 1.0) -> float:
    """Gamma(shape, scale) via Marsaglia-Tsang squeeze-rejection.

    For shape < 1 the standard boost U^(1/shape) * Gamma(shape+1) is applied.
    """
    if not (shape > 0.0):
        raise ValidationError(f"gamma shape must be > 0, got {shape}")
    if not (scale > 0.0):
        raise ValidationError(f"gamma scale must be > 0, got {scale}")
    boost = 1.0
    alpha = shape
    if alpha < 1.0:
        u = stream.next_uniform()
        boost = u ** (1.0 / alpha)
        alpha += 1.0
    d = alpha - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    while True:
        x = sample_normal(stream)
        v = 1.0 + c * x
        u = stream.next_uniform()  # drawn unconditionally: fixed 2 draws/round
        if v <= 0.0:
            continue
        v = v * v * v
        if u < 1e-300:
            u = 1e-300
        if np.log(u) < 0.5 * x * x + d - d * v + d * np.log(v):
            return boost * d * v * scale


@dataclass(frozen=True)
class NccsParams:
    """Non-central chi-squared parameters; the implemented Gamma + squared
    shifted-normal decomposition requires dof > 1."""

    dof: float
    noncentrality: float

    def __post_init__(self):
        if not (self.dof > 1.0):
            raise DofOutOfRange(
                f"non-central chi-squared sampling needs dof > 1, got {self.dof}")
        if self.noncentrality < 0.0:
            raise ValidationError(
                f"noncentrality must be >= 0, got {self.noncentrality}")


def sample_nccs(stream: UniformStream, p: NccsParams,
                gamma_stream: UniformStream | None = None) -> float:
    """Non-central chi-squared draw via chi2_{d-1} + (Z + sqrt(lambda))^2.

    The chi-squared part is Gamma((d-1)/2, 2).  When `gamma_stream` is given,
    the open-ended Gamma rejection loop draws from it instead of `stream`,
    keeping `stream`'s draw budget fixed at one (needed in sobol mode, where
    rejection sampling cannot consume QMC coordinates).
    """
    z = sample_normal(stream)
    g = sample_gamma(gamma_stream if gamma_stream is not None else stream,
                     0.5 * (p.dof - 1.0), 2.0)
    s = z + np.sqrt(p.noncentrality)
    return g + s * s


# ---------------------------------------------------------------------------
# Vectorised batch samplers (used by the pure-python engine backend)
# ---------------------------------------------------------------------------

def gamma_batch(keys: np.ndarray, shape: float, scale: float = 1.0) -> np.ndarray:
    """One Gamma(shape, scale) draw per key, Marsaglia-Tsang, vectorised.

    Draw j of key k is uniform_at(k, j); each rejection round consumes two
    draws per still-pending key (plus one up-front boost draw when shape < 1).
    """
    keys = np.asarray(keys, dtype=np.uint64)
    n = keys.size
    out = np.empty(n, dtype=np.float64)
    counters = np.zeros(n, dtype=np.uint64)
    boost = np.ones(n, dtype=np.float64)
    alpha = shape
    if alpha < 1.0:
        u = _uniform_keys(keys, counters)
        counters += _U64(1)
        # scalar pow per element: numpy's vectorised pow can differ from the
        # C library pow by 1 ulp, breaking bit-identity with sample_gamma
        boost = np.array([float(x) ** (1.0 / alpha) for x in u])
        alpha += 1.0
    d = alpha - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    pending = np.arange(n)
    while pending.size:
        k = keys[pending]
        ctr = counters[pending]
        x = inverse_normal_cdf(_uniform_keys(k, ctr))
        u = _uniform_keys(k, ctr + _U64(1))
        counters[pending] += _U64(2)
        v = 1.0 + c * x
        ok = v > 0.0
        v = np.where(ok, v, 1.0)
        v = v * v * v  # not v**3: match the scalar sampler bit-for-bit
        np.clip(u, 1e-300, None, out=u)
        accept = ok & (np.log(u) < 0.5 * x * x + d - d * v + d * np.log(v))
        idx = pending[accept]
        # same multiplication order as the scalar sampler (bit-identical)
        out[idx] = boost[idx] * d * v[accept] * scale
        pending = pending[~accept]
    return out


def mix64_vec(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):  # uint64 wraparound is the point
        z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
        return z ^ (z >> _U64(31))


def derive_keys(parent, indices) -> np.ndarray:
    """Vectorised ``derive_key`` over arrays of parents and/or indices."""
    parent = np.asarray(parent, dtype=np.uint64)
    with np.errstate(over="ignore"):
        idx = np.asarray(indices, dtype=np.uint64) + _U64(_INDEX_SALT)
    return mix64_vec(parent ^ mix64_vec(idx))


def _uniform_keys(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """uniform_at(key_i, counter_i) for aligned arrays."""
    with np.errstate(over="ignore"):
        z = keys + (counters + _U64(1)) * _U64(_GOLDEN)
    z = mix64_vec(z)
    return (z >> _U64(11)).astype(np.float64) * _INV_2_53
