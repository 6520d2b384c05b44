"""Conditional law of the integrated variance over one step, given both
variance endpoints: characteristic function, trapezoid-quadrature CDF, and
inverse-transform sampling with a second-order Newton iteration.

The characteristic function follows the Broadie-Kaya form

    Phi(a) = gamma(a) e^{-(gamma(a)-kappa) tau / 2} (1 - e^{-kappa tau})
             / (kappa (1 - e^{-gamma(a) tau}))
           * exp( (v_u + v_t)/sigma^2 * [ kappa (1 + e^{-kappa tau})/(1 - e^{-kappa tau})
                                          - gamma(a) (1 + e^{-gamma(a) tau})/(1 - e^{-gamma(a) tau}) ] )
           * I_nu(z_gamma) / I_nu(z_kappa),

with gamma(a) = sqrt(kappa^2 - 2 sigma^2 i a), nu = d/2 - 1, and Bessel
arguments z_x = sqrt(v_u v_t) * 4 x e^{-x tau / 2} / (sigma^2 (1 - e^{-x tau})).
Phi(0) = 1 by construction.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .bessel import bessel_i_ratio, bessel_i_series_vec
from .errors import InvalidParams, QuadratureNonConvergence, RootNotBracketed
from .model import HestonParams
from .rng import inverse_normal_cdf

#: quadrature period covers m1 + _PERIOD_STDS * std, so inversion stays
#: alias-free out to extreme quantiles of the Sobol blocks
_PERIOD_STDS = 12.0
_TAIL_TOL = 1e-7
_TAIL_RUN = 3
_MAX_NODES = 20000
_NODE_CHUNK = 128
_NEWTON_TOL = 1e-7
_NEWTON_MAX_ITER = 100
_BISECT_MAX_ITER = 200
#: below this relative spread the law is treated as a point mass at its mean
#: (a Gaussian tweak keeps the inverse monotone in u)
_DEGENERATE_REL_STD = 1e-5


def _bessel_coeff(x: complex, tau: float, sigma2: float) -> complex:
    e = cmath.exp(-0.5 * x * tau)
    return 4.0 * x * e / (sigma2 * (1.0 - e * e))


def characteristic_fn_raw(params: HestonParams, v_u: float, v_t: float,
                          dt: float, a: float) -> complex:
    """Phi(a) for a single real frequency a >= 0."""
    if a == 0.0:
        return 1.0 + 0.0j
    kappa, sigma = params.kappa, params.sigma
    sigma2 = sigma * sigma
    tau = dt
    nu = 0.5 * params.dof - 1.0
    g = cmath.sqrt(kappa * kappa - 2.0 * sigma2 * 1j * a)
    ek = math.exp(-kappa * tau)
    eg = cmath.exp(-g * tau)
    lead = g * cmath.exp(-0.5 * (g - kappa) * tau) * (1.0 - ek) / (kappa * (1.0 - eg))
    bracket = (kappa * (1.0 + ek) / (1.0 - ek)
               - g * (1.0 + eg) / (1.0 - eg))
    expo = cmath.exp((v_u + v_t) / sigma2 * bracket)
    # continuous log of coeff_g/coeff_k: the exp(-(g-kappa)tau/2) phase is
    # kept in closed form (it winds past pi); the remaining factors stay in
    # the right half-plane, where the principal log is continuous
    log_q = (cmath.log(g / kappa) - 0.5 * (g - kappa) * tau
             + math.log(1.0 - ek) - cmath.log(1.0 - eg))
    ratio = bessel_i_ratio(nu, _bessel_coeff(g, tau, sigma2),
                           _bessel_coeff(kappa, tau, sigma2).real,
                           math.sqrt(v_u * v_t), log_coeff_ratio=log_q)
    return lead * expo * ratio


def _characteristic_fn_vec(params: HestonParams, v_u: float, v_t: float,
                           dt: float, a: np.ndarray) -> np.ndarray:
    """Phi over an array of strictly positive frequencies."""
    kappa, sigma = params.kappa, params.sigma
    sigma2 = sigma * sigma
    tau = dt
    nu = 0.5 * params.dof - 1.0
    g = np.sqrt(kappa * kappa - 2.0 * sigma2 * 1j * np.asarray(a))
    ek = math.exp(-kappa * tau)
    eg = np.exp(-g * tau)
    lead = g * np.exp(-0.5 * (g - kappa) * tau) * (1.0 - ek) / (kappa * (1.0 - eg))
    bracket = kappa * (1.0 + ek) / (1.0 - ek) - g * (1.0 + eg) / (1.0 - eg)
    expo = np.exp((v_u + v_t) / sigma2 * bracket)
    egh = np.exp(-0.5 * g * tau)
    coeff_g = 4.0 * g * egh / (sigma2 * (1.0 - egh * egh))
    ekh = math.exp(-0.5 * kappa * tau)
    coeff_k = 4.0 * kappa * ekh / (sigma2 * (1.0 - ekh * ekh))
    w = math.sqrt(v_u * v_t)
    # continuous log of coeff_g/coeff_k (see characteristic_fn_raw)
    log_q = (np.log(g / kappa) - 0.5 * (g - kappa) * tau
             + math.log(1.0 - ek) - np.log(1.0 - eg))
    ratio = (np.exp(nu * log_q)
             * bessel_i_series_vec(nu, w * coeff_g)
             / bessel_i_series_vec(nu, w * coeff_k))
    return lead * expo * ratio


@dataclass
class IntegratedVarianceLaw:
    """Lazy trapezoid representation of F(x) = Pr(int_u^t V_s ds <= x | v_u, v_t).

    F(x) = h*x/pi + (2/pi) * sum_{j>=1} sin(j h x)/j * Re Phi(j h),
    truncated once (2/pi)|Re Phi(j h)|/j stays below tolerance.
    """

    params: HestonParams
    v_u: float
    v_t: float
    dt: float
    h: float = field(init=False)
    mean: float = field(init=False)
    std: float = field(init=False)
    _re_phi: np.ndarray = field(init=False, repr=False)
    _n_nodes: int = field(init=False, default=0)
    _converged_at: int = field(init=False, default=-1)

    def __post_init__(self):
        if self.params.kappa <= 0.0 or self.params.sigma <= 0.0:
            raise InvalidParams("kappa and sigma must be strictly positive")
        if self.dt <= 0.0:
            raise InvalidParams(f"dt must be > 0, got {self.dt}")
        if self.params.sigma < 1e-4 * self.params.kappa:
            # vanishing vol-of-vol: the law collapses onto the deterministic
            # mean-path integral and the Bessel arguments (~1/sigma^2) leave
            # the series' validity range, so skip the quadrature machinery
            kappa, theta = self.params.kappa, self.params.theta
            self.mean = (theta * self.dt
                         + (self.v_u - theta) * (1.0 - math.exp(-kappa * self.dt))
                         / kappa)
            self.std = 0.0
            self.h = 0.0
            self._re_phi = np.empty(0)
            return
        self.mean, self.std = self._moments()
        self.h = 2.0 * math.pi / (self.mean + _PERIOD_STDS * self.std)
        self._re_phi = np.empty(0)

    # -- moments from the characteristic function ---------------------------

    def _moments(self) -> tuple[float, float]:
        """Conditional mean/std from Phi at a small frequency (two-stage
        finite difference; Phi(-e) = conj Phi(e) is used implicitly)."""
        scale = max(0.5 * (self.v_u + self.v_t), 0.01 * self.params.theta) * self.dt
        m1 = scale
        for _ in range(2):
            eps = 0.05 / m1
            phi = self.characteristic_fn(eps)
            m1_new = phi.imag / eps
            if not (m1_new > 0.0) or not math.isfinite(m1_new):
                break
            m1 = m1_new
        eps = 0.05 / m1
        phi = self.characteristic_fn(eps)
        m1 = phi.imag / eps
        m2 = -2.0 * (phi.real - 1.0) / (eps * eps)
        var = max(m2 - m1 * m1, 0.0)
        return m1, math.sqrt(var)

    def characteristic_fn(self, a: float) -> complex:
        """Phi(a); Phi(0) = 1 exactly."""
        return characteristic_fn_raw(self.params, self.v_u, self.v_t, self.dt, a)

    @property
    def is_degenerate(self) -> bool:
        return self.std < _DEGENERATE_REL_STD * self.mean

    @property
    def is_point_mass(self) -> bool:
        """True in the vanishing vol-of-vol regime, where the law collapses
        onto the deterministic mean-path integral (std identically 0)."""
        return self.params.sigma < 1e-4 * self.params.kappa

    # -- quadrature node cache ----------------------------------------------

    def _ensure_nodes(self, n: int):
        if n <= self._n_nodes:
            return
        if self._converged_at >= 0:
            return
        n = min(max(n, self._n_nodes + _NODE_CHUNK), _MAX_NODES)
        j = np.arange(self._n_nodes + 1, n + 1, dtype=np.float64)
        vals = _characteristic_fn_vec(self.params, self.v_u, self.v_t,
                                      self.dt, j * self.h)
        self._re_phi = np.concatenate([self._re_phi, vals.real])
        self._abs_phi = np.concatenate([getattr(self, "_abs_phi", np.empty(0)),
                                        np.abs(vals)])
        self._n_nodes = n
        # truncation: 3 consecutive terms with (2/pi)|Phi(jh)|/j below tol
        # (|Phi| rather than |Re Phi|, which dips to zero at every crossing)
        mag = (2.0 / math.pi) * self._abs_phi / np.arange(1, self._n_nodes + 1)
        small = mag < _TAIL_TOL
        run = 0
        for idx in range(self._n_nodes):
            run = run + 1 if small[idx] else 0
            if run >= _TAIL_RUN:
                self._converged_at = idx + 1
                self._re_phi = self._re_phi[: self._converged_at]
                self._abs_phi = self._abs_phi[: self._converged_at]
                self._n_nodes = self._converged_at
                return
        if self._n_nodes >= _MAX_NODES:
            raise QuadratureNonConvergence(
                "characteristic-function tail did not fall below tolerance "
                f"within {_MAX_NODES} quadrature nodes")

    def _grow_until_converged(self):
        while self._converged_at < 0:
            self._ensure_nodes(self._n_nodes + _NODE_CHUNK)

    # -- CDF and derivatives -------------------------------------------------

    def cdf_raw(self, x: float) -> float:
        """Unclamped trapezoid CDF (used by the Newton iteration)."""
        if x <= 0.0:
            return 0.0
        self._grow_until_converged()
        j = np.arange(1, self._n_nodes + 1, dtype=np.float64)
        s = j * self.h
        total = float(np.dot(np.sin(s * x) / j, self._re_phi))
        return self.h * x / math.pi + (2.0 / math.pi) * total

    def cdf(self, x: float) -> float:
        """F(x), clamped to [0, 1]."""
        if self.is_degenerate:
            if self.std == 0.0:
                return 0.0 if x < self.mean else 1.0
            from scipy.special import ndtr
            return float(ndtr((x - self.mean) / self.std)) if x > 0 else 0.0
        return min(max(self.cdf_raw(x), 0.0), 1.0)

    def _cdf_d1_d2(self, x: float) -> tuple[float, float, float]:
        """(F(x), F'(x), F''(x)) from the shared node cache."""
        self._grow_until_converged()
        j = np.arange(1, self._n_nodes + 1, dtype=np.float64)
        s = j * self.h
        sin_sx = np.sin(s * x)
        cos_sx = np.cos(s * x)
        f = self.h * x / math.pi + (2.0 / math.pi) * float(
            np.dot(sin_sx / j, self._re_phi))
        d1 = self.h / math.pi + (2.0 * self.h / math.pi) * float(
            np.dot(cos_sx, self._re_phi))
        d2 = -(2.0 * self.h / math.pi) * float(np.dot(s * sin_sx, self._re_phi))
        return f, d1, d2

    # -- inversion ------------------------------------------------------------

    def inverse_cdf(self, u: float) -> float:
        """F^{-1}(u) by second-order Newton with a bisection fallback;
        satisfies |F(result) - u| < 1e-6."""
        u = min(max(u, 1e-12), 1.0 - 1e-12)
        if self.is_degenerate:
            return max(self.mean + self.std * float(inverse_normal_cdf(u)), 0.0)
        lo, hi = 0.0, 2.0 * math.pi / self.h  # one quadrature period
        x = min(max(self.mean, 1e-3 * hi), 0.9 * hi)
        for _ in range(_NEWTON_MAX_ITER):
            f, d1, d2 = self._cdf_d1_d2(x)
            err = f - u
            if abs(err) < _NEWTON_TOL:
                return x
            if err > 0.0:
                hi = min(hi, x)
            else:
                lo = max(lo, x)
            step = None
            if d1 > 0.0:
                disc = 1.0 - 2.0 * err * d2 / (d1 * d1)
                if abs(d2) < 1e-300 or abs(2.0 * err * d2) < 1e-12 * d1 * d1:
                    step = -err / d1
                elif disc > 0.0:
                    step = -(d1 / d2) * (1.0 - math.sqrt(disc))
            if step is None or not (lo < x + step < hi):
                x = 0.5 * (lo + hi)
            else:
                x += step
        return self._bisect(u, lo, hi)

    def _bisect(self, u: float, lo: float, hi: float) -> float:
        f_hi = self.cdf_raw(hi)
        if f_hi < u - _NEWTON_TOL:
            # inversion target beyond the quadrature period: extremely deep
            # tail; the clamp error is below the Newton tolerance by design
            if f_hi < u - 1e-4:
                raise RootNotBracketed(
                    f"u = {u} not bracketed by the quadrature period")
            return hi
        x = 0.5 * (lo + hi)
        for _ in range(_BISECT_MAX_ITER):
            f = self.cdf_raw(x)
            if abs(f - u) < _NEWTON_TOL:
                return x
            if f > u:
                hi = x
            else:
                lo = x
            x = 0.5 * (lo + hi)
            if hi - lo < 1e-16 * (1.0 + hi):
                break
        if abs(self.cdf_raw(x) - u) < 1e-6:
            return x
        raise RootNotBracketed(
            f"CDF inversion failed to reach tolerance at u = {u}")
