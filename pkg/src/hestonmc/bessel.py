"""Modified Bessel function of the first kind for complex arguments.

Power series in normalized form,

    I_nu(z) = exp(nu*log(z/2) - lgamma(nu+1)) * sum_k t_k,
    t_0 = 1,  t_{k+1} = t_k * (z^2/4) / ((k+1)(nu+k+1)),

valid for the moderate |z| arising from the benchmark parameter regimes.
No asymptotic branch is provided; |z| > 50 is rejected.
"""

from __future__ import annotations

import cmath
from math import lgamma

import numpy as np

from .errors import BesselNonConvergence

_MAX_ABS_Z = 50.0
_MAX_TERMS = 400
_REL_TOL = 1e-12


def bessel_i_series(nu: float, z: complex) -> complex:
    """Normalized series sum for I_nu(z) (the factor multiplying
    (z/2)^nu / Gamma(nu+1)); works for z = 0."""
    if abs(z) > _MAX_ABS_Z:
        raise BesselNonConvergence(
            f"|z| = {abs(z):.3g} exceeds the series validity bound {_MAX_ABS_Z}")
    q = 0.25 * z * z
    term = 1.0 + 0.0j
    total = term
    for k in range(1, _MAX_TERMS + 1):
        term *= q / (k * (nu + k))
        total += term
        if abs(term) < _REL_TOL * abs(total):
            return total
    raise BesselNonConvergence(
        f"Bessel series did not converge for nu={nu}, z={z}")


def bessel_i(nu: float, z: complex) -> complex:
    """I_nu(z) for complex z, nu > -1."""
    s = bessel_i_series(nu, z)
    if z == 0:
        return 0.0j if nu > 0 else (s / np.exp(lgamma(nu + 1.0)) if nu == 0 else
                                    complex(np.inf))
    return cmath.exp(nu * cmath.log(0.5 * z) - lgamma(nu + 1.0)) * s


def bessel_i_ratio(nu: float, coeff_num: complex, coeff_den: float, w: float,
                   log_coeff_ratio: complex | None = None) -> complex:
    """I_nu(w*coeff_num) / I_nu(w*coeff_den) with the (z/2)^nu prefactors
    cancelled analytically, so w = 0 is handled exactly (ratio of limits).

    `log_coeff_ratio` must be the *continuous* (analytically continued)
    logarithm of coeff_num/coeff_den when its phase can wind past pi; the
    principal log is only a safe default for wind-free arguments.
    """
    s_num = bessel_i_series(nu, w * coeff_num)
    s_den = bessel_i_series(nu, w * coeff_den)
    if log_coeff_ratio is None:
        log_coeff_ratio = cmath.log(coeff_num / coeff_den)
    return cmath.exp(nu * log_coeff_ratio) * s_num / s_den


def bessel_i_series_vec(nu: float, z: np.ndarray) -> np.ndarray:
    """Vectorised ``bessel_i_series`` over an array of complex arguments."""
    z = np.asarray(z, dtype=np.complex128)
    if np.any(np.abs(z) > _MAX_ABS_Z):
        raise BesselNonConvergence("|z| exceeds the series validity bound 50")
    q = 0.25 * z * z
    term = np.ones_like(q)
    total = term.copy()
    for k in range(1, _MAX_TERMS + 1):
        term = term * q / (k * (nu + k))
        total += term
        if np.all(np.abs(term) < _REL_TOL * np.abs(total)):
            return total
    raise BesselNonConvergence(f"Bessel series did not converge for nu={nu}")
