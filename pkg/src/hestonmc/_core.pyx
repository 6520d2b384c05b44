# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch path simulators: the hot kernels.

Mirrors hestonmc._batch_py exactly (same counter-based RNG keys, same draw
layout, same algorithms), so either backend can serve the engine.  Inner
loops run without the GIL; one scratch buffer per call holds the quadrature
node cache.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport (M_PI, cos, erfc, exp, fabs, isfinite, lgamma, log,
                        log1p, sin, sqrt)
from libc.stdlib cimport free, malloc

cnp.import_array()

BACKEND_NAME = "compiled"

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double complex csqrt(double complex)
    double complex clog(double complex)
    double cabs(double complex)
    double creal(double complex)
    double cimag(double complex)

ctypedef unsigned long long u64

cdef u64 GOLDEN = 0x9E3779B97F4A7C15ULL
cdef u64 ROOT_SALT = 0x8CB92BA72F3D8DD7ULL
cdef u64 INDEX_SALT = 0xD1B54A32D192ED03ULL
cdef double INV53 = 1.0 / 9007199254740992.0

cdef int ERR_NONE = 0
cdef int ERR_BESSEL_RANGE = 1
cdef int ERR_BESSEL_CONV = 2
cdef int ERR_QUAD = 3
cdef int ERR_ROOT = 4

cdef int MAX_NODES = 20000
cdef int NODE_CHUNK = 128
cdef double TAIL_TOL = 1e-7
cdef int TAIL_RUN = 3
cdef double NEWTON_TOL = 1e-7
cdef int NEWTON_MAX_ITER = 100
cdef int BISECT_MAX_ITER = 200
cdef double PERIOD_STDS = 12.0
cdef double DEGENERATE_REL_STD = 1e-5


# ---------------------------------------------------------------------------
# counter-based RNG (SplitMix64)
# ---------------------------------------------------------------------------

cdef inline u64 mix64(u64 z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline u64 derive(u64 parent, u64 index) noexcept nogil:
    return mix64(parent ^ mix64(index + INDEX_SALT))


cdef inline double uniform_at(u64 key, u64 i) noexcept nogil:
    return <double>(mix64(key + (i + 1) * GOLDEN) >> 11) * INV53


# ---------------------------------------------------------------------------
# inverse normal CDF: Acklam + one Halley refinement (matches rng.py)
# ---------------------------------------------------------------------------

cdef inline double ndtri_c(double u) noexcept nogil:
    cdef double q, s, num, den, x, e, corr, p
    cdef double sign
    if u < 1e-300:
        u = 1e-300
    if u > 1.0 - 1e-16:
        u = 1.0 - 1e-16
    if 0.02425 <= u <= 0.97575:
        q = u - 0.5
        s = q * q
        num = ((((-3.969683028665376e+01 * s + 2.209460984245205e+02) * s
                 - 2.759285104469687e+02) * s + 1.383577518672690e+02) * s
               - 3.066479806614716e+01) * s + 2.506628277459239e+00
        den = ((((-5.447609879822406e+01 * s + 1.615858368580409e+02) * s
                 - 1.556989798598866e+02) * s + 6.680131188771972e+01) * s
               - 1.328068155288572e+01) * s + 1.0
        x = q * num / den
    else:
        if u < 0.02425:
            p = u
            sign = 1.0
        else:
            p = 1.0 - u
            sign = -1.0
        q = sqrt(-2.0 * log(p))
        num = ((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
                 - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
               + 4.374664141464968e+00) * q + 2.938163982698783e+00
        den = (((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
                + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0
        x = sign * num / den
    e = 0.5 * erfc(-x / sqrt(2.0)) - u
    corr = e * 2.5066282746310002 * exp(0.5 * x * x)
    x -= corr / (1.0 + 0.5 * x * corr)
    return x


# ---------------------------------------------------------------------------
# Gamma sampling (Marsaglia-Tsang; matches rng.sample_gamma / gamma_batch)
# ---------------------------------------------------------------------------

cdef double sample_gamma_c(u64 key, double shape, double scale) noexcept nogil:
    cdef double boost = 1.0, alpha = shape, d, c, x, v, u
    cdef u64 ctr = 0
    if alpha < 1.0:
        boost = uniform_at(key, 0) ** (1.0 / alpha)
        alpha += 1.0
        ctr = 1
    d = alpha - 1.0 / 3.0
    c = 1.0 / sqrt(9.0 * d)
    while True:
        x = ndtri_c(uniform_at(key, ctr))
        u = uniform_at(key, ctr + 1)
        ctr += 2
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        if u < 1e-300:
            u = 1e-300
        if log(u) < 0.5 * x * x + d - d * v + d * log(v):
            return boost * d * v * scale


# ---------------------------------------------------------------------------
# characteristic function of the conditional integrated variance
# ---------------------------------------------------------------------------

cdef double complex bessel_series(double nu, double complex z,
                                  int* err) noexcept nogil:
    cdef double complex q, term, total
    cdef int k
    if cabs(z) > 50.0:
        err[0] = ERR_BESSEL_RANGE
        return 0.0
    q = 0.25 * z * z
    term = 1.0
    total = 1.0
    for k in range(1, 401):
        term = term * q / (k * (nu + k))
        total = total + term
        if cabs(term) < 1e-12 * cabs(total):
            return total
    err[0] = ERR_BESSEL_CONV
    return total


cdef double complex phi_eval(double kappa, double sigma2, double nu,
                             double v_u, double v_t, double tau, double a,
                             int* err) noexcept nogil:
    cdef double complex g, eg, lead, bracket, expo, log_q, ratio
    cdef double complex coeff_g, egh
    cdef double ek, ekh, coeff_k, w
    if a == 0.0:
        return 1.0
    g = csqrt(kappa * kappa - 2.0 * sigma2 * 1j * a)
    ek = exp(-kappa * tau)
    eg = cexp(-g * tau)
    lead = g * cexp(-0.5 * (g - kappa) * tau) * (1.0 - ek) \
        / (kappa * (1.0 - eg))
    bracket = kappa * (1.0 + ek) / (1.0 - ek) - g * (1.0 + eg) / (1.0 - eg)
    expo = cexp((v_u + v_t) / sigma2 * bracket)
    egh = cexp(-0.5 * g * tau)
    coeff_g = 4.0 * g * egh / (sigma2 * (1.0 - egh * egh))
    ekh = exp(-0.5 * kappa * tau)
    coeff_k = 4.0 * kappa * ekh / (sigma2 * (1.0 - ekh * ekh))
    w = sqrt(v_u * v_t)
    # continuous log of coeff_g/coeff_k (phase of exp(-(g-kappa)tau/2) kept
    # in closed form; remaining factors stay in the right half-plane)
    log_q = clog(g / kappa) - 0.5 * (g - kappa) * tau \
        + log(1.0 - ek) - clog(1.0 - eg)
    ratio = cexp(nu * log_q) * bessel_series(nu, w * coeff_g, err) \
        / bessel_series(nu, w * coeff_k, err)
    return lead * expo * ratio


# ---------------------------------------------------------------------------
# integrated-variance law: moments, node cache, CDF, Newton inversion
# ---------------------------------------------------------------------------

cdef double sample_iv(double kappa, double theta, double sigma, double dof,
                      double v_u, double v_t, double dt, double u,
                      double* re_phi, int* err) noexcept nogil:
    """Inverse-CDF draw of the conditional integrated variance."""
    cdef double sigma2 = sigma * sigma
    cdef double nu = 0.5 * dof - 1.0
    cdef double scale, m1, m1_new, eps, m2, var, mean, std, h
    cdef double complex phi
    cdef int it

    if u < 1e-12:
        u = 1e-12
    if u > 1.0 - 1e-12:
        u = 1.0 - 1e-12

    if sigma < 1e-4 * kappa:
        # vanishing vol-of-vol: deterministic mean-path integral
        return theta * dt + (v_u - theta) * (1.0 - exp(-kappa * dt)) / kappa

    # moments from Phi at a small frequency (two-stage refinement)
    scale = 0.5 * (v_u + v_t)
    if scale < 0.01 * theta:
        scale = 0.01 * theta
    scale *= dt
    m1 = scale
    for it in range(2):
        eps = 0.05 / m1
        phi = phi_eval(kappa, sigma2, nu, v_u, v_t, dt, eps, err)
        m1_new = cimag(phi) / eps
        if not (m1_new > 0.0) or not isfinite(m1_new):
            break
        m1 = m1_new
    eps = 0.05 / m1
    phi = phi_eval(kappa, sigma2, nu, v_u, v_t, dt, eps, err)
    m1 = cimag(phi) / eps
    m2 = -2.0 * (creal(phi) - 1.0) / (eps * eps)
    var = m2 - m1 * m1
    if var < 0.0:
        var = 0.0
    mean = m1
    std = sqrt(var)
    if err[0] != ERR_NONE:
        return 0.0

    if std < DEGENERATE_REL_STD * mean:
        m1 = mean + std * ndtri_c(u)
        return m1 if m1 > 0.0 else 0.0

    h = 2.0 * M_PI / (mean + PERIOD_STDS * std)

    # fill the Re Phi node cache until the tail criterion holds
    cdef int n = 0
    cdef int run = 0
    cdef int j
    cdef double mag
    while run < TAIL_RUN:
        if n >= MAX_NODES:
            err[0] = ERR_QUAD
            return 0.0
        j = n + 1
        phi = phi_eval(kappa, sigma2, nu, v_u, v_t, dt, j * h, err)
        if err[0] != ERR_NONE:
            return 0.0
        re_phi[n] = creal(phi)
        mag = (2.0 / M_PI) * cabs(phi) / j
        if mag < TAIL_TOL:
            run += 1
        else:
            run = 0
        n += 1

    # second-order Newton with bracket + bisection fallback
    cdef double lo = 0.0
    cdef double hi = 2.0 * M_PI / h
    cdef double x = mean
    if x < 1e-3 * hi:
        x = 1e-3 * hi
    if x > 0.9 * hi:
        x = 0.9 * hi
    cdef double f, d1, d2, sx, cx, s_j, efun, disc, step
    cdef bint have_step
    for it in range(NEWTON_MAX_ITER):
        f = h * x / M_PI
        d1 = h / M_PI
        d2 = 0.0
        for j in range(1, n + 1):
            s_j = j * h
            sx = sin(s_j * x)
            cx = cos(s_j * x)
            f += (2.0 / M_PI) * sx / j * re_phi[j - 1]
            d1 += (2.0 * h / M_PI) * cx * re_phi[j - 1]
            d2 -= (2.0 * h / M_PI) * s_j * sx * re_phi[j - 1]
        efun = f - u
        if fabs(efun) < NEWTON_TOL:
            return x
        if efun > 0.0:
            if x < hi:
                hi = x
        else:
            if x > lo:
                lo = x
        have_step = False
        if d1 > 0.0:
            disc = 1.0 - 2.0 * efun * d2 / (d1 * d1)
            if fabs(d2) < 1e-300 or fabs(2.0 * efun * d2) < 1e-12 * d1 * d1:
                step = -efun / d1
                have_step = True
            elif disc > 0.0:
                step = -(d1 / d2) * (1.0 - sqrt(disc))
                have_step = True
        if (not have_step) or (x + step <= lo) or (x + step >= hi):
            x = 0.5 * (lo + hi)
        else:
            x = x + step

    return bisect_iv(u, lo, hi, h, n, re_phi, err)


cdef inline double cdf_at(double x, double u, double h, int n,
                          double* re_phi) noexcept nogil:
    cdef double f = h * x / M_PI
    cdef int j
    for j in range(1, n + 1):
        f += (2.0 / M_PI) * sin(j * h * x) / j * re_phi[j - 1]
    return f


cdef double bisect_iv(double u, double lo, double hi, double h, int n,
                      double* re_phi, int* err) noexcept nogil:
    cdef double f_hi = cdf_at(hi, u, h, n, re_phi)
    cdef double x, f
    cdef int it
    if f_hi < u - NEWTON_TOL:
        if f_hi < u - 1e-4:
            err[0] = ERR_ROOT
            return 0.0
        return hi
    x = 0.5 * (lo + hi)
    for it in range(BISECT_MAX_ITER):
        f = cdf_at(x, u, h, n, re_phi)
        if fabs(f - u) < NEWTON_TOL:
            return x
        if f > u:
            hi = x
        else:
            lo = x
        x = 0.5 * (lo + hi)
        if hi - lo < 1e-16 * (1.0 + hi):
            break
    if fabs(cdf_at(x, u, h, n, re_phi) - u) < 1e-6:
        return x
    err[0] = ERR_ROOT
    return 0.0


# ---------------------------------------------------------------------------
# batch entry points (engine backend API)
# ---------------------------------------------------------------------------

def discretised_batch(params, double s0, double T, int n_steps,
                      bint milstein, long path_lo, long path_hi,
                      object key_run, uniforms, avg_indices):
    """Euler/Milstein paths for the half-open path range [path_lo, path_hi)."""
    cdef double kappa = params.kappa, theta = params.theta
    cdef double sigma = params.sigma, rho = params.rho, r = params.r
    cdef double v0 = params.v0
    cdef long n = path_hi - path_lo
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, 3))
    cdef cnp.ndarray[cnp.int64_t, ndim=1] avg_idx = \
        np.ascontiguousarray(avg_indices, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] is_avg = \
        np.zeros(n_steps + 1, dtype=np.uint8)
    cdef long i
    for i in range(avg_idx.shape[0]):
        is_avg[avg_idx[i]] = 1
    cdef long n_dates = avg_idx.shape[0]

    cdef bint use_u = uniforms is not None
    cdef cnp.ndarray[cnp.float64_t, ndim=2] u_arr = \
        np.ascontiguousarray(uniforms, dtype=np.float64) if use_u \
        else np.empty((1, 1))

    cdef u64 krun = <u64>(<object>key_run)
    cdef double dt = T / n_steps
    cdef double sq1mr2 = sqrt(1.0 - rho * rho)
    cdef double s, v, price_sum, tw_sum, u1, u2, z1, z2, sqv, v_new, t_k
    cdef u64 main_key
    cdef int k
    with nogil:
        for i in range(n):
            main_key = derive(derive(krun, <u64>(path_lo + i)), 0)
            s = s0
            v = v0
            price_sum = 0.0
            tw_sum = 0.0
            for k in range(1, n_steps + 1):
                if use_u:
                    u1 = u_arr[i, 2 * (k - 1)]
                    u2 = u_arr[i, 2 * (k - 1) + 1]
                else:
                    u1 = uniform_at(main_key, 2 * (k - 1))
                    u2 = uniform_at(main_key, 2 * (k - 1) + 1)
                z1 = ndtri_c(u1)
                z2 = rho * z1 + sq1mr2 * ndtri_c(u2)
                sqv = sqrt(v * dt)
                s = s * exp((r - 0.5 * v) * dt + sqv * z1)
                v_new = v + kappa * (theta - v) * dt + sigma * sqv * z2
                if milstein:
                    v_new = v_new + 0.25 * sigma * sigma * dt * (z2 * z2 - 1.0)
                v = v_new if v_new > 0.0 else 0.0
                if is_avg[k]:
                    t_k = k * T / n_steps
                    price_sum += s
                    tw_sum += s * t_k
            out[i, 0] = s
            out[i, 1] = price_sum / n_dates
            out[i, 2] = tw_sum / n_dates
    return out


def exact_batch(params, double s0, step_times, avg_flags, long path_lo,
                long path_hi, object key_run, uniforms):
    """Broadie-Kaya paths stepping through `step_times` (starting at 0)."""
    cdef double kappa = params.kappa, theta = params.theta
    cdef double sigma = params.sigma, rho = params.rho, r = params.r
    cdef double v0 = params.v0, dof = params.dof
    cdef long n = path_hi - path_lo
    cdef cnp.ndarray[cnp.float64_t, ndim=1] times = \
        np.ascontiguousarray(step_times, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] flags = \
        np.ascontiguousarray(avg_flags, dtype=np.int64)
    cdef int n_steps = times.shape[0] - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, 3))

    cdef bint use_u = uniforms is not None
    cdef cnp.ndarray[cnp.float64_t, ndim=2] u_arr = \
        np.ascontiguousarray(uniforms, dtype=np.float64) if use_u \
        else np.empty((1, 1))

    cdef long n_dates = 0
    cdef int k
    for k in range(n_steps):
        if flags[k]:
            n_dates += 1

    cdef u64 krun = <u64>(<object>key_run)
    cdef bint point_mass = sigma < 1e-4 * kappa
    cdef double* re_phi = <double*>malloc(MAX_NODES * sizeof(double))
    if re_phi == NULL:
        raise MemoryError()
    cdef int err = ERR_NONE
    cdef u64 key_path, main_key, gamma_root
    cdef double ln_s, v, price_sum, tw_sum, dt, ek, c, lam, u1, u2, u3
    cdef double z1, g, shifted, v_new, iv, int_w2, z3, var_ln, s_now
    cdef long i
    try:
        with nogil:
            for i in range(n):
                key_path = derive(krun, <u64>(path_lo + i))
                main_key = derive(key_path, 0)
                gamma_root = derive(key_path, 1)
                ln_s = log(s0)
                v = v0
                price_sum = 0.0
                tw_sum = 0.0
                for k in range(n_steps):
                    dt = times[k + 1] - times[k]
                    if use_u:
                        u1 = u_arr[i, 3 * k]
                        u2 = u_arr[i, 3 * k + 1]
                        u3 = u_arr[i, 3 * k + 2]
                    else:
                        u1 = uniform_at(main_key, 3 * k)
                        u2 = uniform_at(main_key, 3 * k + 1)
                        u3 = uniform_at(main_key, 3 * k + 2)
                    ek = exp(-kappa * dt)
                    c = sigma * sigma * (1.0 - ek) / (4.0 * kappa)
                    lam = 4.0 * kappa * ek * v / (sigma * sigma * (1.0 - ek))
                    z1 = ndtri_c(u1)
                    g = sample_gamma_c(derive(gamma_root, <u64>k),
                                       0.5 * (dof - 1.0), 2.0)
                    shifted = z1 + sqrt(lam)
                    v_new = c * (g + shifted * shifted)
                    iv = sample_iv(kappa, theta, sigma, dof, v, v_new, dt,
                                   u2, re_phi, &err)
                    if err != ERR_NONE:
                        break
                    if point_mass:
                        # vanishing vol-of-vol: iv is deterministic and the
                        # endpoint identity degenerates; int sqrt(V) dW2 is
                        # N(0, iv) in this limit
                        int_w2 = sqrt(iv) * ndtri_c(u2)
                    else:
                        int_w2 = (v_new - v - kappa * theta * dt
                                  + kappa * iv) / sigma
                    z3 = ndtri_c(u3)
                    var_ln = (1.0 - rho * rho) * iv
                    if var_ln < 0.0:
                        var_ln = 0.0
                    ln_s = ln_s + r * dt - 0.5 * iv + rho * int_w2 \
                        + sqrt(var_ln) * z3
                    v = v_new
                    if flags[k]:
                        s_now = exp(ln_s)
                        price_sum += s_now
                        tw_sum += s_now * times[k + 1]
                if err != ERR_NONE:
                    break
                out[i, 0] = exp(ln_s)
                out[i, 1] = price_sum / n_dates
                out[i, 2] = tw_sum / n_dates
    finally:
        free(re_phi)
    if err == ERR_BESSEL_RANGE:
        from .errors import BesselNonConvergence
        raise BesselNonConvergence("|z| exceeds the series validity bound 50")
    if err == ERR_BESSEL_CONV:
        from .errors import BesselNonConvergence
        raise BesselNonConvergence("Bessel series did not converge")
    if err == ERR_QUAD:
        from .errors import QuadratureNonConvergence
        raise QuadratureNonConvergence(
            "characteristic-function tail did not fall below tolerance")
    if err == ERR_ROOT:
        from .errors import RootNotBracketed
        raise RootNotBracketed("CDF inversion failed to reach tolerance")
    return out
