# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the pure kernels in _pykernels.py.

The formulas mirror the numpy reference operation for operation; keep both
sides in sync when touching either.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, log, pow, sqrt

cnp.import_array()

cdef double LAMINAR = 2000.0
cdef double TURBULENT = 4000.0
cdef double LOG_BASE = 2.0


cdef inline double _pressure(double rho, double c2, double alpha_si) nogil:
    return c2 * rho / (1.0 - alpha_si * c2 * rho)


cdef inline double _dpressure(double rho, double c2, double alpha_si) nogil:
    cdef double denom = 1.0 - alpha_si * c2 * rho
    return c2 / (denom * denom)


cdef inline double _sj(double re, double rough, double diam) nogil:
    cdef double x = rough / (3.7 * diam) + 5.74 / pow(re, 0.9)
    cdef double ld = log(x) / log(LOG_BASE)
    return 0.25 / (ld * ld)


cdef inline double _sj_deriv(double re, double rough, double diam) nogil:
    cdef double x = rough / (3.7 * diam) + 5.74 / pow(re, 0.9)
    cdef double ld = log(x) / log(LOG_BASE)
    cdef double dx_dre = -0.9 * 5.74 * pow(re, -1.9)
    cdef double dld_dre = dx_dre / (x * log(LOG_BASE))
    return -0.5 / (ld * ld * ld) * dld_dre


cdef inline double _lam(double re, double rough, double diam,
                        double b0, double b1, double b2, double b3) nogil:
    cdef double s
    if re > TURBULENT:
        return _sj(re, rough, diam)
    s = (re - LAMINAR) / (TURBULENT - LAMINAR)
    return b0 + s * (b1 + s * (b2 + s * b3))


cdef inline double _dlam(double re, double rough, double diam,
                         double b0, double b1, double b2, double b3) nogil:
    cdef double s
    if re > TURBULENT:
        return _sj_deriv(re, rough, diam)
    s = (re - LAMINAR) / (TURBULENT - LAMINAR)
    return (b1 + s * (2.0 * b2 + s * 3.0 * b3)) / (TURBULENT - LAMINAR)


def box_residual(double[::1] rho_p, double[::1] q_p,
                 double[::1] rho_n, double[::1] q_n,
                 double dt, double dx, double area, double diam, double rough,
                 double rho0, double eta, double c2, double alpha_si,
                 double b0, double b1, double b2, double b3):
    cdef Py_ssize_t kk = rho_n.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] mass = np.empty(kk)
    cdef cnp.ndarray[double, ndim=1] mom = np.empty(kk)
    cdef double[::1] mass_v = mass
    cdef double[::1] mom_v = mom
    cdef double r = dt / dx
    cdef double ra = rho0 / area
    cdef double beta = diam / (area * eta) * rho0
    cdef double lam_coeff = 32.0 * area * eta / (diam * diam * rho0)
    cdef Py_ssize_t k, j
    cdef double re, lam, s_cur, f1_cur, f2_cur
    cdef double s_prevpt = 0.0, f1_prevpt = 0.0, f2_prevpt = 0.0
    cdef double rho, q, nan

    for k in range(kk + 1):
        rho = rho_n[k]
        q = q_n[k]
        if rho <= 0.0:
            nan = float("nan")
            for j in range(kk):
                mass_v[j] = nan
                mom_v[j] = nan
            return mass, mom
        f1_cur = ra * q
        f2_cur = _pressure(rho, c2, alpha_si) / ra + ra * q * q / rho
        re = beta * fabs(q)
        if re < LAMINAR:
            s_cur = -lam_coeff * q / rho
        else:
            lam = _lam(re, rough, diam, b0, b1, b2, b3)
            s_cur = -lam / (2.0 * diam) * fabs(q) / rho * q
        if k > 0:
            mass_v[k - 1] = (0.5 * (rho_n[k] + rho_n[k - 1])
                             - 0.5 * (rho_p[k] + rho_p[k - 1])
                             + r * (f1_cur - f1_prevpt))
            mom_v[k - 1] = (0.5 * (q_n[k] + q_n[k - 1])
                            - 0.5 * (q_p[k] + q_p[k - 1])
                            + r * (f2_cur - f2_prevpt)
                            - dt * (s_cur + s_prevpt))
        f1_prevpt = f1_cur
        f2_prevpt = f2_cur
        s_prevpt = s_cur
    return mass, mom


def box_jacobian(double[::1] rho_n, double[::1] q_n,
                 double dt, double dx, double area, double diam, double rough,
                 double rho0, double eta, double c2, double alpha_si,
                 double b0, double b1, double b2, double b3):
    cdef Py_ssize_t kk = rho_n.shape[0] - 1
    cdef cnp.ndarray[double, ndim=2] dmass = np.empty((kk, 4))
    cdef cnp.ndarray[double, ndim=2] dmom = np.empty((kk, 4))
    cdef double[:, ::1] dmass_v = dmass
    cdef double[:, ::1] dmom_v = dmom
    cdef double r = dt / dx
    cdef double ra = rho0 / area
    cdef double beta = diam / (area * eta) * rho0
    cdef double lam_coeff = 32.0 * area * eta / (diam * diam * rho0)
    cdef Py_ssize_t k
    cdef double rho, q, re, re_cl, lam, dlam, s_val
    cdef double df2_drho_cur, df2_dq_cur, ds_drho_cur, ds_dq_cur
    cdef double df2_drho_prev = 0.0, df2_dq_prev = 0.0
    cdef double ds_drho_prev = 0.0, ds_dq_prev = 0.0

    for k in range(kk + 1):
        rho = rho_n[k]
        q = q_n[k]
        df2_drho_cur = _dpressure(rho, c2, alpha_si) / ra - ra * q * q / (rho * rho)
        df2_dq_cur = ra * 2.0 * q / rho
        re = beta * fabs(q)
        re_cl = re if re >= LAMINAR else LAMINAR
        lam = _lam(re_cl, rough, diam, b0, b1, b2, b3)
        dlam = _dlam(re_cl, rough, diam, b0, b1, b2, b3)
        if re < LAMINAR:
            s_val = -lam_coeff * q / rho
            ds_dq_cur = -lam_coeff / rho
        else:
            s_val = -lam / (2.0 * diam) * fabs(q) / rho * q
            ds_dq_cur = -(2.0 * fabs(q) * lam + q * q * beta * dlam) / (2.0 * diam * rho)
        ds_drho_cur = -s_val / rho
        if k > 0:
            dmass_v[k - 1, 0] = 0.5
            dmass_v[k - 1, 1] = -r * ra
            dmass_v[k - 1, 2] = 0.5
            dmass_v[k - 1, 3] = r * ra
            dmom_v[k - 1, 0] = -r * df2_drho_prev - dt * ds_drho_prev
            dmom_v[k - 1, 1] = 0.5 - r * df2_dq_prev - dt * ds_dq_prev
            dmom_v[k - 1, 2] = r * df2_drho_cur - dt * ds_drho_cur
            dmom_v[k - 1, 3] = 0.5 + r * df2_dq_cur - dt * ds_dq_cur
        df2_drho_prev = df2_drho_cur
        df2_dq_prev = df2_dq_cur
        ds_drho_prev = ds_drho_cur
        ds_dq_prev = ds_dq_cur
    return dmass, dmom


def em_span(double value, double[::1] mu_sub, double theta, double sigma,
            double h, double[::1] xi, double cutoff, bint clamp):
    cdef double p = value
    cdef double srt = sigma * sqrt(h)
    cdef Py_ssize_t i
    cdef double m, lo, hi
    for i in range(xi.shape[0]):
        p = p + theta * (mu_sub[i] - p) * h + srt * xi[i]
        if clamp:
            m = mu_sub[i + 1]
            if m > 0:
                lo = (1.0 - cutoff) * m
                hi = (1.0 + cutoff) * m
            else:
                lo = (1.0 + cutoff) * m
                hi = (1.0 - cutoff) * m
            if p < lo:
                p = lo
            elif p > hi:
                p = hi
    return p
