"""Runtime selection of the hot kernels.

The compiled extension is used when it imported cleanly; setting the
environment variable GASPOWER_PURE_PYTHON=1 forces the pure backend.
Both backends implement the same operations in the same order, so results
agree to the last bits up to floating-point contraction.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels
from . import gas

_ck = None
if os.environ.get("GASPOWER_PURE_PYTHON", "") != "1":
    try:
        from . import _ckernels as _ck
    except ImportError:
        _ck = None

BACKEND = "compiled" if _ck is not None else "python"


def box_residual(rho_p, q_p, rho_n, q_n, dt, pipe, constants):
    """Mass and momentum residual rows of one pipe, shape (K,) each."""
    if _ck is None:
        return _pykernels.box_residual(rho_p, q_p, rho_n, q_n, dt, pipe, constants)
    blend = gas.friction_blend_coefficients(pipe.roughness_m, pipe.diameter_m)
    return _ck.box_residual(
        np.ascontiguousarray(rho_p, dtype=float),
        np.ascontiguousarray(q_p, dtype=float),
        np.ascontiguousarray(rho_n, dtype=float),
        np.ascontiguousarray(q_n, dtype=float),
        float(dt), pipe.dx_m, pipe.area_m2, pipe.diameter_m, pipe.roughness_m,
        constants.rho0, constants.eta, constants.c_vac_sq, constants.alpha_si,
        blend[0], blend[1], blend[2], blend[3])


def box_jacobian(rho_n, q_n, dt, pipe, constants):
    """Per-cell derivative blocks (dmass, dmom), shape (K, 4) each, columns
    (rho_left, q_left, rho_right, q_right)."""
    if _ck is None:
        return _pykernels.box_jacobian(rho_n, q_n, dt, pipe, constants)
    blend = gas.friction_blend_coefficients(pipe.roughness_m, pipe.diameter_m)
    return _ck.box_jacobian(
        np.ascontiguousarray(rho_n, dtype=float),
        np.ascontiguousarray(q_n, dtype=float),
        float(dt), pipe.dx_m, pipe.area_m2, pipe.diameter_m, pipe.roughness_m,
        constants.rho0, constants.eta, constants.c_vac_sq, constants.alpha_si,
        blend[0], blend[1], blend[2], blend[3])


def em_span(value, mu_sub, theta, sigma, h, xi, cutoff, clamp=True):
    """Advance one stochastic path across a coarse step."""
    if _ck is None:
        return _pykernels.em_span(value, mu_sub, theta, sigma, h, xi, cutoff, clamp)
    return _ck.em_span(float(value),
                       np.ascontiguousarray(mu_sub, dtype=float),
                       float(theta), float(sigma), float(h),
                       np.ascontiguousarray(xi, dtype=float),
                       float(cutoff), bool(clamp))
