"""Pure numpy/python implementations of the hot kernels.

These are the reference implementations; the optional compiled extension
mirrors them operation for operation.
"""

from __future__ import annotations

import numpy as np

from . import gas
from .stochastic import em_span as _em_span_py

BACKEND = "python"


def box_residual(rho_p, q_p, rho_n, q_n, dt, pipe, constants):
    return gas.box_residual_parts(rho_p, q_p, rho_n, q_n, dt, pipe, constants)


def box_jacobian(rho_n, q_n, dt, pipe, constants):
    return gas.box_jacobian_parts(rho_n, q_n, dt, pipe, constants)


def em_span(value, mu_sub, theta, sigma, h, xi, cutoff, clamp=True):
    return _em_span_py(value, np.asarray(mu_sub, float), theta, sigma, h,
                       np.asarray(xi, float), cutoff, clamp)
