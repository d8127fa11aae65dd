"""Pipeline gas dynamics.

Pressure law, wall friction, flux of the 2x2 balance law in (density, flow)
variables, the implicit box discretization of a pipeline and the algebraic
relations of junctions and controlled arcs.  Everything here works in SI
units (Pa, kg/m^3, m^3/s, s); bar appears only in the public pressure
conversions and in control values, which are specified in bar.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

BAR = 1.0e5  # Pa

LAMINAR_REYNOLDS = 2000.0
TURBULENT_REYNOLDS = 4000.0
# Base of the logarithm in the turbulent friction correlation; pinned by a
# regression test.
FRICTION_LOG_BASE = 2.0


class GasModelError(ValueError):
    """Raised for physically invalid gas-model inputs."""


@dataclass(frozen=True)
class GasConstants:
    """Network-wide gas properties.

    rho0 is the density under standard conditions, c_vac the vacuum limit of
    the speed of sound, alpha_per_bar the compressibility correction of
    z(p) = 1 + alpha*p, and eta the dynamic viscosity.
    """

    rho0: float = 0.785          # kg/m^3
    c_vac: float = 364.87        # m/s
    alpha_per_bar: float = -0.00224
    eta: float = 1.0e-5          # kg/(m s)

    def __post_init__(self):
        if self.rho0 <= 0 or self.c_vac <= 0 or self.eta <= 0:
            raise GasModelError("rho0, c_vac and eta must be positive")

    @property
    def alpha_si(self) -> float:
        """Compressibility correction per Pa."""
        return self.alpha_per_bar / BAR

    @property
    def c_vac_sq(self) -> float:
        return self.c_vac * self.c_vac


def pressure_si(rho, c: GasConstants):
    """Pressure in Pa for density rho > 0."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise GasModelError("density must be positive")
    c2 = c.c_vac_sq
    return c2 * rho / (1.0 - c.alpha_si * c2 * rho)


def pressure_derivative_si(rho, c: GasConstants):
    """dp/drho in Pa/(kg/m^3); the square of the local sound speed."""
    rho = np.asarray(rho, dtype=float)
    c2 = c.c_vac_sq
    denom = 1.0 - c.alpha_si * c2 * rho
    return c2 / (denom * denom)


def pressure_of_density(rho, c: GasConstants):
    """Pressure in bar for density rho in kg/m^3."""
    return pressure_si(rho, c) / BAR


def density_of_pressure(p_bar, c: GasConstants):
    """Density in kg/m^3 for pressure in bar; inverse of pressure_of_density."""
    p_bar = np.asarray(p_bar, dtype=float)
    z = 1.0 + c.alpha_per_bar * p_bar
    if np.any(z <= 0):
        raise GasModelError("compressibility factor z(p) must be positive")
    p_si = p_bar * BAR
    return p_si / (c.c_vac_sq * (1.0 + c.alpha_si * p_si))


def reynolds(q, pipe, c: GasConstants):
    """Reynolds number of volumetric flow q through a pipe (diameter based)."""
    q = np.asarray(q, dtype=float)
    return pipe.diameter_m / (pipe.area_m2 * c.eta) * c.rho0 * np.abs(q)


def swamee_jain(re, rough, diam):
    """Turbulent friction factor; valid for re > 0."""
    re = np.asarray(re, dtype=float)
    x = rough / (3.7 * diam) + 5.74 / re**0.9
    ld = np.log(x) / np.log(FRICTION_LOG_BASE)
    return 0.25 / (ld * ld)


def swamee_jain_derivative(re, rough, diam):
    re = np.asarray(re, dtype=float)
    x = rough / (3.7 * diam) + 5.74 / re**0.9
    ld = np.log(x) / np.log(FRICTION_LOG_BASE)
    dx_dre = -0.9 * 5.74 * re**-1.9
    dld_dre = dx_dre / (x * np.log(FRICTION_LOG_BASE))
    return -0.5 / (ld * ld * ld) * dld_dre


@functools.lru_cache(maxsize=None)
def friction_blend_coefficients(rough: float, diam: float) -> tuple:
    """Cubic (in s = (Re-2000)/2000) joining the laminar and turbulent
    branches with matching value and slope at Re = 2000 and Re = 4000."""
    a = 64.0 / LAMINAR_REYNOLDS
    ma = -64.0 / LAMINAR_REYNOLDS**2 * (TURBULENT_REYNOLDS - LAMINAR_REYNOLDS)
    b = float(swamee_jain(TURBULENT_REYNOLDS, rough, diam))
    mb = float(swamee_jain_derivative(TURBULENT_REYNOLDS, rough, diam)) * (
        TURBULENT_REYNOLDS - LAMINAR_REYNOLDS
    )
    c2 = 3.0 * (b - a) - 2.0 * ma - mb
    c3 = -2.0 * (b - a) + ma + mb
    return (a, ma, c2, c3)


def friction_factor(re, pipe):
    """Darcy friction factor: laminar 64/Re, turbulent Swamee-Jain, cubic
    blend in between.  C1 on (0, inf)."""
    re = np.asarray(re, dtype=float)
    if np.any(re < 0):
        raise GasModelError("Reynolds number must be nonnegative")
    c0, c1, c2, c3 = friction_blend_coefficients(pipe.roughness_m, pipe.diameter_m)
    re_safe = np.where(re > 0, re, 1.0)
    lam = 64.0 / re_safe
    s = (re - LAMINAR_REYNOLDS) / (TURBULENT_REYNOLDS - LAMINAR_REYNOLDS)
    blend = c0 + s * (c1 + s * (c2 + s * c3))
    turb = swamee_jain(re_safe, pipe.roughness_m, pipe.diameter_m)
    out = np.where(
        re < LAMINAR_REYNOLDS, lam, np.where(re > TURBULENT_REYNOLDS, turb, blend)
    )
    return np.where(re > 0, out, np.inf)


def friction_factor_derivative(re, pipe):
    """d(friction factor)/d(Re), piecewise like friction_factor."""
    re = np.asarray(re, dtype=float)
    c0, c1, c2, c3 = friction_blend_coefficients(pipe.roughness_m, pipe.diameter_m)
    re_safe = np.where(re > 0, re, 1.0)
    dlam = -64.0 / (re_safe * re_safe)
    s = (re - LAMINAR_REYNOLDS) / (TURBULENT_REYNOLDS - LAMINAR_REYNOLDS)
    dblend = (c1 + s * (2.0 * c2 + s * 3.0 * c3)) / (
        TURBULENT_REYNOLDS - LAMINAR_REYNOLDS
    )
    dturb = swamee_jain_derivative(re_safe, pipe.roughness_m, pipe.diameter_m)
    return np.where(
        re < LAMINAR_REYNOLDS, dlam, np.where(re > TURBULENT_REYNOLDS, dturb, dblend)
    )


def source_term(rho, q, pipe, c: GasConstants):
    """Friction source of the momentum equation.

    The laminar branch is evaluated in the combined form
    -32*A*eta/(d^2*rho0) * q/rho, which is the exact limit of
    -lambda(q)/(2d) * |q|/rho * q and avoids 0/0 at q = 0.
    """
    rho = np.asarray(rho, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(rho <= 0):
        raise GasModelError("density must be positive")
    re = reynolds(q, pipe, c)
    lam_coeff = 32.0 * pipe.area_m2 * c.eta / (pipe.diameter_m**2 * c.rho0)
    s_lam = -lam_coeff * q / rho
    lam = friction_factor(np.where(re >= LAMINAR_REYNOLDS, re, LAMINAR_REYNOLDS), pipe)
    s_turb = -lam / (2.0 * pipe.diameter_m) * np.abs(q) / rho * q
    return np.where(re < LAMINAR_REYNOLDS, s_lam, s_turb)


def source_term_derivatives(rho, q, pipe, c: GasConstants):
    """(dS/drho, dS/dq) of source_term."""
    rho = np.asarray(rho, dtype=float)
    q = np.asarray(q, dtype=float)
    re = reynolds(q, pipe, c)
    beta = pipe.diameter_m / (pipe.area_m2 * c.eta) * c.rho0
    lam_coeff = 32.0 * pipe.area_m2 * c.eta / (pipe.diameter_m**2 * c.rho0)
    s = source_term(rho, q, pipe, c)
    ds_drho = -s / rho
    re_cl = np.where(re >= LAMINAR_REYNOLDS, re, LAMINAR_REYNOLDS)
    lam = friction_factor(re_cl, pipe)
    dlam = friction_factor_derivative(re_cl, pipe)
    ds_dq_turb = -(2.0 * np.abs(q) * lam + q * q * beta * dlam) / (
        2.0 * pipe.diameter_m * rho
    )
    ds_dq = np.where(re < LAMINAR_REYNOLDS, -lam_coeff / rho, ds_dq_turb)
    return ds_drho, ds_dq


def pipe_flux(rho, q, pipe, c: GasConstants):
    """Flux of the balance law: (rho0/A q, A/rho0 p(rho) + rho0/A q^2/rho)."""
    rho = np.asarray(rho, dtype=float)
    q = np.asarray(q, dtype=float)
    r = c.rho0 / pipe.area_m2
    f1 = r * q
    f2 = pressure_si(rho, c) / r + r * q * q / rho
    return f1, f2


def flux_eigenvalues(rho, q, pipe, c: GasConstants):
    """Characteristic speeds (v - a, v + a) of the flux Jacobian, with v the
    gas velocity and a the local sound speed."""
    rho = np.asarray(rho, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(rho <= 0):
        raise GasModelError("density must be positive")
    v = c.rho0 / pipe.area_m2 * q / rho
    a = np.sqrt(pressure_derivative_si(rho, c))
    return v - a, v + a


def min_characteristic_speed(rho, q, pipe, c: GasConstants):
    lo, hi = flux_eigenvalues(rho, q, pipe, c)
    return np.minimum(np.abs(lo), np.abs(hi))


@dataclass(frozen=True)
class CflViolation:
    grid_point: int
    min_speed: float
    required_dt: float


def check_inverse_cfl(rho, q, dt, pipe, c: GasConstants) -> list:
    """The box scheme needs dt > dx/(2*Lambda) at every grid point, Lambda
    being the smallest characteristic speed magnitude.  Returns the points
    where this fails (diagnostic only; large time steps are the valid
    regime, small ones or transonic states break the scheme)."""
    speeds = np.atleast_1d(min_characteristic_speed(rho, q, pipe, c))
    required = pipe.dx_m / (2.0 * speeds)
    bad = np.nonzero(~(dt > required))[0]
    return [CflViolation(int(k), float(speeds[k]), float(required[k])) for k in bad]


def box_residual_parts(rho_prev, q_prev, rho_next, q_next, dt, pipe, c: GasConstants):
    """Residual of the implicit box step, split into the mass and momentum
    rows of each of the K cells.

    For each cell k the residual is
        (u*_k + u*_{k-1})/2 - (u_k + u_{k-1})/2
        + dt/dx * (f(u*_k) - f(u*_{k-1})) - dt * (g(u*_k) + g(u*_{k-1}))
    with starred values at the new time level.  The source quadrature uses
    the plain sum of the endpoint values.
    """
    rho_n = np.asarray(rho_next, dtype=float)
    q_n = np.asarray(q_next, dtype=float)
    rho_p = np.asarray(rho_prev, dtype=float)
    q_p = np.asarray(q_prev, dtype=float)
    if rho_n.shape != rho_p.shape or q_n.shape != q_p.shape:
        raise GasModelError("previous and next states must share the grid")
    if np.any(rho_n <= 0):
        k = rho_n.shape[0]
        return np.full(k - 1, np.nan), np.full(k - 1, np.nan)
    r = dt / pipe.dx_m
    f1, f2 = pipe_flux(rho_n, q_n, pipe, c)
    g2 = source_term(rho_n, q_n, pipe, c)
    mass = 0.5 * (rho_n[1:] + rho_n[:-1]) - 0.5 * (rho_p[1:] + rho_p[:-1]) + r * (
        f1[1:] - f1[:-1]
    )
    mom = (
        0.5 * (q_n[1:] + q_n[:-1])
        - 0.5 * (q_p[1:] + q_p[:-1])
        + r * (f2[1:] - f2[:-1])
        - dt * (g2[1:] + g2[:-1])
    )
    return mass, mom


def box_jacobian_parts(rho_next, q_next, dt, pipe, c: GasConstants):
    """Partial derivatives of box_residual_parts w.r.t. the new state.

    Returns (dmass, dmom), each of shape (K, 4) with columns ordered
    (rho_left, q_left, rho_right, q_right) per cell.
    """
    rho_n = np.asarray(rho_next, dtype=float)
    q_n = np.asarray(q_next, dtype=float)
    kk = rho_n.shape[0] - 1
    r = dt / pipe.dx_m
    ra = c.rho0 / pipe.area_m2
    dp = pressure_derivative_si(rho_n, c)
    df2_drho = dp / ra - ra * q_n * q_n / (rho_n * rho_n)
    df2_dq = ra * 2.0 * q_n / rho_n
    ds_drho, ds_dq = source_term_derivatives(rho_n, q_n, pipe, c)
    dmass = np.empty((kk, 4))
    dmass[:, 0] = 0.5
    dmass[:, 1] = -r * ra
    dmass[:, 2] = 0.5
    dmass[:, 3] = r * ra
    dmom = np.empty((kk, 4))
    dmom[:, 0] = -r * df2_drho[:-1] - dt * ds_drho[:-1]
    dmom[:, 1] = 0.5 - r * df2_dq[:-1] - dt * ds_dq[:-1]
    dmom[:, 2] = r * df2_drho[1:] - dt * ds_drho[1:]
    dmom[:, 3] = 0.5 + r * df2_dq[1:] - dt * ds_dq[1:]
    return dmass, dmom


def box_scheme_residual(state_prev, state_next, dt, pipe, c: GasConstants):
    """Interleaved residual vector (mass_1, mom_1, ..., mass_K, mom_K)."""
    mass, mom = box_residual_parts(
        state_prev[0], state_prev[1], state_next[0], state_next[1], dt, pipe, c
    )
    out = np.empty(2 * mass.shape[0])
    out[0::2] = mass
    out[1::2] = mom
    return out


def box_scheme_jacobian(state_next, dt, pipe, c: GasConstants):
    """Dense Jacobian of box_scheme_residual w.r.t. the interleaved new
    state (rho_0, q_0, ..., rho_K, q_K); shape (2K, 2K+2)."""
    rho_n, q_n = state_next
    dmass, dmom = box_jacobian_parts(rho_n, q_n, dt, pipe, c)
    kk = dmass.shape[0]
    jac = np.zeros((2 * kk, 2 * (kk + 1)))
    for cell in range(kk):
        cols = slice(2 * cell, 2 * cell + 4)
        jac[2 * cell, cols] = dmass[cell]
        jac[2 * cell + 1, cols] = dmom[cell]
    return jac


def junction_residual(signs, pressures, flows, q_node):
    """Coupling residuals of one gas node.

    Takes the incident boundary values in a fixed order (the assembly sorts
    by arc id): equality of every pressure against the first one, then the
    flow balance q_node - sum(s_e * q_e).
    """
    signs = np.asarray(signs, dtype=float)
    pressures = np.asarray(pressures, dtype=float)
    flows = np.asarray(flows, dtype=float)
    if pressures.size == 0:
        raise GasModelError("gas node has no incident arcs")
    out = np.empty(pressures.size)
    out[:-1] = pressures[1:] - pressures[0]
    out[-1] = q_node - float(np.dot(signs, flows))
    return out


def controlled_arc_residual(kind: str, p_in, p_out, q_in, q_out, u_bar):
    """Compressor/valve relations: flow passes through unchanged and the
    control u (bar) raises (compressor) or lowers (valve) the pressure."""
    u_si = u_bar * BAR
    if kind == "compressor":
        dp = p_out - p_in - u_si
    elif kind == "valve":
        dp = p_out - p_in + u_si
    else:
        raise GasModelError(f"unknown controlled arc kind {kind!r}")
    return q_out - q_in, dp


def steady_pipe_profile(pipe, c: GasConstants, q, rho_start, direction=1):
    """Density profile with constant flow q satisfying the discrete steady
    balance of the box scheme cell by cell.

    direction=+1 marches from the inlet (x=0), -1 from the outlet (x=L).
    Used to construct initial states that a transient run preserves.
    """
    from scipy.optimize import brentq

    kk = pipe.n_cells
    rho = np.empty(kk + 1)
    idx = 0 if direction > 0 else kk
    rho[idx] = rho_start
    ra = c.rho0 / pipe.area_m2

    def cell_balance(rho_a, rho_b):
        # flux difference across the cell minus dx times the source sum
        fa = pressure_si(rho_a, c) / ra + ra * q * q / rho_a
        fb = pressure_si(rho_b, c) / ra + ra * q * q / rho_b
        sa = source_term(rho_a, q, pipe, c)
        sb = source_term(rho_b, q, pipe, c)
        return fb - fa - pipe.dx_m * (sa + sb)

    for step in range(kk):
        if direction > 0:
            known = rho[step]
            fun = lambda x: cell_balance(known, x)
        else:
            known = rho[kk - step]
            fun = lambda x: cell_balance(x, known)
        lo, hi = known * 0.5, known * 2.0
        flo, fhi = fun(lo), fun(hi)
        for _ in range(60):
            if flo * fhi <= 0:
                break
            lo *= 0.9
            hi *= 1.1
            flo, fhi = fun(lo), fun(hi)
        else:
            raise GasModelError("no steady profile bracket found")
        val = brentq(fun, lo, hi, xtol=1e-13, rtol=1e-15)
        if direction > 0:
            rho[step + 1] = val
        else:
            rho[kk - step - 1] = val
    return rho
