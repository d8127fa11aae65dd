"""Mean-reverting stochastic demand paths for the uncertain load nodes.

Real and reactive demand of a stochastic load follow independent
Ornstein-Uhlenbeck processes around a deterministic mean timeline,
discretized by explicit Euler-Maruyama substeps between the coarse solver
steps.  Every substep result is clamped into a relative band around the
mean, which keeps outliers away from the nonlinear solve.

Drift and diffusion are stated in a normalized time unit (hours by
default); the config carries the unit explicitly.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

# stepsize rule for the explicit substeps; well inside the mean-stability
# bound dt < 2/theta
SUBSTEP_FRACTION = 0.1


class StochasticError(ValueError):
    pass


@dataclass(frozen=True)
class OUPParams:
    theta: float                 # mean reversion per time unit
    sigma: float                 # diffusion per sqrt(time unit)
    cutoff: float = 0.4          # relative band half width, in [0, 1]
    time_unit_s: float = 3600.0

    def __post_init__(self):
        if self.theta <= 0:
            raise StochasticError("theta must be positive")
        if self.sigma < 0:
            raise StochasticError("sigma must be nonnegative")
        if not 0.0 <= self.cutoff <= 1.0:
            raise StochasticError("cutoff must lie in [0, 1]")
        if self.time_unit_s <= 0:
            raise StochasticError("time unit must be positive")


def apply_cutoff(value, mean, cutoff):
    """Clamp into the band between (1-c)*mean and (1+c)*mean.

    The band follows the sign of the mean; a zero mean collapses it to {0}.
    """
    value = np.asarray(value, dtype=float)
    mean = np.asarray(mean, dtype=float)
    lo = np.where(mean > 0, (1.0 - cutoff) * mean, (1.0 + cutoff) * mean)
    hi = np.where(mean > 0, (1.0 + cutoff) * mean, (1.0 - cutoff) * mean)
    return np.clip(value, lo, hi)


def em_step(value, mean, theta, sigma, h, xi):
    """One explicit step: the noise has variance h, realized as sqrt(h)*xi
    with xi standard normal."""
    return value + theta * (mean - value) * h + sigma * math.sqrt(h) * xi


def substep_count(dt_s: float, params: OUPParams, min_substeps: int = 1) -> int:
    """Substeps for one coarse step of dt_s seconds.

    The stepsize rule caps the substep at SUBSTEP_FRACTION/theta; a user
    minimum can only raise the count.  The result always satisfies the
    stability constraint dt_sub < 2/theta.
    """
    dt_units = dt_s / params.time_unit_s
    limit = SUBSTEP_FRACTION / params.theta
    n = max(int(min_substeps), 1, math.ceil(dt_units / limit - 1e-12))
    if not dt_units / n < 2.0 / params.theta:
        raise StochasticError("substep violates the stability constraint")
    return n


def em_span(value, mu_sub, theta, sigma, h, xi, cutoff, clamp=True):
    """Advance one path across a coarse step in len(xi) substeps.

    mu_sub holds the mean at the substep boundaries (len(xi)+1 values); the
    drift uses the left value of each substep, the clamp the right one.
    Pure-python reference; the compiled kernel mirrors it exactly.
    """
    p = value
    srt = sigma * math.sqrt(h)
    for i in range(len(xi)):
        p = p + theta * (mu_sub[i] - p) * h + srt * xi[i]
        if clamp:
            m = mu_sub[i + 1]
            lo, hi = ((1.0 - cutoff) * m, (1.0 + cutoff) * m) if m > 0 else \
                     ((1.0 + cutoff) * m, (1.0 - cutoff) * m)
            p = min(max(p, lo), hi)
    return p


def em_ensemble(p0, mean, theta, sigma, h, n_steps, n_paths, rng, cutoff=None):
    """Final values of n_paths independent paths with constant mean after
    n_steps substeps of size h (normalized time).  cutoff=None disables the
    clamp (used by the distribution tests)."""
    p = np.full(n_paths, float(p0))
    srt = sigma * math.sqrt(h)
    for _ in range(n_steps):
        p = p + theta * (mean - p) * h + srt * rng.standard_normal(n_paths)
        if cutoff is not None:
            p = apply_cutoff(p, mean, cutoff)
    return p


def em_trajectories(p0, mean, theta, sigma, h, n_steps, n_paths, rng, cutoff=None):
    """Like em_ensemble but keeps the whole history, shape (n_steps+1, n_paths)."""
    out = np.empty((n_steps + 1, n_paths))
    out[0] = float(p0)
    p = out[0].copy()
    srt = sigma * math.sqrt(h)
    for j in range(n_steps):
        p = p + theta * (mean - p) * h + srt * rng.standard_normal(n_paths)
        if cutoff is not None:
            p = apply_cutoff(p, mean, cutoff)
        out[j + 1] = p
    return out


def oup_mean(t, p0, mean, theta):
    """Closed-form mean of the continuous process with constant mean."""
    return mean + (p0 - mean) * np.exp(-theta * np.asarray(t, float))

def oup_variance(t, sigma, theta):
    """Closed-form variance of the continuous process."""
    return sigma**2 * (1.0 - np.exp(-2.0 * theta * np.asarray(t, float))) / (2.0 * theta)


def stream_seed(global_seed: int, node_id: str, quantity: str):
    """Deterministic, platform-independent per-stream seed material."""
    digest = hashlib.sha256(f"{node_id}\x1f{quantity}".encode()).digest()
    return [int(global_seed) & (2**64 - 1),
            int.from_bytes(digest[:8], "little"),
            int.from_bytes(digest[8:16], "little")]


def path_generator(global_seed: int, node_id: str, quantity: str):
    """Counter-based generator for one (node, quantity) stream; disjoint
    streams for distinct keys, bit-reproducible for equal ones."""
    ss = np.random.SeedSequence(stream_seed(global_seed, node_id, quantity))
    return np.random.Generator(np.random.Philox(ss))


def realize_path(mean_timeline, params: OUPParams, t_grid, p0, global_seed,
                 node_id, quantity, min_substeps_per_step=1):
    """Realized boundary samples at the coarse time points.

    mean_timeline maps absolute seconds to the mean; substeps interpolate it
    at their own times.  With sigma == 0 the deterministic setting is meant:
    the samples equal the mean timeline exactly.
    """
    from . import kernels

    t_grid = np.asarray(t_grid, dtype=float)
    out = np.empty(t_grid.shape[0])
    if params.sigma == 0.0:
        out[:] = mean_timeline(t_grid)
        return out
    rng = path_generator(global_seed, node_id, quantity)
    p = float(apply_cutoff(p0, mean_timeline(t_grid[0]), params.cutoff))
    out[0] = p
    for j in range(1, t_grid.shape[0]):
        dt_s = t_grid[j] - t_grid[j - 1]
        n = substep_count(dt_s, params, min_substeps_per_step)
        h = dt_s / params.time_unit_s / n
        t_sub = t_grid[j - 1] + np.arange(n + 1) * (dt_s / n)
        mu_sub = np.asarray(mean_timeline(t_sub), dtype=float)
        xi = rng.standard_normal(n)
        p = kernels.em_span(p, mu_sub, params.theta, params.sigma, h, xi,
                            params.cutoff, True)
        out[j] = p
    return out
