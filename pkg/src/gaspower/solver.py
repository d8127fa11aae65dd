"""Damped Newton solve of the coupled system and the time-stepping loop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from . import gas
from .assembly import BoundaryValues, CoupledSystem


@dataclass(frozen=True)
class NewtonConfig:
    tolerance: float = 1e-8        # infinity norm of the scaled residual
    max_iterations: int = 50
    max_step_halvings: int = 8

    def __post_init__(self):
        if self.tolerance <= 0 or self.max_iterations < 1:
            raise ValueError("invalid Newton configuration")


@dataclass
class NewtonResult:
    converged: bool
    x: np.ndarray
    iterations: int
    residual_norms: list
    message: str = ""


def newton_solve(x0, residual_fn, jacobian_fn, cfg: NewtonConfig) -> NewtonResult:
    """Newton iteration with simple backtracking: the step is halved while
    the residual norm does not decrease, at most max_step_halvings times,
    after which the smallest finite step is taken anyway."""
    x = np.array(x0, dtype=float)
    f = residual_fn(x)
    norm = float(np.max(np.abs(f))) if f.size else 0.0
    norms = [norm]
    if not np.isfinite(norm):
        return NewtonResult(False, x, 0, norms, "non-finite residual at start")
    for it in range(1, cfg.max_iterations + 1):
        if norm <= cfg.tolerance:
            return NewtonResult(True, x, it - 1, norms)
        try:
            lu = spla.splu(jacobian_fn(x))
        except RuntimeError as exc:
            return NewtonResult(False, x, it - 1, norms,
                                f"linear solve failed: {exc}")
        dx = lu.solve(-f)
        if not np.all(np.isfinite(dx)):
            return NewtonResult(False, x, it - 1, norms,
                                "non-finite Newton direction")
        step = 1.0
        chosen = None
        for _ in range(cfg.max_step_halvings + 1):
            x_try = x + step * dx
            f_try = residual_fn(x_try)
            n_try = float(np.max(np.abs(f_try))) if f_try.size else 0.0
            if np.isfinite(n_try):
                chosen = (x_try, f_try, n_try)
                if n_try < norm:
                    break
            step *= 0.5
        if chosen is None:
            return NewtonResult(False, x, it, norms, "non-finite residual")
        x, f, norm = chosen
        norms.append(norm)
    converged = norm <= cfg.tolerance
    return NewtonResult(converged, x, cfg.max_iterations, norms,
                        "" if converged else "iteration limit reached")


@dataclass
class SimulationResult:
    """States and diagnostics of one transient run.

    states[j] is the solved unknown vector at time times[j]; on failure the
    arrays stop at the last solved step and failed_at_step names the first
    unsolved one.
    """

    times: np.ndarray
    states: np.ndarray
    newton_iterations: list
    residual_norms: list
    cfl_violations: list            # (step, pipe id, grid point) triples
    status: str = "ok"
    failed_at_step: int | None = None
    message: str = ""
    seed: int | None = None
    config_digest: str = ""
    boundary: object = None         # StagedBoundary used for the run

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1


class StagedBoundary:
    """Per-step boundary values for the whole horizon."""

    def __init__(self, v_fix, phi_fix, p_fix, q_fix, gas_flow):
        self.v_fix = v_fix
        self.phi_fix = phi_fix
        self.p_fix = p_fix
        self.q_fix = q_fix
        self.gas_flow = gas_flow

    def at(self, j: int) -> BoundaryValues:
        return BoundaryValues(self.v_fix[j], self.phi_fix[j], self.p_fix[j],
                              self.q_fix[j], self.gas_flow[j])


def simulate(system: CoupledSystem, x0, staged: StagedBoundary, controls_at,
             times, cfg: NewtonConfig) -> SimulationResult:
    """March the coupled system over the given time points.

    controls_at(t) returns the control vector in bar.  Each step warm-starts
    from the previous solution; identical inputs reproduce identical iterate
    sequences.  On a failed step the partial result is returned with status
    'failed'.
    """
    times = np.asarray(times, dtype=float)
    n_steps = times.shape[0] - 1
    states = np.empty((n_steps + 1, system.n_unknowns))
    states[0] = x0
    iterations = [0]
    norms = [0.0]
    cfl = []
    for j in range(1, n_steps + 1):
        bnd = staged.at(j)
        u = controls_at(times[j])
        x_prev = states[j - 1]
        res = newton_solve(
            x_prev,
            lambda x: system.residual(x_prev, x, bnd, u),
            lambda x: system.jacobian(x, bnd, u),
            cfg)
        if not res.converged:
            return SimulationResult(
                times[:j], states[:j], iterations, norms, cfl,
                status="failed", failed_at_step=j,
                message=f"Newton did not converge at step {j} "
                        f"(t = {times[j]:.6g} s): {res.message or 'no progress'}",
            )
        states[j] = res.x
        iterations.append(res.iterations)
        norms.append(res.residual_norms[-1])
        for pipe in system.net.pipelines:
            rho, q = system.pipe_state(res.x, pipe)
            for v in gas.check_inverse_cfl(rho, q, system.dt, pipe,
                                           system.net.constants):
                cfl.append((j, pipe.id, v.grid_point))
    return SimulationResult(times, states, iterations, norms, cfl)


def solve_steady(system: CoupledSystem, bnd: BoundaryValues, u_bar, x_guess,
                 cfg: NewtonConfig | None = None) -> NewtonResult:
    """Fixed point of the time step map: solve F(x, x) = 0."""
    cfg = cfg or NewtonConfig()
    return newton_solve(
        np.asarray(x_guess, dtype=float),
        lambda x: system.residual(x, x, bnd, u_bar),
        lambda x: system.jacobian(x, bnd, u_bar) + system.prev_state_jacobian(),
        cfg)
