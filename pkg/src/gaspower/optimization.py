"""Optimal control of the compressor/valve settings.

The control values on their (possibly coarse) grid are the decision
variables.  Cost is the quadratic control effort integrated over the state
grid.  Pressure path constraints at gas nodes are enforced at a configurable
stride of the state steps.  Gradients of the constraints come from one
backward sweep of transposed linear solves over the time-stepping recursion;
no second derivatives are used anywhere.  The built-in driver is an
augmented-Lagrangian outer loop around a box-constrained quasi-Newton inner
solve, behind a small oracle interface an external NLP solver can consume
instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .problem import ControlGrid, Problem, Timeline
from .solver import SimulationResult


class OptimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CostSpec:
    """Which controls are penalized; the cost is, summed over them, the
    trapezoidal integral of u(t)^2 on the state grid (bar^2 s)."""

    costed_controls: tuple

    def weights(self, times: np.ndarray) -> np.ndarray:
        if times.shape[0] < 2:
            return np.zeros(times.shape[0])
        w = np.full(times.shape[0], times[1] - times[0], dtype=float)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w


@dataclass(frozen=True)
class PressureConstraint:
    """One-sided pressure bound at a gas node, linear in time between its
    knots, evaluated every `stride` state steps.  Written as g <= 0; a bound
    exactly attained is feasible."""

    node: str
    bound: str                    # "lower" | "upper"
    timeline: Timeline
    stride: int = 1

    def steps(self, n_steps: int) -> np.ndarray:
        return np.arange(0, n_steps + 1, self.stride)

    def violation(self, pressure_bar: float, t: float) -> float:
        limit = float(self.timeline(t))
        if self.bound == "lower":
            return limit - pressure_bar
        return pressure_bar - limit


@dataclass(frozen=True)
class DriverConfig:
    feasibility_tol_bar: float = 1e-6
    gradient_tol: float = 1e-6    # relative to the initial projected gradient
    max_outer: int = 30
    max_inner: int = 80
    penalty_init: float = 1.0
    penalty_growth: float = 10.0


@dataclass
class OptimizationResult:
    controls: ControlGrid
    cost: float
    status: str                   # "optimal" | "infeasible" | "stalled"
    history: list = field(default_factory=list)
    multipliers: np.ndarray | None = None
    audit: list = field(default_factory=list)
    message: str = ""


def specs_from_problem(problem: Problem):
    """Control grid, CostSpec, constraints and driver settings from the
    optimization block of the solver-settings document."""
    opt = problem.bundle.problem_data.get("optimization", {})
    cost = CostSpec(tuple(opt.get("costed_controls", [])))
    constraints = []
    for rec in opt.get("constraints", []):
        constraints.append(PressureConstraint(
            rec["node"], rec["bound"],
            Timeline(np.asarray(rec["times_s"], float),
                     np.asarray(rec["values_bar"], float)),
            int(rec.get("stride", 1))))
    driver = DriverConfig(
        feasibility_tol_bar=float(opt.get("feasibility_tol_bar", 1e-6)),
        gradient_tol=float(opt.get("gradient_tol", 1e-6)),
        max_outer=int(opt.get("max_outer", 25)),
        max_inner=int(opt.get("max_inner", 80)))
    times = opt.get("control_times_s")
    if times is not None:
        grid = problem.controls
        coarse = np.asarray(times, dtype=float)
        values = np.array([[np.interp(t, grid.times, row) for t in coarse]
                           for row in grid.values])
        controls = ControlGrid(coarse, values, grid.arc_ids, grid.lower,
                               grid.upper)
    else:
        controls = problem.controls
    return controls, cost, constraints, driver


def cost_from_times(times: np.ndarray, grid: ControlGrid,
                    spec: CostSpec) -> float:
    w = spec.weights(times)
    total = 0.0
    for i, ident in enumerate(grid.arc_ids):
        if ident not in spec.costed_controls:
            continue
        u = np.array([grid.at(t)[i] for t in times])
        total += float(np.dot(w, u * u))
    return total


def evaluate_cost(result: SimulationResult, grid: ControlGrid,
                  spec: CostSpec) -> float:
    return cost_from_times(result.times, grid, spec)


def cost_gradient_from_times(times: np.ndarray, grid: ControlGrid,
                             spec: CostSpec) -> np.ndarray:
    """Exact gradient of the cost w.r.t. the grid values; the cost does not
    depend on the states, so no adjoint sweep is involved."""
    w = spec.weights(times)
    grad = np.zeros_like(grid.values)
    costed = [i for i, ident in enumerate(grid.arc_ids)
              if ident in spec.costed_controls]
    for j, t in enumerate(times):
        hat = grid.interpolation_weights(t)
        u = grid.at(t)
        for i in costed:
            grad[i] += w[j] * 2.0 * u[i] * hat
    return grad


def constraint_values(problem: Problem, result: SimulationResult,
                      constraints) -> np.ndarray:
    """g_i <= 0 values in constraint order, flattened over strided steps."""
    out = []
    for con in constraints:
        for j in con.steps(result.n_steps):
            p = problem.system.gas_node_pressure_si(result.states[j],
                                                    con.node) / 1e5
            out.append(con.violation(p, result.times[j]))
    return np.asarray(out)


def constraint_seeds(problem: Problem, result: SimulationResult,
                     constraints, weights) -> list:
    """(step, dg/dx) seed vectors matching constraint_values order, scaled
    by the given weight per flattened constraint."""
    seeds = []
    idx = 0
    for con in constraints:
        sign = 1.0 if con.bound == "upper" else -1.0
        for j in con.steps(result.n_steps):
            w = weights[idx]
            idx += 1
            if w == 0.0 or j == 0:
                continue
            col, dp = problem.system.gas_node_pressure_seed(result.states[j],
                                                            con.node)
            vec = np.zeros(problem.system.n_unknowns)
            vec[col] = sign * dp * w
            seeds.append((j, vec))
    return seeds


def adjoint_gradient(problem: Problem, result: SimulationResult,
                     grid: ControlGrid, seeds) -> np.ndarray:
    """Gradient of sum_i g_i(x_{j_i}) w.r.t. the control grid values, the
    g_i given as (step, dg/dx) seeds.

    Walks the recursion backwards: at each step the accumulated seed is
    pushed through the transposed step Jacobian, the controlled-arc rows
    hand their share to the control interpolation weights, and the
    previous-state coupling carries the rest one step back.
    """
    if result.status != "ok":
        raise OptimizationError("adjoint needs a fully converged simulation")
    system = problem.system
    staged = result.boundary
    b_mat = system.prev_state_jacobian()
    c_mat = system.control_jacobian()
    seeds_by_step = {}
    for j, vec in seeds:
        if j == 0:
            continue   # the initial state is data, not a solver step
        acc = seeds_by_step.setdefault(int(j), np.zeros(system.n_unknowns))
        acc += vec
    grad = np.zeros_like(grid.values)
    lam_next = None
    for j in range(result.n_steps, 0, -1):
        rhs = seeds_by_step.get(j)
        if lam_next is not None:
            carry = b_mat.T @ lam_next
            rhs = carry if rhs is None else rhs + carry
        if rhs is None:
            lam_next = None
            continue
        bnd = staged.at(j)
        u = grid.at(result.times[j])
        jac = system.jacobian(result.states[j], bnd, u)
        lam = spla.splu(jac).solve(-rhs, trans="T")
        sens = c_mat.T @ lam          # d/d u(t_j), one entry per arc
        grad += np.outer(sens, grid.interpolation_weights(result.times[j]))
        lam_next = lam
    return grad


def constraint_violation_audit(problem: Problem, result: SimulationResult,
                               constraints, tol: float = 0.0) -> list:
    """Re-check every constraint at every state step (stride 1); thinning
    can hide in-between violations, so any strided optimum gets this audit.

    Returns a record per strict violation beyond tol."""
    report = []
    for con in constraints:
        for j in range(result.n_steps + 1):
            t = result.times[j]
            p = problem.system.gas_node_pressure_si(result.states[j],
                                                    con.node) / 1e5
            g = con.violation(p, t)
            if g > tol:
                report.append({
                    "node": con.node, "bound": con.bound, "step": int(j),
                    "time_s": float(t), "limit_bar": float(con.timeline(t)),
                    "pressure_bar": float(p), "violation_bar": float(g),
                })
    return report


class ControlObjective:
    """Objective/constraint oracle over the flattened control variables.

    This is the surface an external NLP driver would consume: cost value and
    gradient, constraint vector, gradients of weighted constraint sums, and
    the box bounds.  One simulation per distinct control vector is cached;
    failed trial simulations surface as None values.
    """

    def __init__(self, problem: Problem, grid: ControlGrid, cost: CostSpec,
                 constraints):
        self.problem = problem
        self.grid = grid
        self.cost = cost
        self.constraints = constraints
        self.staged = problem.stage_boundary(problem.resolve_seed(None))
        self._cache_key = None
        self._cache = None
        self.failures = 0

    @property
    def bounds(self):
        n_t = self.grid.times.shape[0]
        return (np.repeat(self.grid.lower, n_t),
                np.repeat(self.grid.upper, n_t))

    def unpack(self, u_flat: np.ndarray) -> ControlGrid:
        values = np.asarray(u_flat, float).reshape(self.grid.values.shape)
        return self.grid.with_values(values)

    def simulate(self, u_flat: np.ndarray) -> SimulationResult | None:
        key = np.asarray(u_flat, float).tobytes()
        if key == self._cache_key:
            return self._cache
        result = self.problem.run_staged(self.staged, self.unpack(u_flat))
        if result.status != "ok":
            self.failures += 1
            result = None
        self._cache_key = key
        self._cache = result
        return result

    def cost_value(self, u_flat) -> float:
        return cost_from_times(self.problem.times, self.unpack(u_flat),
                               self.cost)

    def cost_grad(self, u_flat) -> np.ndarray:
        return cost_gradient_from_times(self.problem.times,
                                        self.unpack(u_flat), self.cost).ravel()

    def constraint_vector(self, u_flat) -> np.ndarray | None:
        result = self.simulate(u_flat)
        if result is None:
            return None
        return constraint_values(self.problem, result, self.constraints)

    def weighted_constraint_gradient(self, u_flat, weights) -> np.ndarray:
        result = self.simulate(u_flat)
        if result is None:
            raise OptimizationError("gradient requested at a failed point")
        seeds = constraint_seeds(self.problem, result, self.constraints,
                                 weights)
        if not seeds:
            return np.zeros(self.grid.values.size)
        return adjoint_gradient(self.problem, result, self.unpack(u_flat),
                                seeds).ravel()


def _project(u, lo, hi):
    return np.minimum(np.maximum(u, lo), hi)


def _inner_minimize(value_fn, grad_fn, u0, lo, hi, rel_tol, max_iter):
    """Projected quasi-Newton descent with spectral steps.

    Curvature comes from gradient history only (Barzilai-Borwein); the line
    search backtracks along the projected path, and a trial whose value is
    None (failed simulation) is treated as an over-long step.  Stops when
    the projected gradient drops below rel_tol times its starting norm.
    """
    u = _project(np.asarray(u0, float), lo, hi)
    val = value_fn(u)
    if val is None:
        raise OptimizationError("simulation failed at the initial controls")
    grad = grad_fn(u)
    pg0 = float(np.max(np.abs(u - _project(u - grad, lo, hi))))
    tol = max(rel_tol * pg0, 1e-14)
    step = 1.0 / max(1.0, np.max(np.abs(grad)))
    for _ in range(max_iter):
        pg = float(np.max(np.abs(u - _project(u - grad, lo, hi))))
        if pg <= tol:
            break
        alpha = step
        accepted = False
        u_try, val_try = u, val
        for _ in range(30):
            u_try = _project(u - alpha * grad, lo, hi)
            d = u_try - u
            if float(np.max(np.abs(d))) == 0.0:
                break
            val_try = value_fn(u_try)
            if val_try is not None and val_try <= val + 1e-4 * float(grad @ d):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        grad_try = grad_fn(u_try)
        s = u_try - u
        y = grad_try - grad
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 1e-16 else \
            1.0 / max(1.0, np.max(np.abs(grad_try)))
        step = float(min(max(step, 1e-10), 1e10))
        u, val, grad = u_try, val_try, grad_try
    return u, val


def optimize(problem: Problem, grid: ControlGrid | None = None,
             cost: CostSpec | None = None, constraints=None,
             driver: DriverConfig | None = None) -> OptimizationResult:
    """Minimize the control cost subject to pressure path constraints and
    the control box bounds.

    Augmented-Lagrangian outer loop (one multiplier per node/step bound),
    projected quasi-Newton inner loop, first-order information only.  The
    boundary realization is staged once, so all trials see identical data.
    The returned controls always satisfy the box bounds exactly, and the
    stride-1 constraint audit of the final controls is attached.
    """
    defaults = specs_from_problem(problem)
    grid = grid if grid is not None else defaults[0]
    cost = cost if cost is not None else defaults[1]
    constraints = constraints if constraints is not None else defaults[2]
    driver = driver if driver is not None else defaults[3]

    oracle = ControlObjective(problem, grid, cost, constraints)
    lo, hi = oracle.bounds
    u = _project(grid.values.ravel().copy(), lo, hi)
    history = []

    if not constraints:
        # pure control-effort descent; no simulation needed until the end
        u, val = _inner_minimize(oracle.cost_value, oracle.cost_grad,
                                 u, lo, hi, 1e-12, 500)
        final = oracle.unpack(u)
        if oracle.simulate(u) is None:
            return OptimizationResult(final, float(val), "stalled", history,
                                      np.zeros(0), [],
                                      "simulation failed at the minimizer")
        history.append({"outer": 0, "cost": float(val), "violation": 0.0,
                        "penalty": 0.0})
        return OptimizationResult(final, float(val), "optimal", history,
                                  np.zeros(0), [], "unconstrained minimum")

    g0 = oracle.constraint_vector(u)
    if g0 is None:
        raise OptimizationError("simulation failed at the initial controls")
    multipliers = np.zeros(g0.shape[0])
    rho = driver.penalty_init
    prev_violation = np.inf
    violation = np.inf
    cost_val = oracle.cost_value(u)
    # merit uses the cost per unit time so the effort term and the pressure
    # penalties live on comparable scales
    horizon = max(problem.t_end - problem.t_start, 1.0)
    status, message = "stalled", "outer iteration limit reached"
    for outer in range(driver.max_outer):
        def merit_value(uv):
            g = oracle.constraint_vector(uv)
            if g is None:
                return None
            active = np.maximum(0.0, multipliers + rho * g)
            return oracle.cost_value(uv) / horizon + \
                float(np.sum(active**2 - multipliers**2)) / (2.0 * rho)

        def merit_grad(uv):
            g = oracle.constraint_vector(uv)
            active = np.maximum(0.0, multipliers + rho * g)
            return oracle.cost_grad(uv) / horizon + \
                oracle.weighted_constraint_gradient(uv, active)

        inner_tol = max(driver.gradient_tol, 1e-3 * 0.3**outer)
        u, _ = _inner_minimize(merit_value, merit_grad, u, lo, hi,
                               inner_tol, driver.max_inner)
        g = oracle.constraint_vector(u)
        cost_val = oracle.cost_value(u)
        violation = float(np.max(np.maximum(0.0, g))) if g.size else 0.0
        history.append({"outer": outer, "cost": float(cost_val),
                        "violation": violation, "penalty": float(rho)})
        if violation <= driver.feasibility_tol_bar:
            status, message = "optimal", "feasible at tolerance"
            break
        multipliers = np.maximum(0.0, multipliers + rho * g)
        if violation > 0.5 * prev_violation:
            rho = min(rho * driver.penalty_growth, 1e12)
        prev_violation = violation
    else:
        status, message = "infeasible", (
            f"violation {violation:.3e} bar after {driver.max_outer} outer "
            "iterations")

    final = oracle.unpack(u)
    result = problem.run_staged(oracle.staged, final)
    audit = []
    if result.status == "ok":
        audit = constraint_violation_audit(problem, result, constraints,
                                           driver.feasibility_tol_bar)
    return OptimizationResult(final, float(cost_val), status, history,
                              multipliers, audit, message)
