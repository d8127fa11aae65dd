import numpy as np
import pytest

from conftest import copy_fixture
from gaspower import optimization as opt
from gaspower.problem import ControlGrid, Problem, Timeline


def short_compressor_problem(tmp_path, horizon_s=21600.0, n_controls=4):
    """The compressor fixture on a reduced horizon for fast driver tests."""
    def shrink(doc):
        doc["time"]["end_s"] = horizon_s
        block = doc["optimization"]
        block["control_times_s"] = list(
            np.linspace(0.0, horizon_s, n_controls))
        block["constraints"][0]["times_s"] = [0.0, horizon_s]
        block["constraints"][0]["values_bar"] = [70.0, 78.0]

    path = copy_fixture("compressor_line", tmp_path, {"problem_data": shrink})
    return Problem.load(path)


def test_control_grid_interpolation():
    grid = ControlGrid([0.0, 100.0], [[0.0, 10.0]], ["a"], [0.0], [120.0])
    assert grid.at(0.0)[0] == 0.0
    assert grid.at(100.0)[0] == 10.0
    assert grid.at(50.0)[0] == 5.0
    w = grid.interpolation_weights(25.0)
    assert w == pytest.approx([0.75, 0.25])
    const = ControlGrid([0.0], [[7.0]], ["a"], [0.0], [120.0])
    assert const.at(12345.0)[0] == 7.0


def test_cost_values_and_homogeneity():
    times = np.arange(0, 86401, 1800, dtype=float)
    spec = opt.CostSpec(("a",))
    zero = ControlGrid([0.0], [[0.0]], ["a"], [0.0], [120.0])
    assert opt.cost_from_times(times, zero, spec) == 0.0
    one = ControlGrid([0.0], [[1.0]], ["a"], [0.0], [120.0])
    assert opt.cost_from_times(times, one, spec) == pytest.approx(86400.0)
    two = ControlGrid([0.0], [[2.0]], ["a"], [0.0], [120.0])
    assert opt.cost_from_times(times, two, spec) == pytest.approx(4 * 86400.0)


def test_uncosted_controls_have_zero_cost_gradient():
    times = np.arange(0, 7201, 1800, dtype=float)
    spec = opt.CostSpec(("a",))
    grid = ControlGrid([0.0, 7200.0], [[3.0, 4.0], [5.0, 6.0]], ["a", "b"],
                       [0.0, 0.0], [120.0, 120.0])
    grad = opt.cost_gradient_from_times(times, grid, spec)
    assert np.all(grad[0] > 0.0)
    assert np.all(grad[1] == 0.0)


def test_adjoint_matches_finite_differences(tmp_path):
    problem = short_compressor_problem(tmp_path)
    grid, cost, cons, _ = opt.specs_from_problem(problem)
    oracle = opt.ControlObjective(problem, grid, cost, cons)
    u0 = grid.values.ravel() + np.linspace(1.0, 4.0, grid.values.size)
    g0 = oracle.constraint_vector(u0)
    picks = [1, g0.shape[0] // 2, g0.shape[0] - 1]
    h = 1e-3
    fd = np.empty((len(picks), u0.size))
    for i in range(u0.size):
        up, um = u0.copy(), u0.copy()
        up[i] += h
        um[i] -= h
        gp = oracle.constraint_vector(up)
        gm = oracle.constraint_vector(um)
        fd[:, i] = (gp[picks] - gm[picks]) / (2 * h)
    for row, j in enumerate(picks):
        w = np.zeros(g0.shape[0])
        w[j] = 1.0
        adj = oracle.weighted_constraint_gradient(u0, w)
        denom = max(np.max(np.abs(fd[row])), 1e-12)
        assert np.max(np.abs(adj - fd[row])) / denom < 1e-4


def test_adjoint_requires_converged_simulation(tmp_path):
    problem = short_compressor_problem(tmp_path)
    grid, cost, cons, _ = opt.specs_from_problem(problem)
    result = problem.simulate(seed=0)
    result.status = "failed"
    with pytest.raises(opt.OptimizationError):
        opt.adjoint_gradient(problem, result, grid, [(1, np.zeros(1))])


def test_unconstrained_optimum_is_zero(tmp_path):
    problem = short_compressor_problem(tmp_path)
    grid, cost, _, driver = opt.specs_from_problem(problem)
    start = grid.with_values(grid.values + 25.0)
    res = opt.optimize(problem, grid=start, cost=cost, constraints=[],
                       driver=driver)
    assert res.status == "optimal"
    assert np.max(np.abs(res.controls.values)) < 1e-7
    assert res.cost <= 1e-10


def test_constrained_short_horizon_run(tmp_path):
    problem = short_compressor_problem(tmp_path)
    res = opt.optimize(problem)
    assert res.status == "optimal"
    assert res.audit == []
    lo, hi = res.controls.lower[0], res.controls.upper[0]
    assert np.all(res.controls.values >= lo)
    assert np.all(res.controls.values <= hi)
    # the bound rises over the horizon, so the control must do real work
    assert res.cost > 0.0
    assert res.history[-1]["violation"] <= 1e-6


def test_infeasible_bounds_reported(tmp_path):
    problem = short_compressor_problem(tmp_path)
    grid, cost, _, driver = opt.specs_from_problem(problem)
    # upper bound of the control is 120 bar; demand far more pressure
    cons = [opt.PressureConstraint(
        "T1", "lower", Timeline(np.array([0.0, problem.t_end]),
                                np.array([450.0, 450.0])))]
    fast = opt.DriverConfig(max_outer=6, max_inner=30)
    res = opt.optimize(problem, grid=grid, cost=cost, constraints=cons,
                       driver=fast)
    assert res.status == "infeasible"
    assert "violation" in res.message


def test_violation_audit_reports_between_stride_points(tmp_path):
    problem = short_compressor_problem(tmp_path)
    result = problem.simulate(seed=0)
    # pressure at the outlet sits near 72 bar the whole run; a 75 bar lower
    # bound is violated everywhere
    con = opt.PressureConstraint(
        "T1", "lower", Timeline(np.array([0.0, problem.t_end]),
                                np.array([75.0, 75.0])), stride=4)
    report = opt.constraint_violation_audit(problem, result, [con])
    assert {r["step"] for r in report} == set(range(result.n_steps + 1))
    assert all(r["violation_bar"] > 0 for r in report)


def test_exactly_attained_bound_is_feasible(tmp_path):
    problem = short_compressor_problem(tmp_path)
    result = problem.simulate(seed=0)
    p0 = problem.system.gas_node_pressure_si(result.states[0], "T1") / 1e5
    con = opt.PressureConstraint(
        "T1", "lower", Timeline(np.array([0.0]), np.array([p0])))
    report = opt.constraint_violation_audit(problem, result, [con], tol=0.0)
    assert all(r["step"] != 0 for r in report)


def test_thinned_constraints_still_audited(tmp_path):
    problem = short_compressor_problem(tmp_path)
    grid, cost, cons, driver = opt.specs_from_problem(problem)
    thinned = [opt.PressureConstraint(c.node, c.bound, c.timeline, stride=4)
               for c in cons]
    res = opt.optimize(problem, grid=grid, cost=cost, constraints=thinned,
                       driver=driver)
    assert res.status == "optimal"
    assert isinstance(res.audit, list)
    for entry in res.audit:
        assert entry["step"] % 4 != 0
