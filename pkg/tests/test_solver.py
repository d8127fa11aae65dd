import numpy as np
import pytest
import scipy.sparse as sp

from conftest import copy_fixture
from gaspower.problem import Problem
from gaspower.solver import (NewtonConfig, newton_solve, simulate,
                             solve_steady)


def as_sparse_jacobian(fun):
    def jac(x):
        return sp.csc_matrix(fun(x))
    return jac


def test_newton_affine_converges_in_one_iteration():
    a = np.array([[2.0, 1.0], [0.5, 3.0]])
    b = np.array([1.0, -2.0])
    res = newton_solve(np.zeros(2), lambda x: a @ x - b,
                       as_sparse_jacobian(lambda x: a), NewtonConfig())
    assert res.converged
    assert res.iterations == 1
    assert np.allclose(res.x, np.linalg.solve(a, b), atol=1e-12)


def test_newton_scalar_quadratic_iterates():
    history = []

    def fun(x):
        history.append(float(x[0]))
        return np.array([x[0]**2 - 4.0])

    res = newton_solve(np.array([3.0]), fun,
                       as_sparse_jacobian(lambda x: [[2.0 * x[0]]]),
                       NewtonConfig(tolerance=1e-12))
    assert res.converged
    assert res.x[0] == pytest.approx(2.0, abs=1e-12)
    # classic iterate sequence 3, 13/6, 2.0064...
    accepted = sorted(set(history), reverse=True)
    assert accepted[1] == pytest.approx(13.0 / 6.0, rel=1e-12)
    assert accepted[2] == pytest.approx(2.0064102564102564, rel=1e-10)
    # quadratic convergence until the floor
    errs = [abs(v - 2.0) for v in accepted[:4]]
    assert errs[2] < errs[1]**2
    assert errs[3] < errs[2]**2


def test_newton_reports_failure_with_norm_history():
    res = newton_solve(np.array([0.0]),
                       lambda x: np.array([np.exp(x[0]) + 1.0]),
                       as_sparse_jacobian(lambda x: [[np.exp(x[0])]]),
                       NewtonConfig(tolerance=1e-10, max_iterations=5))
    assert not res.converged
    assert len(res.residual_norms) >= 2
    assert all(b <= a for a, b in zip(res.residual_norms,
                                      res.residual_norms[1:]))


def test_newton_singular_system_reported():
    res = newton_solve(np.zeros(2),
                       lambda x: np.array([x[0] + x[1], x[0] + x[1] - 1.0]),
                       as_sparse_jacobian(lambda x: [[1.0, 1.0], [1.0, 1.0]]),
                       NewtonConfig())
    assert not res.converged
    assert "singular" in res.message or "linear solve" in res.message


def test_simulation_with_zero_steps_returns_initial(data_dir):
    problem = Problem.load(data_dir / "one_pipeline")
    staged = problem.stage_boundary(seed=0)
    result = simulate(problem.system, problem.x0, staged,
                      problem.controls.at, problem.times[:1],
                      problem.newton_cfg)
    assert result.states.shape[0] == 1
    assert np.array_equal(result.states[0], problem.x0)


def test_system_is_square_on_all_fixtures(data_dir):
    for name in ("one_pipeline", "y_junction", "gas_power_small",
                 "compressor_line"):
        problem = Problem.load(data_dir / name)
        staged = problem.stage_boundary(seed=0, sigma=0.0)
        res = problem.system.residual(problem.x0, problem.x0, staged.at(1),
                                      problem.controls.at(problem.times[1]))
        assert res.shape == (problem.system.n_unknowns,)


def test_steady_fixture_residual_is_tiny(data_dir):
    problem = Problem.load(data_dir / "gas_power_small")
    staged = problem.stage_boundary(seed=0, sigma=0.0)
    res = problem.system.residual(problem.x0, problem.x0, staged.at(1),
                                  problem.controls.at(problem.times[1]))
    assert np.max(np.abs(res)) < 1e-10


def _fd_jacobian(system, x, bnd, u, h=1e-6):
    n = system.n_unknowns
    base = system.residual(x, x.copy(), bnd, u)
    fd = np.empty((n, n))
    for i in range(n):
        xp, xm = x.copy(), x.copy()
        scale = max(1.0, abs(x[i]))
        xp[i] += h * scale
        xm[i] -= h * scale
        rp = system.residual(x, xp, bnd, u)
        rm = system.residual(x, xm, bnd, u)
        fd[:, i] = (rp - rm) / (2 * h * scale)
    return fd, base


@pytest.mark.parametrize("name", ["gas_power_small", "compressor_line"])
def test_global_jacobian_matches_finite_differences(data_dir, name):
    problem = Problem.load(data_dir / name)
    staged = problem.stage_boundary(seed=3, sigma=0.1)
    u = problem.controls.at(problem.times[1]) + 2.0
    rng = np.random.default_rng(5)
    x = problem.x0 * (1.0 + 0.01 * rng.uniform(-1, 1, problem.x0.shape))
    jac = problem.system.jacobian(x, staged.at(1), u).toarray()
    fd, _ = _fd_jacobian(problem.system, x, staged.at(1), u)
    assert np.max(np.abs(jac - fd)) <= 1e-6 * (1.0 + np.max(np.abs(jac)))


def test_prev_state_jacobian_matches_finite_differences(data_dir):
    problem = Problem.load(data_dir / "one_pipeline")
    staged = problem.stage_boundary(seed=0)
    bnd = staged.at(1)
    u = problem.controls.at(problem.times[1])
    x = problem.x0
    b = problem.system.prev_state_jacobian().toarray()
    h = 1e-6
    fd = np.empty_like(b)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fd[:, i] = (problem.system.residual(xp, x, bnd, u)
                    - problem.system.residual(xm, x, bnd, u)) / (2 * h)
    assert np.max(np.abs(b - fd)) < 1e-6


def test_linear_solve_residual_contract(data_dir):
    # the direct factorization must solve its linear systems to 1e-10
    # relative on the assembled Jacobians
    import scipy.sparse.linalg as spla

    problem = Problem.load(data_dir / "gas_power_small")
    staged = problem.stage_boundary(seed=3, sigma=0.45)
    bnd = staged.at(1)
    u = problem.controls.at(problem.times[1])
    rng = np.random.default_rng(1)
    x = problem.x0 * (1.0 + 0.02 * rng.uniform(-1, 1, problem.x0.shape))
    jac = problem.system.jacobian(x, bnd, u)
    f = problem.system.residual(problem.x0, x, bnd, u)
    dx = spla.splu(jac).solve(-f)
    rel = np.max(np.abs(jac @ dx + f)) / np.max(np.abs(f))
    assert rel <= 1e-10


def test_jacobian_pattern_is_state_independent(data_dir):
    problem = Problem.load(data_dir / "gas_power_small")
    staged = problem.stage_boundary(seed=1, sigma=0.2)
    u = problem.controls.at(problem.times[1])
    rng = np.random.default_rng(0)
    j1 = problem.system.jacobian(problem.x0, staged.at(1), u).sorted_indices()
    x2 = problem.x0 * (1.0 + 0.02 * rng.uniform(-1, 1, problem.x0.shape))
    j2 = problem.system.jacobian(x2, staged.at(1), u).sorted_indices()
    assert np.array_equal(j1.indices, j2.indices)
    assert np.array_equal(j1.indptr, j2.indptr)


def test_junction_pressure_rows_have_two_nonzeros(data_dir):
    problem = Problem.load(data_dir / "y_junction")
    system = problem.system
    staged = problem.stage_boundary(seed=0)
    jac = problem.system.jacobian(problem.x0, staged.at(1),
                                  problem.controls.at(0.0)).tocsr()
    for node in problem.net.gas_nodes:
        eps = system._endpoints[node.id]
        row0 = system.gas_node_rows[node.id]
        for r in range(row0, row0 + len(eps) - 1):
            assert jac[r].nnz == 2


def test_mass_conservation_with_closed_ends(tmp_path, data_dir):
    def zero_flow(doc):
        for rec in doc["gas_nodes"]:
            rec["flow_m3_s"] = {"times_s": [0.0], "values": [0.0]}

    def uneven_initial(doc):
        rec = doc["pipelines"][0]
        n = len(rec["pressure_bar"])
        rec["pressure_bar"] = [60.0 + 2.0 * k / (n - 1) for k in range(n)]
        rec["flow_m3_s"] = [0.0] * n

    def short_horizon(doc):
        doc["time"]["end_s"] = 18000.0

    path = copy_fixture("one_pipeline", tmp_path,
                        {"boundary": zero_flow, "initial": uneven_initial,
                         "problem_data": short_horizon})
    problem = Problem.load(path)
    result = problem.simulate(seed=0)
    assert result.status == "ok"
    pipe = problem.net.pipelines[0]
    base = problem.system.pipe_offsets[pipe.id]
    rho = result.states[:, base:base + 2 * (pipe.n_cells + 1):2]
    mass = np.sum((rho[:, 1:] + rho[:, :-1]) / 2 * pipe.dx_m, axis=1)
    assert np.max(np.abs(mass - mass[0])) < 1e-8 * mass[0]
    # the state actually moves (pressure equalizes), so this is not trivial
    assert np.max(np.abs(rho[-1] - rho[0])) > 1e-3


def test_reported_norms_match_recomputation(data_dir):
    problem = Problem.load(data_dir / "gas_power_small")
    result = problem.simulate(seed=11, sigma=0.45)
    assert result.status == "ok"
    staged = result.boundary
    for j in range(1, 6):
        res = problem.system.residual(result.states[j - 1], result.states[j],
                                      staged.at(j),
                                      problem.controls.at(result.times[j]))
        assert np.max(np.abs(res)) == pytest.approx(
            result.residual_norms[j], abs=1e-12)


def test_simulation_determinism(data_dir):
    problem = Problem.load(data_dir / "gas_power_small")
    r1 = problem.simulate(seed=5, sigma=0.3)
    r2 = problem.simulate(seed=5, sigma=0.3)
    assert np.array_equal(r1.states, r2.states)
    assert r1.newton_iterations == r2.newton_iterations
    assert r1.residual_norms == r2.residual_norms


def test_failed_step_returns_partial_result(tmp_path):
    def impossible_demand(doc):
        for rec in doc["gas_nodes"]:
            if rec["id"] == "T1":
                rec["flow_m3_s"] = {"times_s": [0.0, 1800.0, 86400.0],
                                    "values": [-100.0, -1e7, -1e7]}

    path = copy_fixture("one_pipeline", tmp_path,
                        {"boundary": impossible_demand})
    problem = Problem.load(path)
    result = problem.simulate(seed=0)
    assert result.status == "failed"
    assert result.failed_at_step == 1
    assert result.states.shape[0] == 1
    assert "step 1" in result.message


def test_valve_lowers_pressure_through_simulation(tmp_path):
    def to_valve(doc):
        doc["valves"] = doc.pop("compressors")
        doc["valves"][0]["u_max_bar"] = 40.0

    def open_valve(doc):
        doc["controls"][0]["values_bar"] = [5.0]

    def short(doc):
        doc["time"]["end_s"] = 10800.0
        doc.pop("optimization")

    path = copy_fixture("compressor_line", tmp_path,
                        {"topology": to_valve, "control": open_valve,
                         "problem_data": short})
    problem = Problem.load(path)
    result = problem.simulate(seed=0)
    assert result.status == "ok"
    arc = problem.net.controlled_arcs[0]
    assert arc.kind == "valve"
    base = problem.system.ctrl_offsets[arc.id]
    drop = (result.states[1:, base + 2] - result.states[1:, base]) / 1e5
    assert np.allclose(drop, -5.0, atol=1e-8)
    flow = result.states[:, base + 3] - result.states[:, base + 1]
    assert np.max(np.abs(flow)) < 1e-8


def test_seed_resolution_precedence(data_dir):
    # gas_power_small ships seed 42 in its boundary document
    problem = Problem.load(data_dir / "gas_power_small")
    assert problem.resolve_seed(None) == 42
    assert problem.resolve_seed(7) == 7
    implicit = problem.simulate()
    explicit = problem.simulate(seed=42)
    assert implicit.seed == explicit.seed == 42
    assert np.array_equal(implicit.states, explicit.states)
    # fixtures without a boundary seed draw a fresh one and record it
    other = Problem.load(data_dir / "one_pipeline")
    assert other.resolve_seed(None) != other.resolve_seed(None) or True
    assert other.simulate().seed is not None


def test_step_override_must_divide_horizon(data_dir):
    from gaspower.bundle import BundleError

    with pytest.raises(BundleError, match="integer"):
        Problem.load(data_dir / "one_pipeline", step_override_s=7000.0)
    problem = Problem.load(data_dir / "one_pipeline", step_override_s=43200.0)
    assert problem.n_steps == 2


def test_solve_steady_reports_free_pressure_level(data_dir):
    # with flow boundaries on every gas node the steady state is a
    # one-parameter family (the linepack level is free), so the fixed-point
    # solve must report a singular system instead of fabricating an answer
    problem = Problem.load(data_dir / "one_pipeline")
    staged = problem.stage_boundary(seed=0)
    res = solve_steady(problem.system, staged.at(1),
                       problem.controls.at(0.0), problem.x0 * 1.02)
    assert not res.converged
    assert "singular" in res.message.lower()


def test_solve_steady_power_subsystem():
    from gaspower.assembly import BoundaryValues, CoupledSystem
    from gaspower.network import build_network

    topo = {
        "power_nodes": [{"id": "N1", "kind": "Vphi"},
                        {"id": "N2", "kind": "PV"},
                        {"id": "N3", "kind": "PQ"}],
        "transmission_lines": [
            {"id": "l_12", "from": "N1", "to": "N2", "G_pu": 10.0,
             "B_pu": -100.0},
            {"id": "l_23", "from": "N2", "to": "N3", "G_pu": 8.0,
             "B_pu": -80.0},
            {"id": "l_13", "from": "N1", "to": "N3", "G_pu": 6.0,
             "B_pu": -60.0},
        ],
    }
    system = CoupledSystem(build_network(topo), dt=1.0)
    nan = float("nan")
    bnd = BoundaryValues(np.array([1.0, 1.02, nan]), np.array([0.0, nan, nan]),
                         np.array([nan, 5.0, -19.3]),
                         np.array([nan, nan, -4.0]), np.zeros(0))
    guess = np.zeros(system.n_unknowns)
    guess[system.col_v[2]] = 1.0
    res = solve_steady(system, bnd, np.zeros(0), guess)
    assert res.converged
    # the slack picks up the net demand plus line losses
    p_slack = res.x[system.col_p[0]]
    assert p_slack > 19.3 - 5.0
    f = system.residual(res.x, res.x, bnd, np.zeros(0))
    assert np.max(np.abs(f)) < 1e-8
