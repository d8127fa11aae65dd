#!/usr/bin/env python3
"""Generate the desk-scale problem directories under data/.

Each fixture gets a steady initial state constructed to solver precision
(per-cell root finding along the pipes, a Newton solve of the power
subsystem), so a deterministic transient run preserves it.  Run from the
repository root:  python scripts/make_fixtures.py
"""

import json
import sys
from pathlib import Path

import numpy as np

from gaspower import gas
from gaspower.assembly import BoundaryValues, CoupledSystem
from gaspower.gas import BAR, GasConstants, density_of_pressure, steady_pipe_profile
from gaspower.network import build_network
from gaspower.problem import Problem
from gaspower.solver import solve_steady

ROOT = Path(__file__).resolve().parents[1]
HORIZON = {"start_s": 0.0, "end_s": 86400.0, "step_s": 1800.0}
NEWTON = {"tolerance": 1e-9, "max_iterations": 50, "max_step_halvings": 8}

E_POWER_TO_GAS = 43.56729
E_GAS_TO_POWER = 12.56
KAPPA = 60.0


def constant(value):
    return {"times_s": [0.0], "values": [float(value)]}


def pipe_initial(pipe_id, dx, rho, q, constants):
    n = rho.shape[0]
    return {
        "id": pipe_id,
        "x_m": [k * dx for k in range(n)],
        "pressure_bar": list(gas.pressure_si(rho, constants) / BAR),
        "flow_m3_s": [float(q)] * n,
    }


def write_problem(name, problem_data, topology, boundary, initial, control):
    directory = ROOT / "data" / name / "problem"
    directory.mkdir(parents=True, exist_ok=True)
    for fname, doc in (("problem_data", problem_data), ("topology", topology),
                       ("boundary", boundary), ("initial", initial),
                       ("control", control)):
        (directory / f"{fname}.json").write_text(json.dumps(doc, indent=1) + "\n")
    return ROOT / "data" / name


def verify_steady(path, tol=2e-9):
    """The written initial state must be a fixed point of the step map."""
    problem = Problem.load(path)
    staged = problem.stage_boundary(seed=0, sigma=0.0)
    res = problem.system.residual(problem.x0, problem.x0, staged.at(1),
                                  problem.controls.at(problem.times[1]))
    worst = float(np.max(np.abs(res)))
    print(f"  {path.name}: steady residual {worst:.3e}")
    if worst > tol:
        raise SystemExit(f"fixture {path.name} is not steady (|F| = {worst:.3e})")


def make_one_pipeline():
    constants = GasConstants()
    flow = 100.0
    topology = {
        "id": "one_pipeline",
        "gas_nodes": [{"id": "S1", "kind": "source"},
                      {"id": "T1", "kind": "sink"}],
        "pipelines": [{"id": "p_br1", "from": "S1", "to": "T1",
                       "length_m": 10000.0, "diameter_m": 0.8,
                       "roughness_m": 1e-4, "target_dx_m": 1000.0}],
    }
    net = build_network(topology)
    pipe = net.pipelines[0]
    rho = steady_pipe_profile(pipe, constants, flow,
                              density_of_pressure(60.0, constants))
    boundary = {
        "gas_nodes": [{"id": "S1", "flow_m3_s": constant(flow)},
                      {"id": "T1", "flow_m3_s": constant(-flow)}],
    }
    initial = {"pipelines": [pipe_initial("p_br1", pipe.dx_m, rho, flow,
                                          constants)]}
    control = {"times_s": [0.0], "controls": []}
    return write_problem("one_pipeline", {"time": HORIZON, "newton": NEWTON},
                         topology, boundary, initial, control)


def make_y_junction():
    constants = GasConstants()
    qa, qb = 60.0, 60.0
    topology = {
        "id": "y_junction",
        "gas_nodes": [{"id": "S1", "kind": "source"},
                      {"id": "S2", "kind": "source"},
                      {"id": "J1", "kind": "junction"},
                      {"id": "T1", "kind": "sink"}],
        "pipelines": [
            {"id": "p_a", "from": "S1", "to": "J1", "length_m": 8000.0,
             "diameter_m": 0.8, "roughness_m": 1e-4, "target_dx_m": 1000.0},
            {"id": "p_b", "from": "S2", "to": "J1", "length_m": 6000.0,
             "diameter_m": 0.7, "roughness_m": 1e-4, "target_dx_m": 1000.0},
            {"id": "p_c", "from": "J1", "to": "T1", "length_m": 9000.0,
             "diameter_m": 0.9, "roughness_m": 1e-4, "target_dx_m": 1000.0},
        ],
    }
    net = build_network(topology)
    rho_j = density_of_pressure(60.0, constants)
    pa, pb, pc = net.pipelines
    rho_a = steady_pipe_profile(pa, constants, qa, rho_j, direction=-1)
    rho_b = steady_pipe_profile(pb, constants, qb, rho_j, direction=-1)
    rho_c = steady_pipe_profile(pc, constants, qa + qb, rho_j, direction=+1)
    boundary = {
        "gas_nodes": [{"id": "S1", "flow_m3_s": constant(qa)},
                      {"id": "S2", "flow_m3_s": constant(qb)},
                      {"id": "T1", "flow_m3_s": constant(-(qa + qb))}],
    }
    initial = {"pipelines": [
        pipe_initial("p_a", pa.dx_m, rho_a, qa, constants),
        pipe_initial("p_b", pb.dx_m, rho_b, qb, constants),
        pipe_initial("p_c", pc.dx_m, rho_c, qa + qb, constants),
    ]}
    control = {"times_s": [0.0], "controls": []}
    return write_problem("y_junction", {"time": HORIZON, "newton": NEWTON},
                         topology, boundary, initial, control)


def solve_power_subsystem(topology, v_fix, phi_fix, p_fix, q_fix):
    """Steady power-flow solution of the power part alone."""
    power_only = {"power_nodes": topology["power_nodes"],
                  "transmission_lines": topology["transmission_lines"]}
    net = build_network(power_only)
    system = CoupledSystem(net, dt=1.0)
    bnd = BoundaryValues(np.asarray(v_fix, float), np.asarray(phi_fix, float),
                         np.asarray(p_fix, float), np.asarray(q_fix, float),
                         np.zeros(0))
    guess = np.zeros(system.n_unknowns)
    for k, node in enumerate(net.power_nodes):
        if system.col_v[k] >= 0:
            guess[system.col_v[k]] = 1.0
    res = solve_steady(system, bnd, np.zeros(0), guess)
    if not res.converged:
        raise SystemExit("power subsystem did not converge")
    return net, system, res.x


def make_gas_power_small():
    constants = GasConstants()
    nan = float("nan")
    topology = {
        "id": "gas_power_small",
        "power_nodes": [
            {"id": "N1", "kind": "Vphi", "G_pu": 0.0, "B_pu": 0.0},
            {"id": "N2", "kind": "PV", "G_pu": 0.0, "B_pu": 0.0},
            {"id": "N3", "kind": "StochasticPQ", "G_pu": 0.0, "B_pu": 0.0},
        ],
        "transmission_lines": [
            {"id": "l_12", "from": "N1", "to": "N2", "G_pu": 10.0, "B_pu": -100.0},
            {"id": "l_23", "from": "N2", "to": "N3", "G_pu": 8.0, "B_pu": -80.0},
            {"id": "l_13", "from": "N1", "to": "N3", "G_pu": 6.0, "B_pu": -60.0},
        ],
        "gas_nodes": [{"id": "S1", "kind": "source"},
                      {"id": "ld1", "kind": "sink"}],
        "pipelines": [{"id": "p_br71", "from": "S1", "to": "ld1",
                       "length_m": 20000.0, "diameter_m": 0.9,
                       "roughness_m": 1e-4, "target_dx_m": 2000.0}],
        "conversion_arcs": [{"id": "conv1", "gas_node": "ld1",
                             "power_node": "N1",
                             "E_power_to_gas_MW_s_m3": E_POWER_TO_GAS,
                             "E_gas_to_power_MW_s_m3": E_GAS_TO_POWER,
                             "kappa_m3_s": KAPPA}],
    }
    mean_p, mean_q = -19.3, -4.0
    pv_p, pv_v = 5.0, 1.02
    _, psystem, px = solve_power_subsystem(
        topology,
        v_fix=[1.0, pv_v, nan], phi_fix=[0.0, nan, nan],
        p_fix=[nan, pv_p, mean_p], q_fix=[nan, nan, mean_q])
    p_slack = float(px[psystem.col_p[0]])
    q_slack = float(px[psystem.col_q[0]])
    q_pv = float(px[psystem.col_q[1]])
    phi_pv = float(px[psystem.col_phi[1]])
    v_pq = float(px[psystem.col_v[2]])
    phi_pq = float(px[psystem.col_phi[2]])
    flow_conv = p_slack * 100.0 / E_GAS_TO_POWER
    if flow_conv <= KAPPA:
        raise SystemExit("fixture should sit on the gas-to-power branch")

    net = build_network(topology)
    pipe = net.pipelines[0]
    rho = steady_pipe_profile(pipe, constants, flow_conv,
                              density_of_pressure(60.0, constants),
                              direction=-1)
    boundary = {
        "seed": 42,
        "power_nodes": [
            {"id": "N1", "V_pu": constant(1.0), "phi_rad": constant(0.0)},
            {"id": "N2", "P_pu": constant(pv_p), "V_pu": constant(pv_v)},
            {"id": "N3", "P_pu": constant(mean_p), "Q_pu": constant(mean_q),
             "uncertainty": {"theta": 3.0, "sigma": 0.45, "cutoff": 0.4,
                             "time_unit_s": 3600.0}},
        ],
        "gas_nodes": [{"id": "S1", "flow_m3_s": constant(flow_conv)},
                      {"id": "ld1", "flow_m3_s": constant(0.0)}],
    }
    initial = {
        "power_nodes": [
            {"id": "N1", "V_pu": 1.0, "phi_rad": 0.0, "P_pu": p_slack,
             "Q_pu": q_slack},
            {"id": "N2", "V_pu": pv_v, "phi_rad": phi_pv, "P_pu": pv_p,
             "Q_pu": q_pv},
            {"id": "N3", "V_pu": v_pq, "phi_rad": phi_pq, "P_pu": mean_p,
             "Q_pu": mean_q},
        ],
        "pipelines": [pipe_initial("p_br71", pipe.dx_m, rho, flow_conv,
                                   constants)],
        "conversion_arcs": [{"id": "conv1", "flow_m3_s": flow_conv}],
    }
    control = {"times_s": [0.0], "controls": []}
    problem_data = {"time": HORIZON, "newton": NEWTON,
                    "stochastic": {"min_substeps_total": 1000,
                                   "time_unit_s": 3600.0}}
    return write_problem("gas_power_small", problem_data, topology, boundary,
                         initial, control)


def make_compressor_line():
    constants = GasConstants()
    flow = 80.0
    outlet_bar = 72.0
    topology = {
        "id": "compressor_line",
        "gas_nodes": [{"id": "S1", "kind": "source"},
                      {"id": "J1", "kind": "junction"},
                      {"id": "J2", "kind": "junction"},
                      {"id": "T1", "kind": "sink"}],
        "pipelines": [
            {"id": "p_up", "from": "S1", "to": "J1", "length_m": 20000.0,
             "diameter_m": 1.0, "roughness_m": 1e-4, "target_dx_m": 2000.0},
            {"id": "p_down", "from": "J2", "to": "T1", "length_m": 3000.0,
             "diameter_m": 0.6, "roughness_m": 1e-4, "target_dx_m": 750.0},
        ],
        "compressors": [{"id": "comp1", "from": "J1", "to": "J2",
                         "u_min_bar": 0.0, "u_max_bar": 120.0}],
    }
    net = build_network(topology)
    p_up, p_down = net.pipelines
    rho_down = steady_pipe_profile(p_down, constants, flow,
                                   density_of_pressure(outlet_bar, constants),
                                   direction=-1)
    p_j2 = float(gas.pressure_si(rho_down[0], constants))
    rho_up = steady_pipe_profile(p_up, constants, flow,
                                 density_of_pressure(p_j2 / BAR, constants),
                                 direction=-1)
    boundary = {
        "gas_nodes": [{"id": "S1", "flow_m3_s": constant(flow)},
                      {"id": "T1", "flow_m3_s": constant(-flow)}],
    }
    initial = {
        "pipelines": [
            pipe_initial("p_up", p_up.dx_m, rho_up, flow, constants),
            pipe_initial("p_down", p_down.dx_m, rho_down, flow, constants),
        ],
        "controlled_arcs": [{"id": "comp1",
                             "p_in_bar": p_j2 / BAR, "q_in_m3_s": flow,
                             "p_out_bar": p_j2 / BAR, "q_out_m3_s": flow}],
    }
    control = {"times_s": [0.0], "controls": [{"id": "comp1",
                                               "values_bar": [0.0]}]}
    problem_data = {
        "time": HORIZON, "newton": NEWTON,
        "optimization": {
            "costed_controls": ["comp1"],
            "control_times_s": [7200.0 * k for k in range(13)],
            "constraints": [{"node": "T1", "bound": "lower",
                             "times_s": [0.0, 86400.0],
                             "values_bar": [70.0, 90.0], "stride": 1}],
            "feasibility_tol_bar": 1e-6,
        },
    }
    return write_problem("compressor_line", problem_data, topology, boundary,
                         initial, control)


def main():
    for maker in (make_one_pipeline, make_y_junction, make_gas_power_small,
                  make_compressor_line):
        path = maker()
        verify_steady(path)
    print("fixtures written under", ROOT / "data")


if __name__ == "__main__":
    sys.exit(main())
