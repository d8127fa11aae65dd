"""High-level handle on a problem directory: load, stage, simulate."""

from __future__ import annotations

import math
import secrets
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import CoupledSystem
from .bundle import BundleError, ProblemBundle, load_bundle
from .gas import BAR, density_of_pressure
from .network import Network, build_network
from .solver import NewtonConfig, SimulationResult, StagedBoundary, simulate
from .stochastic import OUPParams, realize_path


@dataclass(frozen=True)
class Timeline:
    """Piecewise-linear function of time; a single knot means constant."""

    times: np.ndarray
    values: np.ndarray

    @staticmethod
    def from_document(doc: dict) -> "Timeline":
        return Timeline(np.asarray(doc["times_s"], dtype=float),
                        np.asarray(doc["values"], dtype=float))

    def __call__(self, t):
        return np.interp(t, self.times, self.values)


class ControlGrid:
    """Control values on a (possibly coarse) time grid, one row per
    controlled arc in network order, linearly interpolated in between."""

    def __init__(self, times, values, arc_ids, lower, upper):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.arc_ids = list(arc_ids)
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.values.shape != (len(self.arc_ids), self.times.shape[0]):
            raise ValueError("control grid shape mismatch")

    @staticmethod
    def from_document(doc: dict, net: Network) -> "ControlGrid":
        times = np.asarray(doc.get("times_s", [0.0]), dtype=float)
        by_id = {rec["id"]: rec["values_bar"] for rec in doc.get("controls", [])}
        values = np.zeros((len(net.controlled_arcs), times.shape[0]))
        for i, arc in enumerate(net.controlled_arcs):
            if arc.id in by_id:
                values[i] = np.asarray(by_id[arc.id], dtype=float)
        lower = [a.u_min_bar for a in net.controlled_arcs]
        upper = [a.u_max_bar for a in net.controlled_arcs]
        return ControlGrid(times, values, [a.id for a in net.controlled_arcs],
                           lower, upper)

    def at(self, t) -> np.ndarray:
        if self.times.shape[0] == 1:
            return self.values[:, 0].copy()
        return np.array([np.interp(t, self.times, row) for row in self.values])

    def with_values(self, values) -> "ControlGrid":
        return ControlGrid(self.times, values, self.arc_ids, self.lower,
                           self.upper)

    def interpolation_weights(self, t) -> np.ndarray:
        """Hat-function weights w with u(t) = values @ w."""
        w = np.zeros(self.times.shape[0])
        if self.times.shape[0] == 1:
            w[0] = 1.0
            return w
        t = min(max(t, self.times[0]), self.times[-1])
        j = int(np.searchsorted(self.times, t, side="right") - 1)
        j = min(j, self.times.shape[0] - 2)
        frac = (t - self.times[j]) / (self.times[j + 1] - self.times[j])
        w[j] = 1.0 - frac
        w[j + 1] = frac
        return w

    def to_document(self) -> dict:
        return {"times_s": self.times.tolist(),
                "controls": [{"id": ident, "values_bar": row.tolist()}
                             for ident, row in zip(self.arc_ids, self.values)]}


class Problem:
    """A loaded problem directory, ready to simulate."""

    def __init__(self, bundle: ProblemBundle, step_override_s: float | None = None):
        self.bundle = bundle
        self.net = build_network(bundle.topology)
        time = bundle.problem_data["time"]
        self.t_start = float(time["start_s"])
        self.t_end = float(time["end_s"])
        self.step_s = float(step_override_s if step_override_s is not None
                            else time["step_s"])
        n = (self.t_end - self.t_start) / self.step_s
        if abs(n - round(n)) > 1e-9 or n < 1:
            raise BundleError("horizon is not an integer number of steps")
        self.n_steps = int(round(n))
        self.times = self.t_start + self.step_s * np.arange(self.n_steps + 1)
        newton = bundle.problem_data.get("newton", {})
        self.newton_cfg = NewtonConfig(
            tolerance=float(newton.get("tolerance", 1e-8)),
            max_iterations=int(newton.get("max_iterations", 50)),
            max_step_halvings=int(newton.get("max_step_halvings", 8)))
        stoch = bundle.problem_data.get("stochastic", {})
        self.min_substeps_total = int(stoch.get("min_substeps_total", 1))
        self.default_time_unit_s = float(stoch.get("time_unit_s", 3600.0))
        self.system = CoupledSystem(self.net, self.step_s)
        self.controls = ControlGrid.from_document(bundle.control, self.net)
        self.version = __version__
        self._parse_boundary()
        self.x0 = self._initial_state()

    @staticmethod
    def load(problem_dir, step_override_s: float | None = None) -> "Problem":
        return Problem(load_bundle(problem_dir), step_override_s)

    # -- parsing -----------------------------------------------------------

    def _parse_boundary(self):
        doc = self.bundle.boundary
        self.boundary_seed = doc.get("seed")
        self.power_timelines = {}
        self.oup_params = {}
        for rec in doc.get("power_nodes", []):
            tl = {key: Timeline.from_document(rec[key])
                  for key in ("V_pu", "phi_rad", "P_pu", "Q_pu") if key in rec}
            self.power_timelines[rec["id"]] = tl
            if "uncertainty" in rec:
                unc = rec["uncertainty"]
                self.oup_params[rec["id"]] = OUPParams(
                    theta=float(unc["theta"]), sigma=float(unc["sigma"]),
                    cutoff=float(unc.get("cutoff", 0.4)),
                    time_unit_s=float(unc.get("time_unit_s",
                                              self.default_time_unit_s)))
        self.gas_timelines = {
            rec["id"]: Timeline.from_document(rec["flow_m3_s"])
            for rec in doc.get("gas_nodes", [])}

    def _initial_state(self) -> np.ndarray:
        doc = self.bundle.initial
        system = self.system
        x = np.zeros(system.n_unknowns)
        by_id = {rec["id"]: rec for rec in doc.get("power_nodes", [])}
        for k, node in enumerate(self.net.power_nodes):
            rec = by_id[node.id]
            for col, key in ((system.col_v[k], "V_pu"),
                             (system.col_phi[k], "phi_rad"),
                             (system.col_p[k], "P_pu"),
                             (system.col_q[k], "Q_pu")):
                if col >= 0:
                    x[col] = float(rec[key])
        by_id = {rec["id"]: rec for rec in doc.get("pipelines", [])}
        for pipe in self.net.pipelines:
            rec = by_id[pipe.id]
            grid = np.asarray(rec["x_m"], dtype=float)
            expected = pipe.dx_m * np.arange(pipe.n_cells + 1)
            if grid.shape != expected.shape or \
                    not np.allclose(grid, expected, atol=1e-6 * pipe.length_m):
                raise BundleError(
                    f"initial.json: pipeline {pipe.id!r}: x_m does not match "
                    f"the {pipe.n_cells + 1}-point grid with dx = {pipe.dx_m:g} m")
            p_bar = np.asarray(rec["pressure_bar"], dtype=float)
            q = np.asarray(rec["flow_m3_s"], dtype=float)
            if p_bar.shape != expected.shape or q.shape != expected.shape:
                raise BundleError(f"initial.json: pipeline {pipe.id!r}: value "
                                  "arrays must match the grid")
            base = system.pipe_offsets[pipe.id]
            x[base:base + 2 * (pipe.n_cells + 1):2] = \
                density_of_pressure(p_bar, self.net.constants)
            x[base + 1:base + 2 * (pipe.n_cells + 1):2] = q
        by_id = {rec["id"]: rec for rec in doc.get("controlled_arcs", [])}
        for arc in self.net.controlled_arcs:
            rec = by_id[arc.id]
            base = system.ctrl_offsets[arc.id]
            x[base] = float(rec["p_in_bar"]) * BAR
            x[base + 1] = float(rec["q_in_m3_s"])
            x[base + 2] = float(rec["p_out_bar"]) * BAR
            x[base + 3] = float(rec["q_out_m3_s"])
        by_id = {rec["id"]: rec for rec in doc.get("conversion_arcs", [])}
        for arc in self.net.conversion_arcs:
            x[system.conv_offsets[arc.id]] = float(by_id[arc.id]["flow_m3_s"])
        return x

    # -- staging -----------------------------------------------------------

    def resolve_seed(self, seed=None) -> int:
        if seed is not None:
            return int(seed)
        if self.boundary_seed is not None:
            return int(self.boundary_seed)
        return secrets.randbits(63)

    def stage_boundary(self, seed: int, sigma: float | None = None) -> StagedBoundary:
        """Evaluate/realize all boundary values on the step grid.

        sigma, when given, overrides the diffusion of every stochastic node
        (the sweep knob of the ensemble runs).
        """
        n_pow = len(self.net.power_nodes)
        n_t = self.n_steps + 1
        v_fix = np.full((n_t, n_pow), np.nan)
        phi_fix = np.full((n_t, n_pow), np.nan)
        p_fix = np.full((n_t, n_pow), np.nan)
        q_fix = np.full((n_t, n_pow), np.nan)
        min_per_step = max(1, math.ceil(self.min_substeps_total / self.n_steps))
        init_power = {rec["id"]: rec
                      for rec in self.bundle.initial.get("power_nodes", [])}
        for k, node in enumerate(self.net.power_nodes):
            tl = self.power_timelines[node.id]
            if node.kind == "Vphi":
                v_fix[:, k] = tl["V_pu"](self.times)
                phi_fix[:, k] = tl["phi_rad"](self.times)
            elif node.kind == "PV":
                p_fix[:, k] = tl["P_pu"](self.times)
                v_fix[:, k] = tl["V_pu"](self.times)
            elif node.kind == "PQ":
                p_fix[:, k] = tl["P_pu"](self.times)
                q_fix[:, k] = tl["Q_pu"](self.times)
            else:
                params = self.oup_params[node.id]
                if sigma is not None:
                    params = OUPParams(params.theta, float(sigma),
                                       params.cutoff, params.time_unit_s)
                init = init_power[node.id]
                p_fix[:, k] = realize_path(
                    tl["P_pu"], params, self.times, float(init["P_pu"]),
                    seed, node.id, "P", min_per_step)
                q_fix[:, k] = realize_path(
                    tl["Q_pu"], params, self.times, float(init["Q_pu"]),
                    seed, node.id, "Q", min_per_step)
        gas_flow = np.zeros((n_t, len(self.net.gas_nodes)))
        for n, node in enumerate(self.net.gas_nodes):
            if node.id in self.gas_timelines:
                gas_flow[:, n] = self.gas_timelines[node.id](self.times)
        return StagedBoundary(v_fix, phi_fix, p_fix, q_fix, gas_flow)

    # -- running -----------------------------------------------------------

    def run_staged(self, staged: StagedBoundary, controls: ControlGrid | None = None,
                   seed: int | None = None, overrides: dict | None = None
                   ) -> SimulationResult:
        controls = controls if controls is not None else self.controls
        result = simulate(self.system, self.x0, staged, controls.at,
                          self.times, self.newton_cfg)
        result.seed = seed
        result.config_digest = self.bundle.digest(overrides)
        result.boundary = staged
        return result

    def simulate(self, seed=None, sigma: float | None = None) -> SimulationResult:
        """Stage the boundary under the resolved seed and run the horizon."""
        used = self.resolve_seed(seed)
        staged = self.stage_boundary(used, sigma)
        overrides = {}
        if sigma is not None:
            overrides["sigma"] = float(sigma)
        overrides["seed"] = used
        return self.run_staged(staged, seed=used, overrides=overrides)

    def output_dir(self) -> Path:
        return Path(self.bundle.path) / "output"
