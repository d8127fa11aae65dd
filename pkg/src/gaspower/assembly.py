"""Global unknown vector and coupled residual/Jacobian assembly.

The unknown vector stacks, in declaration order:
  * two slots per power node, meaning by kind
      Vphi -> (P, Q),  PV -> (Q, phi),  PQ/StochasticPQ -> (V, phi)
  * per pipeline the interleaved grid values (rho_0, q_0, ..., rho_K, q_K)
  * per controlled arc (p_in, q_in, p_out, q_out) in SI units
  * per conversion arc its volumetric flow.

Residual rows follow the same block order: two power-balance rows per node,
2K box rows per pipeline, a flow and a pressure row per controlled arc, one
coupling row per gas node and incident pressure-bearing arc (equality rows
assigned by sorted arc id, the flow balance on the first), and one
conversion row per plant.  Pressure-valued rows are scaled to bar and the
momentum rows to a bar-per-cell magnitude so one absolute Newton tolerance
is meaningful across blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import coupling, gas, kernels, power
from .gas import BAR
from .network import ControlledArc, ConversionArc, Network, Pipeline


@dataclass
class BoundaryValues:
    """Fixed quantities at one time step; NaN marks solver unknowns."""

    v_fix: np.ndarray
    phi_fix: np.ndarray
    p_fix: np.ndarray
    q_fix: np.ndarray
    gas_flow: np.ndarray


@dataclass(frozen=True)
class _Endpoint:
    is_pipe: bool
    pressure_col: int   # rho column for pipes, p column for controlled arcs
    flow_col: int
    sign: float


class CoupledSystem:
    """Index maps and evaluation of the coupled per-timestep system for a
    fixed network and step size."""

    def __init__(self, net: Network, dt: float):
        if dt <= 0:
            raise ValueError("time step must be positive")
        self.net = net
        self.dt = float(dt)
        self.grid = power.PowerGrid.from_network(net)
        n_pow = len(net.power_nodes)

        self.col_v = np.full(n_pow, -1, dtype=np.intp)
        self.col_phi = np.full(n_pow, -1, dtype=np.intp)
        self.col_p = np.full(n_pow, -1, dtype=np.intp)
        self.col_q = np.full(n_pow, -1, dtype=np.intp)
        for k, node in enumerate(net.power_nodes):
            s0, s1 = 2 * k, 2 * k + 1
            if node.kind == "Vphi":
                self.col_p[k], self.col_q[k] = s0, s1
            elif node.kind == "PV":
                self.col_q[k], self.col_phi[k] = s0, s1
            else:
                self.col_v[k], self.col_phi[k] = s0, s1
        offset = 2 * n_pow

        self.pipe_offsets = {}
        for pipe in net.pipelines:
            self.pipe_offsets[pipe.id] = offset
            offset += 2 * (pipe.n_cells + 1)
        self.ctrl_offsets = {}
        for arc in net.controlled_arcs:
            self.ctrl_offsets[arc.id] = offset
            offset += 4
        self.conv_offsets = {}
        for arc in net.conversion_arcs:
            self.conv_offsets[arc.id] = offset
            offset += 1
        self.n_unknowns = offset

        row = 2 * n_pow
        self.pipe_rows = {}
        for pipe in net.pipelines:
            self.pipe_rows[pipe.id] = row
            row += 2 * pipe.n_cells
        self.ctrl_rows = {}
        for arc in net.controlled_arcs:
            self.ctrl_rows[arc.id] = row
            row += 2
        self.gas_node_rows = {}
        self._endpoints = {}
        self._conv_endpoints = {}
        for node in net.gas_nodes:
            eps, conv_eps = [], []
            for arc in net.gas_arcs_at(node.id):
                sign = float(net.incidence_sign(node.id, arc.id))
                if isinstance(arc, Pipeline):
                    base = self.pipe_offsets[arc.id]
                    point = 0 if sign > 0 else arc.n_cells
                    eps.append(_Endpoint(True, base + 2 * point,
                                         base + 2 * point + 1, sign))
                elif isinstance(arc, ControlledArc):
                    base = self.ctrl_offsets[arc.id]
                    end = 0 if sign > 0 else 2
                    eps.append(_Endpoint(False, base + end, base + end + 1, sign))
                elif isinstance(arc, ConversionArc):
                    conv_eps.append((self.conv_offsets[arc.id], sign))
            self._endpoints[node.id] = eps
            self._conv_endpoints[node.id] = conv_eps
            self.gas_node_rows[node.id] = row
            row += len(eps)
        self.conv_rows = {}
        for arc in net.conversion_arcs:
            self.conv_rows[arc.id] = row
            row += 1
        if row != self.n_unknowns:
            raise ValueError(
                f"system is not square: {row} rows for {self.n_unknowns} unknowns")

        self.rows_p = np.arange(0, 2 * n_pow, 2, dtype=np.intp)
        self.rows_q = self.rows_p + 1
        # per-pipe momentum row scale: bar of pressure difference per cell
        self.mom_scale = {
            p.id: (net.constants.rho0 / p.area_m2) * p.dx_m / (self.dt * BAR)
            for p in net.pipelines
        }
        self.curves = {a.id: coupling.ConversionCurve.from_arc(a)
                       for a in net.conversion_arcs}
        self._unk_v = np.nonzero(self.col_v >= 0)[0]
        self._unk_phi = np.nonzero(self.col_phi >= 0)[0]
        self._unk_p = np.nonzero(self.col_p >= 0)[0]
        self._unk_q = np.nonzero(self.col_q >= 0)[0]

    # -- state access -----------------------------------------------------

    def power_state(self, x: np.ndarray, bnd: BoundaryValues):
        """(V, phi, P, Q) arrays with unknown slots taken from x."""
        v = bnd.v_fix.copy()
        phi = bnd.phi_fix.copy()
        p = bnd.p_fix.copy()
        q = bnd.q_fix.copy()
        v[self._unk_v] = x[self.col_v[self._unk_v]]
        phi[self._unk_phi] = x[self.col_phi[self._unk_phi]]
        p[self._unk_p] = x[self.col_p[self._unk_p]]
        q[self._unk_q] = x[self.col_q[self._unk_q]]
        return v, phi, p, q

    def pipe_state(self, x: np.ndarray, pipe: Pipeline):
        base = self.pipe_offsets[pipe.id]
        span = x[base:base + 2 * (pipe.n_cells + 1)]
        return span[0::2], span[1::2]

    def gas_node_pressure_si(self, x: np.ndarray, node_id: str) -> float:
        """Pressure at a gas node from its reference (first sorted) arc."""
        ep = self._endpoints[node_id][0]
        if ep.is_pipe:
            return float(gas.pressure_si(x[ep.pressure_col], self.net.constants))
        return float(x[ep.pressure_col])

    def gas_node_pressure_seed(self, x: np.ndarray, node_id: str):
        """(column, d pressure_bar / d x[column]) for adjoint seeding."""
        ep = self._endpoints[node_id][0]
        if ep.is_pipe:
            dp = float(gas.pressure_derivative_si(x[ep.pressure_col],
                                                  self.net.constants))
            return ep.pressure_col, dp / BAR
        return ep.pressure_col, 1.0 / BAR

    # -- residual ----------------------------------------------------------

    def residual(self, x_prev, x_next, bnd: BoundaryValues, u_bar) -> np.ndarray:
        net = self.net
        f = np.empty(self.n_unknowns)
        for pipe in net.pipelines:
            rho_n, _ = self.pipe_state(x_next, pipe)
            if not np.all(rho_n > 0):
                # outside the pressure-law domain; the damped Newton step
                # treats a non-finite residual as an over-long step
                f.fill(np.nan)
                return f
        v, phi, p_val, q_val = self.power_state(x_next, bnd)
        res_p, res_q = power.powerflow_residual(self.grid, v, phi, p_val, q_val)
        f[self.rows_p] = res_p
        f[self.rows_q] = res_q

        for pipe in net.pipelines:
            rho_p, q_p = self.pipe_state(x_prev, pipe)
            rho_n, q_n = self.pipe_state(x_next, pipe)
            mass, mom = kernels.box_residual(rho_p, q_p, rho_n, q_n,
                                             self.dt, pipe, net.constants)
            r0 = self.pipe_rows[pipe.id]
            f[r0:r0 + 2 * pipe.n_cells:2] = mass
            f[r0 + 1:r0 + 2 * pipe.n_cells:2] = mom * self.mom_scale[pipe.id]

        for i, arc in enumerate(net.controlled_arcs):
            base = self.ctrl_offsets[arc.id]
            row = self.ctrl_rows[arc.id]
            dq, dp = gas.controlled_arc_residual(
                arc.kind, x_next[base], x_next[base + 2],
                x_next[base + 1], x_next[base + 3], u_bar[i])
            f[row] = dq
            f[row + 1] = dp / BAR

        for node in net.gas_nodes:
            eps = self._endpoints[node.id]
            row = self.gas_node_rows[node.id]
            pvals = np.array([
                gas.pressure_si(x_next[ep.pressure_col], net.constants)
                if ep.is_pipe else x_next[ep.pressure_col] for ep in eps])
            flows = [x_next[ep.flow_col] for ep in eps]
            signs = [ep.sign for ep in eps]
            for col, sign in self._conv_endpoints[node.id]:
                flows.append(x_next[col])
                signs.append(sign)
            res = gas.junction_residual(signs, pvals, flows,
                                        bnd.gas_flow[net.gas_index(node.id)])
            f[row:row + len(eps) - 1] = res[:len(eps) - 1] / BAR
            f[row + len(eps) - 1] = res[-1]

        for arc in net.conversion_arcs:
            k = net.power_index(arc.power_node)
            f[self.conv_rows[arc.id]] = coupling.coupling_residual(
                x_next[self.col_p[k]], x_next[self.conv_offsets[arc.id]],
                self.curves[arc.id])
        return f

    # -- Jacobians ---------------------------------------------------------

    def jacobian(self, x_next, bnd: BoundaryValues, u_bar) -> sp.csc_matrix:
        """d residual / d x_next as sparse CSC."""
        net = self.net
        v, phi, _, _ = self.power_state(x_next, bnd)
        rows, cols, data = power.jacobian_entries(
            self.grid, v, phi, self.rows_p, self.rows_q,
            self.col_v, self.col_phi, self.col_p, self.col_q)
        parts = [(rows, cols, data)]

        for pipe in net.pipelines:
            rho_n, q_n = self.pipe_state(x_next, pipe)
            dmass, dmom = kernels.box_jacobian(rho_n, q_n, self.dt, pipe,
                                               net.constants)
            kk = pipe.n_cells
            base = self.pipe_offsets[pipe.id]
            r0 = self.pipe_rows[pipe.id]
            cell = np.arange(kk)
            col_block = base + 2 * cell[:, None] + np.arange(4)[None, :]
            mass_rows = np.repeat(r0 + 2 * cell, 4)
            mom_rows = mass_rows + 1
            parts.append((mass_rows, col_block.ravel(), dmass.ravel()))
            parts.append((mom_rows, col_block.ravel(),
                          (dmom * self.mom_scale[pipe.id]).ravel()))

        for i, arc in enumerate(net.controlled_arcs):
            base = self.ctrl_offsets[arc.id]
            row = self.ctrl_rows[arc.id]
            parts.append((np.array([row, row, row + 1, row + 1]),
                          np.array([base + 3, base + 1, base + 2, base]),
                          np.array([1.0, -1.0, 1.0 / BAR, -1.0 / BAR])))

        for node in net.gas_nodes:
            eps = self._endpoints[node.id]
            row = self.gas_node_rows[node.id]
            dp = [
                float(gas.pressure_derivative_si(x_next[ep.pressure_col],
                                                 net.constants))
                if ep.is_pipe else 1.0 for ep in eps]
            rr, cc, dd = [], [], []
            for e in range(1, len(eps)):
                rr += [row + e - 1, row + e - 1]
                cc += [eps[e].pressure_col, eps[0].pressure_col]
                dd += [dp[e] / BAR, -dp[0] / BAR]
            flow_row = row + len(eps) - 1
            for ep in eps:
                rr.append(flow_row)
                cc.append(ep.flow_col)
                dd.append(-ep.sign)
            for col, sign in self._conv_endpoints[node.id]:
                rr.append(flow_row)
                cc.append(col)
                dd.append(-sign)
            parts.append((np.array(rr), np.array(cc), np.array(dd)))

        for arc in net.conversion_arcs:
            k = net.power_index(arc.power_node)
            qcol = self.conv_offsets[arc.id]
            dconv = float(coupling.conversion_power_derivative(
                x_next[qcol], self.curves[arc.id]))
            row = self.conv_rows[arc.id]
            parts.append((np.array([row, row]),
                          np.array([self.col_p[k], qcol]),
                          np.array([1.0, -dconv / coupling.MW_PER_UNIT])))

        rows = np.concatenate([p[0] for p in parts])
        cols = np.concatenate([p[1] for p in parts])
        data = np.concatenate([p[2] for p in parts])
        shape = (self.n_unknowns, self.n_unknowns)
        return sp.coo_matrix((data, (rows, cols)), shape=shape).tocsc()

    def prev_state_jacobian(self) -> sp.csc_matrix:
        """d residual / d x_prev; constant (only box rows look backward)."""
        rr, cc, dd = [], [], []
        for pipe in self.net.pipelines:
            kk = pipe.n_cells
            base = self.pipe_offsets[pipe.id]
            r0 = self.pipe_rows[pipe.id]
            scale = self.mom_scale[pipe.id]
            for cell in range(kk):
                mass_row = r0 + 2 * cell
                rr += [mass_row, mass_row, mass_row + 1, mass_row + 1]
                cc += [base + 2 * cell, base + 2 * cell + 2,
                       base + 2 * cell + 1, base + 2 * cell + 3]
                dd += [-0.5, -0.5, -0.5 * scale, -0.5 * scale]
        shape = (self.n_unknowns, self.n_unknowns)
        return sp.coo_matrix((dd, (rr, cc)), shape=shape).tocsc()

    def control_jacobian(self) -> sp.csc_matrix:
        """d residual / d control values (bar); constant."""
        rr, cc, dd = [], [], []
        for i, arc in enumerate(self.net.controlled_arcs):
            rr.append(self.ctrl_rows[arc.id] + 1)
            cc.append(i)
            dd.append(-1.0 if arc.kind == "compressor" else 1.0)
        shape = (self.n_unknowns, len(self.net.controlled_arcs))
        return sp.coo_matrix((dd, (rr, cc)), shape=shape).tocsc()

    @property
    def residual_scales(self) -> dict:
        return {
            "power_rows": "per-unit (100 MW)",
            "mass_rows": "kg/m^3",
            "momentum_rows": "bar per cell",
            "flow_rows": "m^3/s",
            "pressure_rows": "bar",
            "conversion_rows": "per-unit (100 MW)",
        }
