"""AC power flow residuals and exact partial derivatives.

All quantities are per unit: voltages on the nominal base, real and reactive
power on a 100 MW base.  The nodal balance computes net injected power from
voltage magnitudes and phase angles through the admittance entries; the
residual subtracts that from the node's prescribed or unknown value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import Network


@dataclass(frozen=True)
class PowerGrid:
    """Flattened admittance structure: directed entries (k, i) for every
    line in both orientations, plus per-node self admittances."""

    n: int
    ek: np.ndarray       # entry source node index
    ei: np.ndarray       # entry neighbour node index
    g: np.ndarray
    b: np.ndarray
    g_self: np.ndarray
    b_self: np.ndarray

    @staticmethod
    def from_network(net: Network) -> "PowerGrid":
        n = len(net.power_nodes)
        ek, ei, g, b = [], [], [], []
        for line in net.lines:
            a = net.power_index(line.from_node)
            c = net.power_index(line.to_node)
            ek.extend((a, c))
            ei.extend((c, a))
            g.extend((line.g, line.g))
            b.extend((line.b, line.b))
        return PowerGrid(
            n,
            np.asarray(ek, dtype=np.intp),
            np.asarray(ei, dtype=np.intp),
            np.asarray(g, dtype=float),
            np.asarray(b, dtype=float),
            np.array([p.g_shunt for p in net.power_nodes], dtype=float),
            np.array([p.b_shunt for p in net.power_nodes], dtype=float),
        )


def computed_power(grid: PowerGrid, v, phi):
    """Net injections (P, Q) at every node from the nodal balance."""
    v = np.asarray(v, dtype=float)
    phi = np.asarray(phi, dtype=float)
    d = phi[grid.ek] - phi[grid.ei]
    vv = v[grid.ek] * v[grid.ei]
    tp = vv * (grid.g * np.cos(d) + grid.b * np.sin(d))
    tq = vv * (grid.g * np.sin(d) - grid.b * np.cos(d))
    p = np.bincount(grid.ek, weights=tp, minlength=grid.n).astype(float)
    q = np.bincount(grid.ek, weights=tq, minlength=grid.n).astype(float)
    p += grid.g_self * v * v
    q -= grid.b_self * v * v
    return p, q


def powerflow_residual(grid: PowerGrid, v, phi, p_val, q_val, injections=None):
    """(P rows, Q rows): prescribed-or-unknown value minus computed balance.

    injections, when given, adds extra real power to the P balance (the
    conversion plants of slack nodes enter here in standalone use; the
    coupled solver ties them through their own residual row instead).
    """
    p_calc, q_calc = computed_power(grid, v, phi)
    p_val = np.asarray(p_val, dtype=float)
    q_val = np.asarray(q_val, dtype=float)
    if p_val.shape != (grid.n,) or q_val.shape != (grid.n,):
        raise ValueError("power state dimensions do not match the network")
    res_p = p_val - p_calc
    if injections is not None:
        res_p = res_p + np.asarray(injections, dtype=float)
    return res_p, q_val - q_calc


def entry_partials(grid: PowerGrid, v, phi):
    """Per-entry derivatives of the two balance terms.

    Returns a dict with, for each directed entry, the partial derivatives of
    t_p = Vk Vi (G cos + B sin) and t_q = Vk Vi (G sin - B cos) with respect
    to (Vk, Vi, phi_k, phi_i), plus the self-term derivatives per node.
    """
    v = np.asarray(v, dtype=float)
    phi = np.asarray(phi, dtype=float)
    d = phi[grid.ek] - phi[grid.ei]
    cp = grid.g * np.cos(d) + grid.b * np.sin(d)
    cq = grid.g * np.sin(d) - grid.b * np.cos(d)
    vk = v[grid.ek]
    vi = v[grid.ei]
    tp = vk * vi * cp
    tq = vk * vi * cq
    return {
        "dtp_dvk": vi * cp,
        "dtp_dvi": vk * cp,
        "dtp_dphik": -tq,
        "dtp_dphii": tq,
        "dtq_dvk": vi * cq,
        "dtq_dvi": vk * cq,
        "dtq_dphik": tp,
        "dtq_dphii": -tp,
        "dselfp_dv": 2.0 * grid.g_self * v,
        "dselfq_dv": -2.0 * grid.b_self * v,
    }


def jacobian_entries(grid: PowerGrid, v, phi, rows_p, rows_q,
                     col_v, col_phi, col_p, col_q, structure_only=False):
    """COO entries of the residual Jacobian for an arbitrary unknown layout.

    rows_p/rows_q give the global row of each node's P and Q balance;
    col_* give the global column of each node's quantity, -1 where the
    quantity is prescribed.  Entries hitting fixed columns are dropped.
    With structure_only the data array is filled with zeros, the sparsity
    pattern is state independent.
    """
    parts = None if structure_only else entry_partials(grid, v, phi)
    rows, cols, data = [], [], []

    def emit(rr, cc, values):
        keep = cc >= 0
        rows.append(rr[keep])
        cols.append(cc[keep])
        data.append(np.zeros(keep.sum()) if values is None else values[keep])

    rp = np.asarray(rows_p)[grid.ek]
    rq = np.asarray(rows_q)[grid.ek]
    cvk = np.asarray(col_v)[grid.ek]
    cvi = np.asarray(col_v)[grid.ei]
    cpk = np.asarray(col_phi)[grid.ek]
    cpi = np.asarray(col_phi)[grid.ei]

    for rr, cc, key in ((rp, cvk, "dtp_dvk"), (rp, cvi, "dtp_dvi"),
                        (rp, cpk, "dtp_dphik"), (rp, cpi, "dtp_dphii"),
                        (rq, cvk, "dtq_dvk"), (rq, cvi, "dtq_dvi"),
                        (rq, cpk, "dtq_dphik"), (rq, cpi, "dtq_dphii")):
        emit(rr, cc, None if parts is None else -parts[key])

    rp_n = np.asarray(rows_p)
    rq_n = np.asarray(rows_q)
    cv_n = np.asarray(col_v)
    emit(rp_n, cv_n, None if parts is None else -parts["dselfp_dv"])
    emit(rq_n, cv_n, None if parts is None else -parts["dselfq_dv"])
    # identity blocks for unknown P and Q
    cp_n = np.asarray(col_p)
    cq_n = np.asarray(col_q)
    emit(rp_n, cp_n, None if parts is None else np.ones(grid.n))
    emit(rq_n, cq_n, None if parts is None else np.ones(grid.n))
    return (np.concatenate(rows), np.concatenate(cols), np.concatenate(data))


def powerflow_jacobian(grid: PowerGrid, v, phi, kinds):
    """Sparse Jacobian w.r.t. the per-node unknown pairs.

    Unknowns by node kind: Vphi -> (P, Q); PV -> (Q, phi); PQ -> (V, phi).
    Rows are (P balance, Q balance) per node; columns follow the same
    two-slots-per-node layout.
    """
    import scipy.sparse as sp

    n = grid.n
    col_v = np.full(n, -1, dtype=np.intp)
    col_phi = np.full(n, -1, dtype=np.intp)
    col_p = np.full(n, -1, dtype=np.intp)
    col_q = np.full(n, -1, dtype=np.intp)
    for k, kind in enumerate(kinds):
        s0, s1 = 2 * k, 2 * k + 1
        if kind == "Vphi":
            col_p[k], col_q[k] = s0, s1
        elif kind == "PV":
            col_q[k], col_phi[k] = s0, s1
        else:
            col_v[k], col_phi[k] = s0, s1
    rows_p = np.arange(0, 2 * n, 2)
    rows_q = rows_p + 1
    rows, cols, data = jacobian_entries(grid, v, phi, rows_p, rows_q,
                                        col_v, col_phi, col_p, col_q)
    return sp.coo_matrix((data, (rows, cols)), shape=(2 * n, 2 * n)).tocsr()
