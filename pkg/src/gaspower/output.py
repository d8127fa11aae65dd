"""Run output: the result document, atomic file naming and CSV extraction.

One run produces one JSON document.  The filename carries a timestamp and a
random suffix and is opened with create-new semantics, so concurrent runs
into the same directory never interfere; a collision simply draws a new
name.  Apart from the written_at stamp the payload for a seeded run is
byte-reproducible.
"""

from __future__ import annotations

import csv
import datetime
import json
import os
from pathlib import Path

import numpy as np

from . import gas, coupling
from .gas import BAR


class OutputError(ValueError):
    pass


def build_output_document(problem, result) -> dict:
    """Self-describing per-component time series of a simulation result."""
    system = problem.system
    net = system.net
    staged = result.boundary
    n_t = result.states.shape[0]
    times = result.times.tolist()

    components = {}
    for k, node in enumerate(net.power_nodes):
        series = {}
        for name, col, fix in (("V_pu", system.col_v[k], staged.v_fix),
                               ("phi_rad", system.col_phi[k], staged.phi_fix),
                               ("P_pu", system.col_p[k], staged.p_fix),
                               ("Q_pu", system.col_q[k], staged.q_fix)):
            if col >= 0:
                series[name] = result.states[:, col].tolist()
            else:
                series[name] = fix[:n_t, k].tolist()
        components[node.id] = {"kind": f"power_node/{node.kind}",
                               "time_s": times, **series}

    for pipe in net.pipelines:
        base = system.pipe_offsets[pipe.id]
        span = result.states[:, base:base + 2 * (pipe.n_cells + 1)]
        rho = span[:, 0::2]
        q = span[:, 1::2]
        x = [k * pipe.dx_m for k in range(pipe.n_cells + 1)]
        components[pipe.id] = {
            "kind": "pipeline",
            "time_s": times,
            "x_m": x,
            "pressure_bar": (gas.pressure_si(rho, net.constants) / BAR).tolist(),
            "flow_m3_s": q.tolist(),
        }

    u_series = np.array([problem.controls.at(t) for t in result.times])
    for i, arc in enumerate(net.controlled_arcs):
        base = system.ctrl_offsets[arc.id]
        components[arc.id] = {
            "kind": arc.kind,
            "time_s": times,
            "p_in_bar": (result.states[:, base] / BAR).tolist(),
            "p_out_bar": (result.states[:, base + 2] / BAR).tolist(),
            "flow_m3_s": result.states[:, base + 1].tolist(),
            "u_bar": u_series[:, i].tolist(),
        }

    for arc in net.conversion_arcs:
        qv = result.states[:, system.conv_offsets[arc.id]]
        components[arc.id] = {
            "kind": "conversion_arc",
            "time_s": times,
            "flow_m3_s": qv.tolist(),
            "power_MW": coupling.conversion_power(
                qv, system.curves[arc.id]).tolist(),
        }

    for node in net.gas_nodes:
        p = [system.gas_node_pressure_si(result.states[j], node.id) / BAR
             for j in range(n_t)]
        components[node.id] = {"kind": f"gas_node/{node.kind}",
                               "time_s": times, "pressure_bar": p}

    return {
        "provenance": {
            "tool": "gaspower",
            "version": problem.version,
            "seed": result.seed,
            "config_digest": result.config_digest,
            "residual_scales": system.residual_scales,
            "written_at": None,   # stamped by write_output_atomic
        },
        "status": result.status,
        "failed_at_step": result.failed_at_step,
        "message": result.message,
        "time_s": times,
        "components": components,
        "diagnostics": {
            "newton_iterations": list(result.newton_iterations),
            "residual_norms": list(result.residual_norms),
            "cfl_violations": [list(v) for v in result.cfl_violations],
        },
    }


def write_output_atomic(document: dict, out_dir, prefix: str = "output") -> Path:
    """Write under a fresh unique name; never overwrites concurrent runs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = datetime.datetime.now(datetime.timezone.utc)
    document = dict(document)
    provenance = dict(document.get("provenance", {}))
    provenance["written_at"] = stamp.isoformat()
    document["provenance"] = provenance
    payload = json.dumps(document, indent=1)
    while True:
        suffix = os.urandom(4).hex()
        path = out / f"{prefix}_{stamp.strftime('%Y%m%dT%H%M%S')}_{suffix}.json"
        try:
            with open(path, "x") as handle:
                handle.write(payload)
                handle.write("\n")
            return path
        except FileExistsError:
            continue


def available_series(document: dict) -> list:
    """All addressable series keys of an output document."""
    keys = []
    for ident, comp in document.get("components", {}).items():
        for field, value in comp.items():
            if field in ("kind", "time_s", "x_m"):
                continue
            keys.append(f"{ident}.{field}")
    return sorted(keys)


def resolve_series(document: dict, key: str):
    """(component id, field, values array) for a series key.

    A bare pipeline id addresses its pressure; everything else is
    "<component>.<field>".
    """
    components = document.get("components", {})
    if "." in key:
        ident, field = key.rsplit(".", 1)
    else:
        ident, field = key, None
    comp = components.get(ident)
    if comp is None or (field is not None and field not in comp):
        raise OutputError(
            f"unknown series {key!r}; available: {', '.join(available_series(document))}")
    if field is None:
        if comp.get("kind") == "pipeline":
            field = "pressure_bar"
        else:
            raise OutputError(
                f"series {key!r} is ambiguous; available: "
                f"{', '.join(available_series(document))}")
    return ident, field, np.asarray(comp[field], dtype=float)


def extract_csv(document: dict, key: str, destination) -> None:
    """Write one series as CSV: rows are time steps, columns the pipe grid
    positions (or the single scalar).  repr-level precision, C locale."""
    ident, field, values = resolve_series(document, key)
    comp = document["components"][ident]
    times = comp["time_s"]
    writer = csv.writer(destination, lineterminator="\n")
    if values.ndim == 2:
        header = ["time_s"] + [f"x={x:g}" for x in comp["x_m"]]
        writer.writerow(header)
        for t, row in zip(times, values):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
    else:
        writer.writerow(["time_s", f"{ident}.{field}"])
        for t, v in zip(times, values):
            writer.writerow([repr(float(t)), repr(float(v))])
