"""Problem bundle: the five input documents of a problem directory.

A problem directory holds a "problem" subdirectory with problem_data.json,
topology.json, boundary.json, initial.json and control.json.  Loading
parses, schema-validates and cross-validates the documents; every error is
collected so one pass reports them all.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from . import schemas

DOCUMENT_NAMES = ("problem_data", "topology", "boundary", "initial", "control")


class BundleError(ValueError):
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass
class ProblemBundle:
    path: Path
    problem_data: dict
    topology: dict
    boundary: dict
    initial: dict
    control: dict

    def document(self, name: str) -> dict:
        return getattr(self, name)

    def digest(self, overrides: dict | None = None) -> str:
        """Stable hash of the inputs plus run overrides; recorded in the
        output for provenance."""
        payload = {name: self.document(name) for name in DOCUMENT_NAMES}
        payload["overrides"] = overrides or {}
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _timeline_errors(doc_name, owner, key, timeline, t_start, t_end, errors):
    times = timeline.get("times_s", [])
    values = timeline.get("values", [])
    if len(times) != len(values):
        errors.append(f"{doc_name}: {owner}: {key}: times_s and values differ "
                      f"in length ({len(times)} vs {len(values)})")
        return
    if len(times) > 1:
        if any(b <= a for a, b in zip(times, times[1:])):
            errors.append(f"{doc_name}: {owner}: {key}: times_s must increase")
        elif times[0] > t_start or times[-1] < t_end:
            errors.append(f"{doc_name}: {owner}: {key}: timeline must cover "
                          f"[{t_start:g}, {t_end:g}] s")


def load_bundle(problem_dir) -> ProblemBundle:
    base = Path(problem_dir)
    problem = base / "problem"
    if not problem.is_dir():
        raise BundleError(f"missing problem/ subdirectory under {base}")
    docs = {}
    errors = []
    for name in DOCUMENT_NAMES:
        path = problem / f"{name}.json"
        if not path.exists():
            errors.append(f"missing input file {path}")
            continue
        try:
            docs[name] = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            errors.append(f"{name}.json: invalid JSON: {exc}")
    if errors:
        raise BundleError(errors)
    for kind in schemas.SCHEMAS:
        doc = dict(docs[kind])
        doc.pop("$schema", None)
        errors.extend(schemas.validate_document(doc, kind))
    if errors:
        raise BundleError(errors)
    bundle = ProblemBundle(base, docs["problem_data"], docs["topology"],
                           docs["boundary"], docs["initial"], docs["control"])
    errors = cross_validate(bundle)
    if errors:
        raise BundleError(errors)
    return bundle


def cross_validate(bundle: ProblemBundle) -> list:
    """Reference and coverage checks across the five documents."""
    errors = []
    topo = bundle.topology
    power_ids = {n.get("id"): n for n in topo.get("power_nodes", [])}
    gas_ids = {n.get("id"): n for n in topo.get("gas_nodes", [])}
    pipe_ids = {a.get("id") for a in topo.get("pipelines", [])}
    ctrl_ids = {a.get("id") for a in (topo.get("compressors", [])
                                      + topo.get("valves", []))}
    conv_ids = {a.get("id") for a in topo.get("conversion_arcs", [])}

    time = bundle.problem_data.get("time", {})
    t_start = float(time.get("start_s", 0.0))
    t_end = float(time.get("end_s", 0.0))
    step = float(time.get("step_s", 0.0))
    if step <= 0 or t_end <= t_start:
        errors.append("problem_data.json: time block needs start_s < end_s "
                      "and step_s > 0")
    else:
        n = (t_end - t_start) / step
        if abs(n - round(n)) > 1e-9:
            errors.append("problem_data.json: (end_s - start_s) / step_s "
                          "must be an integer")

    required = {"Vphi": ("V_pu", "phi_rad"), "PV": ("P_pu", "V_pu"),
                "PQ": ("P_pu", "Q_pu"), "StochasticPQ": ("P_pu", "Q_pu")}
    seen_boundary = set()
    for rec in bundle.boundary.get("power_nodes", []):
        ident = rec.get("id")
        seen_boundary.add(ident)
        node = power_ids.get(ident)
        if node is None:
            errors.append(f"boundary.json: unknown power node {ident!r}")
            continue
        kind = node.get("kind")
        keys = required.get(kind, ())
        for key in keys:
            if key not in rec:
                errors.append(f"boundary.json: node {ident!r} ({kind}) "
                              f"must supply {key}")
            else:
                _timeline_errors("boundary.json", ident, key, rec[key],
                                 t_start, t_end, errors)
        extra = {k for k in rec if k in ("V_pu", "phi_rad", "P_pu", "Q_pu")} \
            - set(keys)
        if extra:
            errors.append(f"boundary.json: node {ident!r} ({kind}) must not "
                          f"supply {sorted(extra)}")
        if kind == "StochasticPQ" and "uncertainty" not in rec:
            errors.append(f"boundary.json: node {ident!r} is stochastic and "
                          "needs an uncertainty block")
        if kind != "StochasticPQ" and "uncertainty" in rec:
            errors.append(f"boundary.json: node {ident!r} ({kind}) must not "
                          "carry an uncertainty block")
    for ident, node in power_ids.items():
        if ident not in seen_boundary:
            errors.append(f"boundary.json: power node {ident!r} has no entry")

    seen_gas = set()
    for rec in bundle.boundary.get("gas_nodes", []):
        ident = rec.get("id")
        seen_gas.add(ident)
        node = gas_ids.get(ident)
        if node is None:
            errors.append(f"boundary.json: unknown gas node {ident!r}")
            continue
        if node.get("kind") == "junction":
            errors.append(f"boundary.json: junction {ident!r} cannot carry "
                          "a flow timeline")
        else:
            _timeline_errors("boundary.json", ident, "flow_m3_s",
                             rec.get("flow_m3_s", {}), t_start, t_end, errors)
    for ident, node in gas_ids.items():
        if node.get("kind") in ("source", "sink") and ident not in seen_gas:
            errors.append(f"boundary.json: {node.get('kind')} {ident!r} "
                          "has no flow entry")

    init = bundle.initial
    seen = {rec.get("id") for rec in init.get("power_nodes", [])}
    for ident in power_ids:
        if ident not in seen:
            errors.append(f"initial.json: power node {ident!r} has no entry")
    for ident in seen - set(power_ids):
        errors.append(f"initial.json: unknown power node {ident!r}")
    seen = {rec.get("id") for rec in init.get("pipelines", [])}
    for ident in pipe_ids:
        if ident not in seen:
            errors.append(f"initial.json: pipeline {ident!r} has no entry")
    for ident in seen - pipe_ids:
        errors.append(f"initial.json: unknown pipeline {ident!r}")
    seen = {rec.get("id") for rec in init.get("controlled_arcs", [])}
    for ident in ctrl_ids:
        if ident not in seen:
            errors.append(f"initial.json: controlled arc {ident!r} has no entry")
    for ident in seen - ctrl_ids:
        errors.append(f"initial.json: unknown controlled arc {ident!r}")
    seen = {rec.get("id") for rec in init.get("conversion_arcs", [])}
    for ident in conv_ids:
        if ident not in seen:
            errors.append(f"initial.json: conversion arc {ident!r} has no entry")
    for ident in seen - conv_ids:
        errors.append(f"initial.json: unknown conversion arc {ident!r}")

    ctrl_doc = bundle.control
    times = ctrl_doc.get("times_s", [])
    if times and len(times) > 1:
        if any(b <= a for a, b in zip(times, times[1:])):
            errors.append("control.json: times_s must increase")
        elif not errors and (times[0] > t_start or times[-1] < t_end):
            errors.append(f"control.json: times_s must cover "
                          f"[{t_start:g}, {t_end:g}] s")
    bounds = {a.get("id"): (float(a.get("u_min_bar", 0.0)),
                            float(a.get("u_max_bar", 0.0)))
              for a in topo.get("compressors", []) + topo.get("valves", [])}
    for rec in ctrl_doc.get("controls", []):
        ident = rec.get("id")
        if ident not in ctrl_ids:
            errors.append(f"control.json: unknown controlled arc {ident!r}")
        elif len(rec.get("values_bar", [])) != len(times):
            errors.append(f"control.json: arc {ident!r}: values_bar length "
                          "must match times_s")
        else:
            lo, hi = bounds[ident]
            if any(not lo <= v <= hi for v in rec["values_bar"]):
                errors.append(f"control.json: arc {ident!r}: values outside "
                              f"the control bounds [{lo:g}, {hi:g}] bar")

    opt = bundle.problem_data.get("optimization", {})
    for rec in opt.get("constraints", []):
        ident = rec.get("node")
        if ident not in gas_ids:
            errors.append(f"problem_data.json: constraint references unknown "
                          f"gas node {ident!r}")
        if int(rec.get("stride", 1)) < 1:
            errors.append("problem_data.json: constraint stride must be >= 1")
    for ident in opt.get("costed_controls", []):
        if ident not in ctrl_ids:
            errors.append(f"problem_data.json: costed control {ident!r} is "
                          "not a controlled arc")
    return errors
