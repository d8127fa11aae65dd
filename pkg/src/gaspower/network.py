"""Typed directed graph of the coupled network.

Nodes and arcs are plain frozen dataclasses; the Network groups them, indexes
adjacency and validates the structural rules.  Networks are immutable after
construction and safe to share between concurrent simulations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .gas import GasConstants


class NetworkError(ValueError):
    """Raised when a topology document violates a structural rule."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


POWER_KINDS = ("Vphi", "PV", "PQ", "StochasticPQ")
GAS_KINDS = ("source", "sink", "junction")


@dataclass(frozen=True)
class PowerNode:
    id: str
    kind: str
    g_shunt: float = 0.0   # per-unit self admittance, real part
    b_shunt: float = 0.0   # per-unit self admittance, imaginary part


@dataclass(frozen=True)
class TransmissionLine:
    id: str
    from_node: str
    to_node: str
    g: float
    b: float


@dataclass(frozen=True)
class Pipeline:
    id: str
    from_node: str
    to_node: str
    length_m: float
    diameter_m: float
    roughness_m: float
    n_cells: int          # K; the grid has K+1 points
    area_m2: float

    @property
    def dx_m(self) -> float:
        return self.length_m / self.n_cells

    @staticmethod
    def from_geometry(id, from_node, to_node, length_m, diameter_m, roughness_m,
                      target_dx_m, area_m2=None):
        """The requested spatial step is rounded so the cell count is an
        integer; rounding up never coarsens below the request."""
        if length_m <= 0 or diameter_m <= 0 or target_dx_m <= 0:
            raise NetworkError(f"pipeline {id!r}: non-positive geometry")
        if roughness_m < 0:
            raise NetworkError(f"pipeline {id!r}: negative roughness")
        n_cells = max(1, math.ceil(length_m / target_dx_m - 1e-12))
        if area_m2 is None:
            area_m2 = math.pi * diameter_m**2 / 4.0
        elif area_m2 <= 0:
            raise NetworkError(f"pipeline {id!r}: non-positive cross-section")
        return Pipeline(id, from_node, to_node, float(length_m), float(diameter_m),
                        float(roughness_m), int(n_cells), float(area_m2))


@dataclass(frozen=True)
class ControlledArc:
    id: str
    from_node: str
    to_node: str
    kind: str             # "compressor" | "valve"
    u_min_bar: float
    u_max_bar: float


@dataclass(frozen=True)
class GasNode:
    id: str
    kind: str             # "source" | "sink" | "junction"


@dataclass(frozen=True)
class ConversionArc:
    """Gas <-> power conversion plant between a gas sink and a slack node."""

    id: str
    gas_node: str
    power_node: str
    e_power_to_gas: float   # MW s / m^3
    e_gas_to_power: float   # MW s / m^3
    kappa: float            # m^3/s, half width of the smoothing window


@dataclass(frozen=True)
class Network:
    power_nodes: tuple
    lines: tuple
    gas_nodes: tuple
    pipelines: tuple
    controlled_arcs: tuple
    conversion_arcs: tuple
    constants: GasConstants = field(default_factory=GasConstants)

    def __post_init__(self):
        object.__setattr__(self, "_power_index",
                           {n.id: i for i, n in enumerate(self.power_nodes)})
        object.__setattr__(self, "_gas_index",
                           {n.id: i for i, n in enumerate(self.gas_nodes)})
        arcs = {}
        for group in (self.lines, self.pipelines, self.controlled_arcs,
                      self.conversion_arcs):
            for a in group:
                arcs[a.id] = a
        object.__setattr__(self, "_arcs", arcs)
        incident = {n.id: [] for n in self.gas_nodes}
        for a in list(self.pipelines) + list(self.controlled_arcs):
            incident[a.from_node].append(a)
            incident[a.to_node].append(a)
        for a in self.conversion_arcs:
            incident[a.gas_node].append(a)
        for lst in incident.values():
            lst.sort(key=lambda a: a.id)
        object.__setattr__(self, "_gas_incident", incident)

    def power_index(self, node_id: str) -> int:
        return self._power_index[node_id]

    def gas_index(self, node_id: str) -> int:
        return self._gas_index[node_id]

    def arc(self, arc_id: str):
        return self._arcs[arc_id]

    def gas_arcs_at(self, node_id: str) -> list:
        """Incident gas-side arcs (pipes, controlled and conversion arcs),
        sorted by arc id."""
        return self._gas_incident[node_id]

    def incidence_sign(self, node_id: str, arc_id: str) -> int:
        """+1 if the arc starts at the node, -1 if it ends there."""
        arc = self._arcs.get(arc_id)
        if arc is None:
            raise NetworkError(f"unknown arc {arc_id!r}")
        if isinstance(arc, ConversionArc):
            start, end = arc.gas_node, arc.power_node
        else:
            start, end = arc.from_node, arc.to_node
        if node_id == start:
            return +1
        if node_id == end:
            return -1
        raise NetworkError(f"arc {arc_id!r} is not incident to node {node_id!r}")


def _require(doc, key, where, errors, default=None):
    if key in doc:
        return doc[key]
    if default is not None:
        return default
    errors.append(f"{where}: missing field {key!r}")
    return None


def build_network(topology: dict) -> Network:
    """Validated Network from a parsed topology document.

    Collects all structural errors before raising so a broken file is
    reported in one pass.
    """
    errors = []
    seen_nodes = set()
    seen_arcs = set()

    def check_unique(kind, ident, seen):
        if not ident:
            errors.append(f"{kind} with empty id")
        elif ident in seen:
            errors.append(f"duplicate {kind} id {ident!r}")
        seen.add(ident)

    power_nodes = []
    for rec in topology.get("power_nodes", []):
        ident = rec.get("id", "")
        check_unique("node", ident, seen_nodes)
        kind = rec.get("kind", "")
        if kind not in POWER_KINDS:
            errors.append(f"power node {ident!r}: unknown kind {kind!r}")
        power_nodes.append(PowerNode(ident, kind,
                                     float(rec.get("G_pu", 0.0)),
                                     float(rec.get("B_pu", 0.0))))

    gas_nodes = []
    for rec in topology.get("gas_nodes", []):
        ident = rec.get("id", "")
        check_unique("node", ident, seen_nodes)
        kind = rec.get("kind", "")
        if kind not in GAS_KINDS:
            errors.append(f"gas node {ident!r}: unknown kind {kind!r}")
        gas_nodes.append(GasNode(ident, kind))

    power_ids = {n.id for n in power_nodes}
    gas_ids = {n.id for n in gas_nodes}

    lines = []
    for rec in topology.get("transmission_lines", []):
        ident = rec.get("id", "")
        check_unique("arc", ident, seen_arcs)
        for end in ("from", "to"):
            if rec.get(end) not in power_ids:
                errors.append(f"line {ident!r}: endpoint {rec.get(end)!r} "
                              "is not a power node")
        if rec.get("from") == rec.get("to"):
            errors.append(f"line {ident!r}: self loop")
        lines.append(TransmissionLine(ident, rec.get("from"), rec.get("to"),
                                      float(rec.get("G_pu", 0.0)),
                                      float(rec.get("B_pu", 0.0))))

    pipelines = []
    for rec in topology.get("pipelines", []):
        ident = rec.get("id", "")
        check_unique("arc", ident, seen_arcs)
        for end in ("from", "to"):
            if rec.get(end) not in gas_ids:
                errors.append(f"pipeline {ident!r}: endpoint {rec.get(end)!r} "
                              "is not a gas node")
        if rec.get("from") == rec.get("to"):
            errors.append(f"pipeline {ident!r}: self loop")
        try:
            pipelines.append(Pipeline.from_geometry(
                ident, rec.get("from"), rec.get("to"),
                float(rec.get("length_m", 0.0)),
                float(rec.get("diameter_m", 0.0)),
                float(rec.get("roughness_m", 0.0)),
                float(rec.get("target_dx_m", 0.0)),
                rec.get("area_m2")))
        except NetworkError as exc:
            errors.extend(exc.errors)

    controlled = []
    for kind, key in (("compressor", "compressors"), ("valve", "valves")):
        for rec in topology.get(key, []):
            ident = rec.get("id", "")
            check_unique("arc", ident, seen_arcs)
            for end in ("from", "to"):
                if rec.get(end) not in gas_ids:
                    errors.append(f"{kind} {ident!r}: endpoint {rec.get(end)!r} "
                                  "is not a gas node")
            u_min = float(rec.get("u_min_bar", 0.0))
            u_max = float(rec.get("u_max_bar", 0.0))
            if u_min < 0:
                errors.append(f"{kind} {ident!r}: control bound must be >= 0")
            if u_max < u_min:
                errors.append(f"{kind} {ident!r}: empty control range")
            controlled.append(ControlledArc(ident, rec.get("from"),
                                            rec.get("to"), kind, u_min, u_max))

    power_by_id = {n.id: n for n in power_nodes}
    gas_by_id = {n.id: n for n in gas_nodes}
    conversions = []
    converted_power_nodes = set()
    for rec in topology.get("conversion_arcs", []):
        ident = rec.get("id", "")
        check_unique("arc", ident, seen_arcs)
        gn = gas_by_id.get(rec.get("gas_node"))
        pn = power_by_id.get(rec.get("power_node"))
        if gn is None:
            errors.append(f"conversion arc {ident!r}: gas endpoint "
                          f"{rec.get('gas_node')!r} is not a gas node")
        elif gn.kind != "sink":
            errors.append(f"conversion arc {ident!r}: gas endpoint must be a sink")
        if pn is None:
            errors.append(f"conversion arc {ident!r}: power endpoint "
                          f"{rec.get('power_node')!r} is not a power node")
        elif pn.kind != "Vphi":
            errors.append(f"conversion arc {ident!r}: conversion endpoint must be Vphi")
        if pn is not None:
            if pn.id in converted_power_nodes:
                errors.append(f"conversion arc {ident!r}: power node {pn.id!r} "
                              "already carries a conversion arc")
            converted_power_nodes.add(pn.id)
        e_ptg = float(rec.get("E_power_to_gas_MW_s_m3", 0.0))
        e_gtp = float(rec.get("E_gas_to_power_MW_s_m3", 0.0))
        kappa = float(rec.get("kappa_m3_s", 0.0))
        if e_ptg <= 0 or e_gtp <= 0 or kappa <= 0:
            errors.append(f"conversion arc {ident!r}: efficiencies and kappa "
                          "must be positive")
        conversions.append(ConversionArc(ident, rec.get("gas_node"),
                                         rec.get("power_node"),
                                         e_ptg, e_gtp, kappa))

    if power_nodes and not any(n.kind == "Vphi" for n in power_nodes):
        errors.append("power network has no Vphi (slack) node")

    # every gas node must touch at least one pressure-bearing arc, otherwise
    # its coupling rows cannot be satisfied
    touched = set()
    for a in pipelines + controlled:
        touched.add(a.from_node)
        touched.add(a.to_node)
    for n in gas_nodes:
        if n.id not in touched:
            errors.append(f"gas node {n.id!r} has no incident pipeline or "
                          "controlled arc")

    if errors:
        raise NetworkError(errors)

    consts = topology.get("gas_constants")
    constants = GasConstants(
        rho0=float(consts.get("rho0_kg_m3", 0.785)),
        c_vac=float(consts.get("c_vac_m_s", 364.87)),
        alpha_per_bar=float(consts.get("alpha_per_bar", -0.00224)),
        eta=float(consts.get("eta_kg_m_s", 1.0e-5)),
    ) if consts else GasConstants()

    return Network(tuple(power_nodes), tuple(lines), tuple(gas_nodes),
                   tuple(pipelines), tuple(controlled), tuple(conversions),
                   constants)


def to_topology_document(net: Network) -> dict:
    """Inverse of build_network up to field defaults; round-trips exactly."""
    doc = {
        "power_nodes": [{"id": n.id, "kind": n.kind, "G_pu": n.g_shunt,
                         "B_pu": n.b_shunt} for n in net.power_nodes],
        "transmission_lines": [{"id": a.id, "from": a.from_node, "to": a.to_node,
                                "G_pu": a.g, "B_pu": a.b} for a in net.lines],
        "gas_nodes": [{"id": n.id, "kind": n.kind} for n in net.gas_nodes],
        "pipelines": [{"id": a.id, "from": a.from_node, "to": a.to_node,
                       "length_m": a.length_m, "diameter_m": a.diameter_m,
                       "roughness_m": a.roughness_m,
                       "target_dx_m": a.dx_m, "area_m2": a.area_m2}
                      for a in net.pipelines],
        "compressors": [{"id": a.id, "from": a.from_node, "to": a.to_node,
                         "u_min_bar": a.u_min_bar, "u_max_bar": a.u_max_bar}
                        for a in net.controlled_arcs if a.kind == "compressor"],
        "valves": [{"id": a.id, "from": a.from_node, "to": a.to_node,
                    "u_min_bar": a.u_min_bar, "u_max_bar": a.u_max_bar}
                   for a in net.controlled_arcs if a.kind == "valve"],
        "conversion_arcs": [{"id": a.id, "gas_node": a.gas_node,
                             "power_node": a.power_node,
                             "E_power_to_gas_MW_s_m3": a.e_power_to_gas,
                             "E_gas_to_power_MW_s_m3": a.e_gas_to_power,
                             "kappa_m3_s": a.kappa} for a in net.conversion_arcs],
        "gas_constants": {"rho0_kg_m3": net.constants.rho0,
                          "c_vac_m_s": net.constants.c_vac,
                          "alpha_per_bar": net.constants.alpha_per_bar,
                          "eta_kg_m_s": net.constants.eta},
    }
    return doc
