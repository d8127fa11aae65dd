"""JSON schemas of the four structured input documents.

The solver-settings document (problem_data.json) is intentionally not
covered.  Schemas can be written next to a problem directory and referenced
from the inputs via "$schema" so json-aware editors validate while typing.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

_TIMELINE = {
    "type": "object",
    "properties": {
        "times_s": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
    },
    "required": ["times_s", "values"],
    "additionalProperties": False,
}

_ID = {"type": "string", "minLength": 1}

TOPOLOGY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "gaspower topology",
    "type": "object",
    "properties": {
        "id": {"type": "string"},
        "$schema": {"type": "string"},
        "gas_constants": {
            "type": "object",
            "properties": {
                "rho0_kg_m3": {"type": "number"},
                "c_vac_m_s": {"type": "number"},
                "alpha_per_bar": {"type": "number"},
                "eta_kg_m_s": {"type": "number"},
            },
            "additionalProperties": False,
        },
        "power_nodes": {"type": "array", "items": {
            "type": "object",
            "properties": {
                "id": _ID,
                "kind": {"enum": ["Vphi", "PV", "PQ", "StochasticPQ"]},
                "G_pu": {"type": "number"},
                "B_pu": {"type": "number"},
            },
            "required": ["id", "kind"],
            "additionalProperties": False,
        }},
        "transmission_lines": {"type": "array", "items": {
            "type": "object",
            "properties": {
                "id": _ID, "from": _ID, "to": _ID,
                "G_pu": {"type": "number"}, "B_pu": {"type": "number"},
            },
            "required": ["id", "from", "to"],
            "additionalProperties": False,
        }},
        "gas_nodes": {"type": "array", "items": {
            "type": "object",
            "properties": {
                "id": _ID,
                "kind": {"enum": ["source", "sink", "junction"]},
            },
            "required": ["id", "kind"],
            "additionalProperties": False,
        }},
        "pipelines": {"type": "array", "items": {
            "type": "object",
            "properties": {
                "id": _ID, "from": _ID, "to": _ID,
                "length_m": {"type": "number", "exclusiveMinimum": 0},
                "diameter_m": {"type": "number", "exclusiveMinimum": 0},
                "roughness_m": {"type": "number", "minimum": 0},
                "target_dx_m": {"type": "number", "exclusiveMinimum": 0},
                "area_m2": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["id", "from", "to", "length_m", "diameter_m",
                         "roughness_m", "target_dx_m"],
            "additionalProperties": False,
        }},
        "compressors": {"$ref": "#/$defs/controlled"},
        "valves": {"$ref": "#/$defs/controlled"},
        "conversion_arcs": {"type": "array", "items": {
            "type": "object",
            "properties": {
                "id": _ID, "gas_node": _ID, "power_node": _ID,
                "E_power_to_gas_MW_s_m3": {"type": "number", "exclusiveMinimum": 0},
                "E_gas_to_power_MW_s_m3": {"type": "number", "exclusiveMinimum": 0},
                "kappa_m3_s": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["id", "gas_node", "power_node",
                         "E_power_to_gas_MW_s_m3", "E_gas_to_power_MW_s_m3",
                         "kappa_m3_s"],
            "additionalProperties": False,
        }},
    },
    "$defs": {
        "controlled": {"type": "array", "items": {
            "type": "object",
            "properties": {
                "id": _ID, "from": _ID, "to": _ID,
                "u_min_bar": {"type": "number", "minimum": 0},
                "u_max_bar": {"type": "number", "minimum": 0},
            },
            "required": ["id", "from", "to", "u_min_bar", "u_max_bar"],
            "additionalProperties": False,
        }},
    },
    "additionalProperties": False,
}

BOUNDARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "gaspower boundary",
    "type": "object",
    "properties": {
        "$schema": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "power_nodes": {"type": "array", "items": {
            "type": "object",
            "properties": {
                "id": _ID,
                "V_pu": _TIMELINE,
                "phi_rad": _TIMELINE,
                "P_pu": _TIMELINE,
                "Q_pu": _TIMELINE,
                "uncertainty": {
                    "type": "object",
                    "properties": {
                        "theta": {"type": "number", "exclusiveMinimum": 0},
                        "sigma": {"type": "number", "minimum": 0},
                        "cutoff": {"type": "number", "minimum": 0, "maximum": 1},
                        "time_unit_s": {"type": "number", "exclusiveMinimum": 0},
                    },
                    "required": ["theta", "sigma"],
                    "additionalProperties": False,
                },
            },
            "required": ["id"],
            "additionalProperties": False,
        }},
        "gas_nodes": {"type": "array", "items": {
            "type": "object",
            "properties": {"id": _ID, "flow_m3_s": _TIMELINE},
            "required": ["id", "flow_m3_s"],
            "additionalProperties": False,
        }},
    },
    "additionalProperties": False,
}

INITIAL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "gaspower initial state",
    "type": "object",
    "properties": {
        "$schema": {"type": "string"},
        "power_nodes": {"type": "array", "items": {
            "type": "object",
            "properties": {
                "id": _ID,
                "V_pu": {"type": "number"}, "phi_rad": {"type": "number"},
                "P_pu": {"type": "number"}, "Q_pu": {"type": "number"},
            },
            "required": ["id", "V_pu", "phi_rad", "P_pu", "Q_pu"],
            "additionalProperties": False,
        }},
        "pipelines": {"type": "array", "items": {
            "type": "object",
            "properties": {
                "id": _ID,
                "x_m": {"type": "array", "items": {"type": "number"}},
                "pressure_bar": {"type": "array", "items": {"type": "number"}},
                "flow_m3_s": {"type": "array", "items": {"type": "number"}},
            },
            "required": ["id", "x_m", "pressure_bar", "flow_m3_s"],
            "additionalProperties": False,
        }},
        "controlled_arcs": {"type": "array", "items": {
            "type": "object",
            "properties": {
                "id": _ID,
                "p_in_bar": {"type": "number"}, "q_in_m3_s": {"type": "number"},
                "p_out_bar": {"type": "number"}, "q_out_m3_s": {"type": "number"},
            },
            "required": ["id", "p_in_bar", "q_in_m3_s", "p_out_bar",
                         "q_out_m3_s"],
            "additionalProperties": False,
        }},
        "conversion_arcs": {"type": "array", "items": {
            "type": "object",
            "properties": {"id": _ID, "flow_m3_s": {"type": "number"}},
            "required": ["id", "flow_m3_s"],
            "additionalProperties": False,
        }},
    },
    "additionalProperties": False,
}

CONTROL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "gaspower controls",
    "type": "object",
    "properties": {
        "$schema": {"type": "string"},
        "times_s": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "controls": {"type": "array", "items": {
            "type": "object",
            "properties": {
                "id": _ID,
                "values_bar": {"type": "array", "items": {"type": "number"},
                               "minItems": 1},
            },
            "required": ["id", "values_bar"],
            "additionalProperties": False,
        }},
    },
    "required": ["times_s"],
    "additionalProperties": False,
}

SCHEMAS = {
    "topology": TOPOLOGY_SCHEMA,
    "boundary": BOUNDARY_SCHEMA,
    "initial": INITIAL_SCHEMA,
    "control": CONTROL_SCHEMA,
}


def validate_document(doc: dict, kind: str) -> list:
    """Schema violations as path-qualified messages; empty when valid."""
    validator = jsonschema.Draft202012Validator(SCHEMAS[kind])
    out = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path)):
        path = "/".join(str(p) for p in err.absolute_path) or "(root)"
        out.append(f"{kind}.json: {path}: {err.message}")
    return out


def write_schemas(problem_dir) -> list:
    """Write the schema files into <dir>/schemas; returns the paths."""
    out_dir = Path(problem_dir) / "schemas"
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for kind, schema in SCHEMAS.items():
        path = out_dir / f"{kind}.schema.json"
        path.write_text(json.dumps(schema, indent=2) + "\n")
        written.append(path)
    return written


def insert_schema_keys(problem_dir) -> list:
    """Point the four input documents at the written schemas, idempotently."""
    base = Path(problem_dir)
    write_schemas(base)
    changed = []
    for kind in SCHEMAS:
        path = base / "problem" / f"{kind}.json"
        if not path.exists():
            continue
        doc = json.loads(path.read_text())
        ref = f"../schemas/{kind}.schema.json"
        if doc.get("$schema") != ref:
            doc["$schema"] = ref
            path.write_text(json.dumps(doc, indent=2) + "\n")
            changed.append(path)
    return changed
