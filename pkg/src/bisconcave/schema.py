"""JSON schema for CLI reports."""

from __future__ import annotations

import jsonschema

_EXT_REAL = {"anyOf": [{"type": "number"}, {"enum": ["inf", "-inf"]}]}
_NULLABLE_NUM = {"anyOf": [{"type": "number"}, {"type": "null"}, {"enum": ["inf", "-inf"]}]}

_KNOT_FUNCTION = {
    "type": "object",
    "required": ["mode", "knots", "values", "left", "right"],
    "properties": {
        "mode": {"enum": ["step", "linear"]},
        "knots": {"type": "array", "items": {"type": "number"}},
        "values": {"type": "array", "items": _EXT_REAL},
        "left": _EXT_REAL,
        "right": _EXT_REAL,
        "monotone": {"type": "boolean"},
    },
}

_BAND = {
    "type": "object",
    "required": ["kind", "alpha", "status", "kappa", "lower", "upper"],
    "properties": {
        "kind": {"enum": ["ks", "wks"]},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "status": {"enum": ["feasible", "infeasible"]},
        "gamma_w": _NULLABLE_NUM,
        "s_star": _NULLABLE_NUM,
        "kappa": _NULLABLE_NUM,
        "lower": _KNOT_FUNCTION,
        "upper": _KNOT_FUNCTION,
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "bisconcave report",
    "type": "object",
    "required": ["command", "version", "status"],
    "properties": {
        "command": {"enum": ["band", "refine", "check", "cr", "max-sstar", "estimate-sstar",
                             "simulate", "threshold"]},
        "version": {"type": "string"},
        "status": {"enum": ["ok", "infeasible"]},
        "conclusion": {"type": "string"},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "s_star": _NULLABLE_NUM,
        "kappa": {"type": "number", "minimum": 0},
        "feasible": {"type": "boolean"},
        "iterations": {"type": "integer", "minimum": 0},
        "converged": {"type": "boolean"},
        "input": {"type": "object"},
        "band": _BAND,
        "omega_curve": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["s_star", "omega"],
                "properties": {"s_star": _EXT_REAL,
                               "omega": {"type": "number", "minimum": 0, "maximum": 1}},
            },
        },
        "files": {"type": "array", "items": {"type": "string"}},
    },
    "allOf": [
        {"if": {"properties": {"command": {"const": "refine"}}},
         "then": {"required": ["alpha", "s_star", "kappa", "feasible", "iterations", "band"]}},
        {"if": {"properties": {"command": {"const": "band"}}},
         "then": {"required": ["alpha", "kappa", "band"]}},
        {"if": {"properties": {"command": {"const": "estimate-sstar"}}},
         "then": {"required": ["alpha", "kappa", "omega_curve", "s_bar", "s_hat"]}},
        {"if": {"properties": {"status": {"const": "infeasible"}}},
         "then": {"required": ["conclusion"]}},
    ],
}


def validate_report(report: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``report`` does not match the schema."""
    jsonschema.validate(report, REPORT_SCHEMA, cls=jsonschema.Draft202012Validator)
