"""Run configuration: JSON schema, defaults, presets and content hashing."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Any

import jsonschema

from .errors import ConfigError
from .expr import ExprSyntaxError, parse
from .grid import Disk, Domain, Rectangle

_NUM = {"type": "number"}
_EXPR = {"type": "string", "minLength": 1}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "nehari-forge run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["domain", "potential"],
    "properties": {
        "name": {"type": "string"},
        "domain": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type", "x0", "x1", "y0", "y1"],
                    "properties": {
                        "type": {"const": "rectangle"},
                        "x0": _NUM, "x1": _NUM, "y0": _NUM, "y1": _NUM,
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type", "radius"],
                    "properties": {
                        "type": {"const": "disk"},
                        "cx": _NUM, "cy": _NUM,
                        "radius": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            ]
        },
        "potential": _EXPR,
        "regularization": {"enum": ["offset", "cell_average"]},
        "lambda": {
            "oneOf": [
                {"type": "number", "exclusiveMinimum": 0},
                {"enum": ["auto:lambda1", "auto:lambda2"]},
            ]
        },
        "p": {"type": "number", "exclusiveMinimum": 2},
        "mode": {"enum": ["gs", "lens", "both", "eigs", "continuation", "symmetry", "reproduce"]},
        "seed_gs": _EXPR,
        "seed_lens": _EXPR,
        "resolution": {"type": "integer", "minimum": 2},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "grad_tol": {"type": "number", "exclusiveMinimum": 0},
                "eig_tol": {"type": "number", "exclusiveMinimum": 0},
                "symmetry_threshold": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["cg", "steepest"]},
                "step0": {"type": "number", "exclusiveMinimum": 0},
                "shrink": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "coarse_levels": {"type": "integer", "minimum": 0},
                "escapes": {"type": "integer", "minimum": 0},
                "morse_k": {"type": "integer", "minimum": 1},
            },
        },
        "eigs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"k": {"type": "integer", "minimum": 1}},
        },
        "continuation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p_list": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "number", "exclusiveMinimum": 2},
                },
                "mode": {"enum": ["gs", "lens"]},
                "lambda_factor": {"type": "number", "exclusiveMinimum": 0},
                "use_predictor": {"type": "boolean"},
            },
        },
        "symmetry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"field": {"type": "string"}},
        },
        "levels": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gs": {"type": "array", "items": _NUM},
                "lens": {"type": "array", "items": _NUM},
            },
        },
        "reference": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gs": {"$ref": "#/$defs/ref"},
                "lens": {"$ref": "#/$defs/ref"},
            },
        },
    },
    "$defs": {
        "ref": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"max": _NUM, "min": _NUM, "energy": _NUM},
        }
    },
}

DEFAULTS: dict[str, Any] = {
    "regularization": "offset",
    "lambda": 1.0,
    "p": 4.0,
    "mode": "both",
    "resolution": 128,
    "tolerances": {"grad_tol": 1e-7, "eig_tol": 1e-9, "symmetry_threshold": 1e-3, "max_iter": 5000},
    "solver": {"method": "cg", "step0": 1.0, "shrink": 0.5, "coarse_levels": 0, "escapes": 3, "morse_k": 6},
    "eigs": {"k": 6},
    "continuation": {
        "p_list": [3.0, 2.5, 2.2, 2.1, 2.05, 2.02],
        "mode": "gs",
        "lambda_factor": 1.0,
        "use_predictor": True,
    },
    "levels": {"gs": [1.0, 2.0], "lens": [-2.0, -1.0, 1.0, 2.0]},
}

_R = "sqrt(x^2+y^2)"
_NODAL_RADIAL = f"cos(pi*{_R}/2)*cos(2*pi*{_R})*cos(pi*{_R})"
_RECT = {"type": "rectangle", "x0": 0.0, "x1": 2.0, "y0": 0.0, "y1": 1.0}
_DISK = {"type": "disk", "cx": 0.0, "cy": 0.0, "radius": 1.0}

# The five published experiments, with their starting functions and reported values.
PRESETS: dict[str, dict[str, Any]] = {
    "square-negconst": {
        "name": "square-negconst",
        "domain": {"type": "rectangle", "x0": -1.0, "x1": 1.0, "y0": -1.0, "y1": 1.0},
        "potential": "-pi^2/4",
        "seed_gs": "(x-1)*(y-1)*(x+1)*(y+1)",
        "seed_lens": "sin(pi*(x+1))*sin(2*pi*(y+1))",
        "reference": {
            "gs": {"max": 2.18, "energy": 2.54},
            "lens": {"min": -4.61, "max": 4.61, "energy": 33.21},
        },
    },
    "rect-step10": {
        "name": "rect-step10",
        "domain": _RECT,
        "potential": "10*step(x-1)",
        "seed_gs": "(x-2)*(y-1)*x*y",
        "seed_lens": "sin(pi*(x+1))*sin(2*pi*(y+1))",
        "reference": {
            "gs": {"max": 5.98, "energy": 30.98},
            "lens": {"min": -8.67, "max": 6.53, "energy": 76.23},
        },
    },
    "rect-step35": {
        "name": "rect-step35",
        "domain": _RECT,
        "potential": "35*step(x-1)",
        "seed_gs": "(x-2)*(y-1)*x*y",
        "seed_lens": "sin(pi*(x+1))*sin(2*pi*(y+1))",
        "reference": {
            "gs": {"max": 6.19, "energy": 33.14},
            "lens": {"min": -9.8, "max": 9.7, "energy": 181.09},
        },
    },
    "disk-inverse-r": {
        "name": "disk-inverse-r",
        "domain": _DISK,
        "potential": "1/sqrt(x^2+y^2)",
        "regularization": "cell_average",
        "seed_gs": f"cos(pi*{_R}/2)",
        "seed_lens": _NODAL_RADIAL,
        "reference": {
            "gs": {"max": 4.15, "energy": 29.9},
            "lens": {"min": -6.36, "max": 6.36, "energy": 76.04},
        },
    },
    "disk-shifted": {
        "name": "disk-shifted",
        "domain": _DISK,
        "potential": "1/sqrt((x-0.5)^2+y^2)",
        "regularization": "cell_average",
        "seed_gs": f"cos(pi*{_R}/2)",
        "seed_lens": _NODAL_RADIAL,
        "reference": {
            "gs": {"max": 4.41, "energy": 18.74},
            "lens": {"min": -6.25, "max": 6.25, "energy": 76.23},
        },
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(raw: dict) -> dict:
    """Validate against the schema and fill defaults; raises :class:`ConfigError`."""
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    cfg = _merge(DEFAULTS, raw)
    for key in ("potential", "seed_gs", "seed_lens"):
        if key in cfg:
            try:
                parse(cfg[key])
            except ExprSyntaxError as exc:
                raise ConfigError(f"{key}: {exc}") from None
    ps = cfg["continuation"]["p_list"]
    if any(b >= a for a, b in zip(ps, ps[1:])):
        raise ConfigError("continuation/p_list: values must be strictly decreasing")
    try:
        domain_from_config(cfg["domain"])
    except ValueError as exc:
        raise ConfigError(f"domain: {exc}") from None
    return cfg


def load(path: str | Path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return validate(raw)


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return validate(PRESETS[name])


def domain_from_config(d: dict) -> Domain:
    if d["type"] == "rectangle":
        return Rectangle(float(d["x0"]), float(d["x1"]), float(d["y0"]), float(d["y1"]))
    return Disk(float(d.get("cx", 0.0)), float(d.get("cy", 0.0)), float(d["radius"]))


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical JSON encoding of the (validated) configuration."""
    return hashlib.sha256(canonical_json(cfg).encode("ascii")).hexdigest()
