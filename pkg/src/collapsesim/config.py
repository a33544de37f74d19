"""Run configurations: JSON schemas, defaults and validation diagnostics.

A config is one JSON object.  Top-level keys common to every experiment:
``experiment``, ``master_seed``, ``trials``, ``workers``, ``out_dir``.  The
rest are experiment specific; see ``SCHEMAS`` and ``DEFAULTS``.  Unknown keys
are rejected at every level.
"""

from __future__ import annotations

import copy
import hashlib
import json
from typing import Any

import jsonschema

from .errors import ConfigurationError

EXPERIMENTS = ("born", "martingale", "scaling", "path_independence", "epr", "sprinkling_invariance")

_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}
_PROB = {"type": "number", "exclusiveMinimum": 0.5, "exclusiveMaximum": 1}

_COMMON = {
    "experiment": {"enum": list(EXPERIMENTS)},
    "master_seed": {"type": "integer", "minimum": 0},
    "trials": _POS_INT,
    "workers": _POS_INT,
    "out_dir": {"type": "string"},
}

_GRW = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n_sites": {"type": "integer", "minimum": 2},
        "dx": _POS,
        "lam": _NONNEG,
        "T": _NONNEG,
        "dt": _POS,
        "separation": _POS,
        "sigma": _POS,
        "hamiltonian": {"enum": ["none", "free", "harmonic"]},
        "omega": _POS,
    },
}

_FIELDLOC = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n_sites": {"type": "integer", "minimum": 2},
        "n_max": _POS_INT,
        "cluster": _POS_INT,
        "sites": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
        "kernel_width": _NONNEG,
        "kernel_radius": {"type": "integer", "minimum": 0},
        "mu": _NONNEG,
        "T": _NONNEG,
        "J_hop": {"type": "number"},
        "dt": _POS,
    },
}

_BRANCH = {
    "type": "object",
    "additionalProperties": False,
    "required": ["columns"],
    "properties": {
        "columns": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "J": _NONNEG,
    },
}

_REL = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n_t": _POS_INT,
        "n_x": _POS_INT,
        "a_t": _POS,
        "a_x": _POS,
        "d_f": _POS_INT,
        "d_g": _POS_INT,
        "g0": _POS,
        "profile": {"enum": ["uniform", "cone_gaussian"]},
        "s": _POS,
        "branches": {"type": "array", "items": _BRANCH, "minItems": 1},
        "J": _NONNEG,
        "mu": _NONNEG,
        "tier": {"enum": ["branch", "exact"]},
        "mode": {"enum": ["clt", "enumerate"]},
        "n_max": _POS_INT,
        "dim_cap": _POS_INT,
    },
}

_WEIGHTS = {"type": "array", "items": _NONNEG, "minItems": 2, "maxItems": 2}

_SPECIFIC: dict[str, dict[str, Any]] = {
    "born": {
        "required": ["r"],
        "properties": {
            "model": {"enum": ["grw", "fieldloc", "rel"]},
            "weights": _WEIGHTS,
            "r": _POS,
            "threshold": _PROB,
            "grw": _GRW,
            "fieldloc": _FIELDLOC,
            "rel": _REL,
        },
    },
    "martingale": {
        "required": ["r"],
        "properties": {
            "model": {"enum": ["all", "grw", "fieldloc", "rel"]},
            "r": _POS,
            "tolerance": _POS,
            "grw": _GRW,
            "fieldloc": _FIELDLOC,
        },
    },
    "scaling": {
        "required": ["r"],
        "properties": {
            "sweep": {"enum": ["mu", "r", "V_delta", "J"]},
            "values": {"type": "array", "items": _POS, "minItems": 2},
            "points": {"type": "integer", "minimum": 2},
            "span": {"type": "number", "minimum": 1},
            "r": _POS,
            "mu": _POS,
            "J": _POS,
            "V_delta_cells": _POS_INT,
            "a_t": _POS,
            "a_x": _POS,
            "g0": _POS,
            "mode": {"enum": ["clt", "enumerate"]},
            "threshold": _PROB,
            "max_time": _POS,
            "min_reduced": {"type": "number", "minimum": 0, "maximum": 1},
            "expected_slope": {"type": "number"},
            "slope_tolerance": _POS,
        },
    },
    "path_independence": {
        "required": ["r"],
        "properties": {
            "r": _POS,
            "n_t": _POS_INT,
            "n_x": _POS_INT,
            "n_max": _POS_INT,
            "dim_cap": _POS_INT,
            "sources": {
                "type": "array",
                "items": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["branch", "cell", "J"],
                    "properties": {
                        "branch": {"type": "integer", "minimum": 0},
                        "cell": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
                        "J": _NONNEG,
                    },
                },
            },
            "weights": {"type": "array", "items": _NONNEG, "minItems": 1},
            "hits": {
                "type": "array",
                "items": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
            },
            "tilt": _NONNEG,
            "leak": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "tolerance": _POS,
            "control_min": _POS,
        },
    },
    "epr": {
        "required": ["r"],
        "properties": {
            "r": _POS,
            "weights": _WEIGHTS,
            "n_t": _POS_INT,
            "block": _POS_INT,
            "gap": {"type": "integer", "minimum": 0},
            "J": _POS,
            "mu": _POS,
            "a_t": _POS,
            "a_x": _POS,
            "local_threshold": _PROB,
        },
    },
    "sprinkling_invariance": {
        "properties": {
            "mu": _POS,
            "side": _POS,
            "rapidities": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "control_bias": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "control_rapidity": {"type": "number"},
        },
    },
}


def _schema(name: str) -> dict:
    spec = _SPECIFIC[name]
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "additionalProperties": False,
        "required": spec.get("required", []),
        "properties": {**_COMMON, **spec["properties"]},
    }


SCHEMAS = {name: _schema(name) for name in EXPERIMENTS}

_REL_DEFAULT = {
    "n_t": 60,
    "n_x": 8,
    "a_t": 1.0,
    "a_x": 2.0,
    "d_f": 1,
    "d_g": 1,
    "g0": 1.0,
    "profile": "uniform",
    "s": 1.0,
    "branches": [{"columns": [1, 2]}, {"columns": [5, 6]}],
    "J": 0.5,
    "mu": 0.5,
    "tier": "branch",
    "mode": "clt",
    "n_max": 8,
    "dim_cap": 4_000_000,
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "born": {
        "master_seed": 0,
        "trials": 10_000,
        "workers": 1,
        "model": "grw",
        "weights": [0.3, 0.7],
        "threshold": 0.99,
        "grw": {
            "n_sites": 256,
            "dx": 0.05,
            "lam": 50.0,
            "T": 1.0,
            "dt": 0.01,
            "separation": 10.0,
            "sigma": 0.25,
            "hamiltonian": "none",
            "omega": 1.0,
        },
        "fieldloc": {
            "n_sites": 4,
            "n_max": 2,
            "cluster": 2,
            "sites": [0, 2],
            "kernel_width": 0.0,
            "kernel_radius": 0,
            "mu": 2.0,
            "T": 3.0,
            "J_hop": 0.0,
            "dt": 0.1,
        },
        "rel": _REL_DEFAULT,
    },
    "martingale": {
        "master_seed": 0,
        "trials": 1,
        "workers": 1,
        "model": "all",
        "tolerance": 1e-8,
        "grw": {"n_sites": 128, "dx": 0.1, "separation": 10.0, "sigma": 0.4},
        "fieldloc": {"n_sites": 3, "n_max": 2, "kernel_width": 0.7, "kernel_radius": 1},
    },
    "scaling": {
        "master_seed": 0,
        "trials": 200,
        "workers": 1,
        "sweep": "mu",
        "points": 6,
        "span": 10.0,
        "mu": 0.01,
        "J": 0.5,
        "V_delta_cells": 4,
        "a_t": 1.0,
        "a_x": 2.0,
        "g0": 1.0,
        "mode": "clt",
        "threshold": 0.99,
        "max_time": 1e7,
        "min_reduced": 0.8,
    },
    "path_independence": {
        "master_seed": 0,
        "trials": 8,
        "workers": 1,
        "n_t": 6,
        "n_x": 6,
        "n_max": 6,
        "dim_cap": 4_000_000,
        "weights": [0.5, 0.5],
        "sources": [{"branch": 0, "cell": [0, 1], "J": 0.5}, {"branch": 1, "cell": [0, 4], "J": 0.5}],
        "hits": [[2, 1], [2, 2], [2, 4], [3, 3]],
        "tilt": 4.0,
        "leak": 0.5,
        "tolerance": 1e-9,
        "control_min": 1e-3,
    },
    "epr": {
        "master_seed": 0,
        "trials": 5000,
        "workers": 1,
        "weights": [0.5, 0.5],
        "n_t": 40,
        "block": 2,
        "gap": 4,
        "J": 1.0,
        "mu": 0.5,
        "a_t": 1.0,
        "a_x": 2.0,
        "local_threshold": 0.999999,
    },
    "sprinkling_invariance": {
        "master_seed": 0,
        "trials": 10_000,
        "workers": 1,
        "mu": 5.0,
        "side": 2.0,
        "rapidities": [0.0, 0.5, 1.0],
        "alpha": 0.01,
        "control_bias": 0.3,
        "control_rapidity": 1.0,
    },
}

SCALING_TARGETS = {"mu": (-1.0, 0.2), "V_delta": (-1.0, 0.3), "r": (2.0, 0.3), "J": (-4.0, 0.5)}


def _describe(error: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in error.absolute_path)
    key = path or "<root>"
    v, val = error.validator, error.validator_value
    got = f" (got {json.dumps(error.instance)})" if v not in ("required", "additionalProperties") else ""
    if v == "required":
        missing = [k for k in val if isinstance(error.instance, dict) and k not in error.instance]
        name = ".".join([path, missing[0]]) if path else missing[0]
        return f"missing required key '{name}'"
    if v == "additionalProperties":
        extra = sorted(set(error.instance) - set(error.schema.get("properties", {})))
        where = f" in '{path}'" if path else ""
        return f"unknown key{'s' if len(extra) > 1 else ''} {', '.join(repr(e) for e in extra)}{where}"
    rules = {
        "minimum": f"{key} >= {val}",
        "exclusiveMinimum": f"{key} > {val}",
        "maximum": f"{key} <= {val}",
        "exclusiveMaximum": f"{key} < {val}",
        "enum": f"{key} in {val}",
        "type": f"{key} of type {val}",
        "minItems": f"{key} has at least {val} items",
        "maxItems": f"{key} has at most {val} items",
    }
    rule = rules.get(v, f"{key}: {error.message}")
    return f"key '{key}' violates constraint {rule}{got}"


def schema_errors(name: str, config: dict) -> list[str]:
    """All schema violations of ``config`` for experiment ``name``, as readable messages."""
    if name not in SCHEMAS:
        return [f"unknown experiment '{name}' (choose from {', '.join(EXPERIMENTS)})"]
    validator = jsonschema.Draft202012Validator(SCHEMAS[name])
    errors = sorted(validator.iter_errors(config), key=lambda e: (list(map(str, e.absolute_path)), e.validator))
    return [_describe(e) for e in errors]


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve(name: str, config: dict) -> dict:
    """Validate ``config`` and fill in defaults; raises ConfigurationError listing every violation."""
    errors = schema_errors(name, config)
    if config.get("experiment", name) != name:
        errors.append(f"key 'experiment' is '{config['experiment']}' but '{name}' was requested")
    if errors:
        raise ConfigurationError("; ".join(errors))
    merged = deep_merge(DEFAULTS[name], config)
    merged["experiment"] = name
    errors = semantic_errors(name, merged)
    if errors:
        raise ConfigurationError("; ".join(errors))
    return merged


def semantic_errors(name: str, cfg: dict) -> list[str]:
    """Cross-field checks the schema cannot express, including exact-tier dimension caps."""
    out = []
    if "weights" in cfg and abs(sum(cfg["weights"]) - 1.0) > 1e-9:
        out.append(f"key 'weights' violates constraint sum(weights) == 1 (got {sum(cfg['weights'])!r})")
    if name == "born" and cfg["model"] == "rel":
        rel = cfg["rel"]
        for b, br in enumerate(rel["branches"]):
            bad = [c for c in br["columns"] if c >= rel["n_x"]]
            if bad:
                out.append(f"key 'rel.branches.{b}.columns' violates constraint column < n_x = {rel['n_x']} (got {bad})")
        if len(rel["branches"]) != 2:
            out.append("key 'rel.branches' violates constraint exactly 2 branches for a two-outcome run")
        if not out and rel["tier"] == "exact":
            from .experiments import build_rel_config
            from .relmodel import exact_dimension

            rc = build_rel_config(rel, cfg["r"], cfg["weights"])
            dim = exact_dimension(rc.kernels, rc.branches, rc.n_max)
            if dim > rel["dim_cap"]:
                out.append(f"key 'rel.dim_cap' violates constraint exact-tier window dimension <= {rel['dim_cap']} (computed dimension {dim})")
    if name == "path_independence":
        n_b = len(cfg["weights"])
        for i, s in enumerate(cfg["sources"]):
            t, j = s["cell"]
            if s["branch"] >= n_b:
                out.append(f"key 'sources.{i}.branch' violates constraint branch < {n_b}")
            if t >= cfg["n_t"] or j >= cfg["n_x"]:
                out.append(f"key 'sources.{i}.cell' violates constraint cell inside the {cfg['n_t']}x{cfg['n_x']} lattice")
        for i, (t, j) in enumerate(cfg["hits"]):
            if t >= cfg["n_t"] or j >= cfg["n_x"]:
                out.append(f"key 'hits.{i}' violates constraint cell inside the {cfg['n_t']}x{cfg['n_x']} lattice")
        if not out:
            from .experiments import path_instance
            from .relmodel import exact_dimension

            kern, br = path_instance(cfg)
            dim = exact_dimension(kern, br, cfg["n_max"], lazy=False)
            if dim > cfg["dim_cap"]:
                out.append(f"key 'dim_cap' violates constraint exact-tier window dimension <= {cfg['dim_cap']} (computed dimension {dim})")
    if name == "born" and cfg["model"] == "fieldloc":
        fl = cfg["fieldloc"]
        if max(fl["sites"]) >= fl["n_sites"] or fl["sites"][0] == fl["sites"][1]:
            out.append(f"key 'fieldloc.sites' violates constraint two distinct sites < n_sites = {fl['n_sites']}")
        if fl["cluster"] > fl["n_max"]:
            out.append("key 'fieldloc.cluster' violates constraint cluster <= n_max")
    return out


def digest(config: dict) -> str:
    """SHA-256 of the canonical JSON encoding of a resolved config (run-only keys excluded)."""
    body = {k: v for k, v in config.items() if k not in ("workers", "out_dir")}
    text = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def load(path: str) -> dict:
    """Read a JSON config; parse errors are reported with line and column."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be a JSON object")
    return data
