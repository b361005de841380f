"""JSON run configuration: schema, parsing with defaults, and canonical emission."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List

import jsonschema

from .errors import ConfigError

COMMANDS = ("simulate", "ode", "exact", "lift", "verify")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_grid = {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1}

_KERNEL = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type"],
    "properties": {
        "type": {"enum": ["constant", "impulsion_power", "hard_sphere", "manev", "mass_only"]},
        "gamma": {"type": "number", "minimum": 0, "maximum": 2},
        "form": {"enum": ["constant", "additive", "multiplicative"]},
        "bound": _pos,
    },
}

_INIT = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "mass": {
            "type": "object", "additionalProperties": False, "required": ["type"],
            "properties": {"type": {"enum": ["monodisperse", "exponential"]},
                           "m0": _pos, "rate": _pos},
        },
        "momentum": {
            "type": "object", "additionalProperties": False, "required": ["type"],
            "properties": {"type": {"enum": ["gaussian", "samples"]},
                           "sigma": _pos,
                           "samples": {"type": "array", "minItems": 1,
                                       "items": {"type": "array", "minItems": 1, "maxItems": 3,
                                                 "items": _num}}},
        },
        "symmetrize": {"type": "boolean"},
    },
}

_SIMULATE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kernel", "n0", "t_grid"],
    "properties": {
        "kernel": _KERNEL,
        "n0": {"type": "integer", "minimum": 2},
        "d": {"enum": [1, 2, 3]},
        "t_grid": _grid,
        "init": _INIT,
        "ensemble": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "moments": {"type": "array", "minItems": 1,
                    "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": _num}},
    },
}

_ODE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["values", "t_end", "dt"],
    "properties": {
        "d": {"enum": [1, 2, 3]},
        "values": {"type": "array", "minItems": 2, "items": _pos},
        "k_d": _pos,
        "t_end": _pos,
        "dt": _pos,
        "record_every": {"type": "integer", "minimum": 1},
    },
}

_EXACT = {
    "type": "object",
    "additionalProperties": False,
    "required": ["t_grid", "zeta_grid", "xi_grid"],
    "properties": {
        "datum": {"type": "object", "additionalProperties": False,
                  "properties": {"N": _pos, "rate": _pos, "sigma": _pos}},
        "t_grid": _grid,
        "zeta_grid": _grid,
        "xi_grid": {"type": "array", "items": _num, "minItems": 1},
    },
}

_LIFT = {
    "type": "object",
    "additionalProperties": False,
    "required": ["t_grid"],
    "properties": {
        "c": _pos,
        "k_values": {"type": "array", "items": {"type": "number", "exclusiveMinimum": -3},
                     "minItems": 1},
        "t_grid": {"type": "array", "items": _pos, "minItems": 2},
    },
}

_VERIFY = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "criteria": {"type": "array", "uniqueItems": True,
                     "items": {"enum": ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9",
                                        "A10"]}},
        "overrides": {"type": "object",
                      "propertyNames": {"pattern": "^A([1-9]|10)$"},
                      "additionalProperties": {"type": "object"}},
        "inject": {"type": "object", "additionalProperties": False,
                   "properties": {"k_d": _pos}},
    },
}

PARAM_SCHEMAS = {"simulate": _SIMULATE, "ode": _ODE, "exact": _EXACT, "lift": _LIFT,
                 "verify": _VERIFY}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["command"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "params": {"type": "object"},
        "formats": {"type": "array", "uniqueItems": True, "minItems": 1,
                    "items": {"enum": ["csv", "json"]}},
    },
}

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "simulate": {"d": 1, "init": {"mass": {"type": "monodisperse", "m0": 1.0},
                                  "momentum": {"type": "gaussian", "sigma": 1.0},
                                  "symmetrize": True},
                 "ensemble": 1, "seed": 0, "moments": [[0, 0], [1, 0], [0, 2]]},
    "ode": {"d": 1, "record_every": 1},
    "exact": {"datum": {"N": 1.0, "rate": 1.0, "sigma": 1.0}},
    "lift": {"c": 1.0, "k_values": [0, 1, 2]},
    "verify": {"overrides": {}, "inject": {}},
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: Dict[str, Any] = field(default_factory=dict)
    formats: tuple = ("csv",)

    def to_dict(self) -> dict:
        return {"command": self.command, "params": copy.deepcopy(self.params),
                "formats": list(self.formats)}

    def sha256(self) -> str:
        return hashlib.sha256(emit_config(self).encode()).hexdigest()


def _reject_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ConfigError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _merge_defaults(defaults, given):
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge_defaults(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _errors(schema, data, prefix) -> List[str]:
    v = jsonschema.Draft202012Validator(schema)
    msgs = []
    for e in sorted(v.iter_errors(data), key=lambda e: list(e.absolute_path)):
        where = "/".join(str(p) for p in e.absolute_path)
        msgs.append(f"{prefix}{'/' + where if where else ''}: {e.message}")
    return msgs


def _semantic_errors(cmd: str, p: dict) -> List[str]:
    errs = []
    if cmd == "simulate":
        grid = p.get("t_grid", [])
        if any(b <= a for a, b in zip(grid, grid[1:])):
            errs.append("params/t_grid: must be strictly increasing")
        init = p.get("init", {})
        if init.get("symmetrize", True) and p.get("n0", 2) % 2:
            errs.append("params/n0: symmetrized initial data needs an even n0")
        k = p.get("kernel", {})
        if k.get("type") == "impulsion_power" and "gamma" not in k:
            errs.append("params/kernel: impulsion_power needs gamma")
        if k.get("type") == "manev":
            errs.append("params/kernel: the Manev kernel has no finite majorant and cannot be simulated")
        mom = init.get("momentum", {})
        if mom.get("type") == "samples":
            if "samples" not in mom:
                errs.append("params/init/momentum: samples list required")
            elif any(len(s) != p.get("d", 1) for s in mom["samples"]):
                errs.append("params/init/momentum/samples: vectors must have length d")
    if cmd == "ode":
        vals = p.get("values", [])
        if len(vals) > 3 and p.get("d", 1) != 1:
            errs.append("params/values: moments beyond M_4 close only in dimension 1")
    if cmd in ("exact", "lift"):
        grid = p.get("t_grid", [])
        if any(b <= a for a, b in zip(grid, grid[1:])):
            errs.append("params/t_grid: must be strictly increasing")
    return errs


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration; all problems are reported together."""
    try:
        raw = json.loads(text, object_pairs_hook=_reject_duplicates)
    except ConfigError:
        raise
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    errs = _errors(SCHEMA, raw, "config")
    cmd = raw.get("command")
    params = raw.get("params", {})
    if cmd in PARAM_SCHEMAS and isinstance(params, dict):
        errs += _errors(PARAM_SCHEMAS[cmd], params, "params")
        if not errs:
            params = _merge_defaults(DEFAULTS[cmd], params)
            errs += _semantic_errors(cmd, params)
    if errs:
        raise ConfigError(errs)
    return RunConfig(cmd, params, tuple(raw.get("formats", ["csv"])))


def emit_config(cfg: RunConfig) -> str:
    """Canonical JSON text (sorted keys) of a configuration."""
    return json.dumps(cfg.to_dict(), sort_keys=True, indent=2)
