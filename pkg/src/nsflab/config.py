"""Run configuration: a YAML/JSON tree with sections eos, transport, grid,
scaling, run and output.  Unknown keys are rejected."""
import json
import os
from dataclasses import dataclass, field

import jsonschema
import yaml

from .thermo import ThermoModel, make_P


class ConfigError(ValueError):
    pass


_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_eps = {"type": "number", "exclusiveMinimum": 0, "maximum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "eos": {"type": "object", "additionalProperties": False, "properties": {
            "P": {"oneOf": [{"const": "default"}, {
                "type": "object", "required": ["Z", "P"], "additionalProperties": False,
                "properties": {"Z": {"type": "array", "items": _pos, "minItems": 4},
                               "P": {"type": "array", "items": _nonneg, "minItems": 4}}}]},
            "a": _nonneg, "theta_bar": _pos}},
        "transport": {"type": "object", "additionalProperties": False, "properties": {
            "mu_bar": _nonneg, "eta_bar": _nonneg, "kappa_bar": _nonneg}},
        "grid": {"type": "object", "additionalProperties": False, "properties": {
            "nh": {"type": "integer", "minimum": 2}, "nv": {"type": ["integer", "null"], "minimum": 2},
            "Lh": _pos}},
        "scaling": {"type": "object", "additionalProperties": False, "properties": {
            "eps": {"oneOf": [_eps, {"type": "array", "items": _eps, "minItems": 1}]},
            "m": {"oneOf": [{"type": "number", "minimum": 1},
                            {"type": "array", "items": {"type": "number", "minimum": 1}}]},
            "centrifugal_on": {"type": "boolean"},
            "regimes": {"type": "array", "items": {
                "type": "object", "required": ["m"], "additionalProperties": False,
                "properties": {"m": {"type": "number", "minimum": 1},
                               "centrifugal_on": {"type": "boolean"}}}}}},
        "run": {"type": "object", "additionalProperties": False, "properties": {
            "t_end": _nonneg, "dt": _pos, "sample_dt": _pos, "seed": {"type": "integer"},
            "band": {"type": "integer", "minimum": 1}, "preset": {"type": "string"},
            "A": _pos, "mu": _nonneg, "kappa": _nonneg, "cfl": _pos,
            "amplitudes": {"type": "object", "additionalProperties": False, "properties": {
                "rho": _nonneg, "theta": _nonneg, "u": _nonneg}},
            "q0_mode": {"enum": ["pv", "verbatim"]}, "waves": {"type": "boolean"},
            "qg_compare": {"type": "boolean"}}},
        "output": {"type": "object", "additionalProperties": False, "properties": {
            "dir": {"type": "string"},
            "formats": {"type": "array", "items": {"enum": ["csv", "json", "svg"]}},
            "snapshots": {"type": "boolean"}}},
    },
}


@dataclass
class RunConfig:
    eos: dict = field(default_factory=dict)
    transport: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    scaling: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def model(self):
        try:
            P = make_P(self.eos.get("P", "default"))
            return ThermoModel(P, a=self.eos.get("a", 0.0),
                               theta_bar=self.eos.get("theta_bar", 1.0), **self.transport)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def get(self, section, key, default=None):
        return getattr(self, section).get(key, default)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def parse_config(tree):
    tree = tree or {}
    try:
        jsonschema.validate(tree, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    return RunConfig(**{k: dict(tree.get(k, {})) for k in CONFIG_SCHEMA["properties"]})


def load_config(path):
    """Read a .json or .yaml/.yml configuration file."""
    if path is None:
        return parse_config({})
    if not os.path.exists(path):
        raise ConfigError(f"config file {path} not found")
    with open(path) as fh:
        text = fh.read()
    try:
        tree = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if tree is not None and not isinstance(tree, dict):
        raise ConfigError("configuration root must be a mapping")
    return parse_config(tree)
