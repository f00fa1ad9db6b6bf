"""Run configuration: JSON schema, loading, and object construction."""

from __future__ import annotations

import hashlib
import json
from typing import Optional

import jsonschema

from .errors import ConfigError
from .geometry import Torus
from .models import (
    BdlpInGlauber,
    BranchingInGlauber,
    GlauberGlauber,
    RateModel,
    TwoBdlp,
)
from .potentials import Potential

_POTENTIAL_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["zero", "step", "exponential", "table"]},
        "height": {"type": "number"},
        "amplitude": {"type": "number"},
        "decay": {"type": "number", "exclusiveMinimum": 0},
        "cutoff": {"type": "number", "minimum": 0},
        "radii": {"type": "array", "items": {"type": "number"}, "minItems": 2},
        "values": {"type": "array", "items": {"type": "number"}, "minItems": 2},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_PARAMS = {
    "glauber_glauber": {
        "activities": ["z_minus", "z_plus"],
        "masses": [],
        "potentials": ["psi", "phi_minus", "phi_plus"],
    },
    "bdlp_in_glauber": {
        "activities": ["z_minus"],
        "masses": ["m_plus"],
        "potentials": ["psi", "a_minus", "a_plus", "b_minus", "b_plus"],
    },
    "branching_in_glauber": {
        "activities": ["z_minus"],
        "masses": ["m_plus"],
        "potentials": ["psi", "kappa", "phi", "a_plus"],
    },
    "two_bdlp": {
        "activities": ["z"],
        "masses": ["m_minus", "m_plus"],
        "potentials": ["a_minus", "a_plus", "b_minus", "b_plus",
                       "vphi_minus", "vphi_plus"],
    },
}

_MODEL_CLASSES = {
    "glauber_glauber": GlauberGlauber,
    "bdlp_in_glauber": BdlpInGlauber,
    "branching_in_glauber": BranchingInGlauber,
    "two_bdlp": TwoBdlp,
}


def _variant_schema(variant: str) -> dict:
    spec = _PARAMS[variant]
    props = {}
    required = []
    for name in spec["activities"]:
        props[name] = {"type": "number", "minimum": 0}
        required.append(name)
    for name in spec["masses"]:
        props[name] = {"type": "number", "exclusiveMinimum": 0}
        required.append(name)
    for name in spec["potentials"]:
        props[name] = _POTENTIAL_SCHEMA
    return {"type": "object", "properties": props, "required": required,
            "additionalProperties": False}


CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "model": {
            "type": "object",
            "properties": {
                "variant": {"enum": list(_PARAMS)},
                "params": {"type": "object"},
            },
            "required": ["variant", "params"],
            "additionalProperties": False,
        },
        "torus": {
            "type": "object",
            "properties": {
                "side": {"type": "number", "exclusiveMinimum": 0},
                "dim": {"enum": [1, 2, 3]},
            },
            "required": ["side", "dim"],
            "additionalProperties": False,
        },
        "check": {
            "type": "object",
            "properties": {
                "c_minus": {"type": "number", "exclusiveMinimum": 0},
                "c_plus": {"type": "number", "exclusiveMinimum": 0},
                "scan": {"type": "boolean"},
                "rho_inv": {"type": "number", "minimum": 0},
                "spot_check": {
                    "type": "object",
                    "properties": {
                        "samples": {"type": "integer", "minimum": 2},
                        "order_cap": {"type": "integer", "minimum": 0, "maximum": 6},
                        "configs_per_size": {"type": "integer", "minimum": 1},
                        "max_points": {"type": "integer", "minimum": 1, "maximum": 4},
                        "seed": {"type": "integer", "minimum": 0},
                        "sigma": {"type": "number", "exclusiveMinimum": 0},
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "invariant": {
            "type": "object",
            "properties": {
                "component": {"enum": ["environment", "averaged"]},
                "grid_points": {"type": "integer", "minimum": 2},
                "order": {"enum": [1, 2, 3]},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "closure": {"enum": ["poisson", "zero"]},
            },
            "additionalProperties": False,
        },
        "evolve": {
            "type": "object",
            "properties": {
                "component": {"enum": ["environment", "averaged"]},
                "grid_points": {"type": "integer", "minimum": 2},
                "order": {"enum": [1, 2, 3]},
                "t_final": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "record_every": {"type": "integer", "minimum": 1},
                "closure": {"enum": ["poisson", "zero"]},
                "initial_density": {"type": "number", "minimum": 0},
            },
            "required": ["t_final"],
            "additionalProperties": False,
        },
        "simulate": {
            "type": "object",
            "properties": {
                "epsilon": {"type": "number", "exclusiveMinimum": 0},
                "t_end": {"type": "number", "exclusiveMinimum": 0},
                "n_replicas": {"type": "integer", "minimum": 1},
                "n_times": {"type": "integer", "minimum": 2},
                "sys_density": {"type": "number", "minimum": 0},
                "env_density": {"type": "number", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "components": {
                    "type": "array",
                    "items": {"enum": ["system", "environment"]},
                    "minItems": 1,
                    "uniqueItems": True,
                },
                "max_events": {"type": "integer", "minimum": 1},
            },
            "required": ["t_end"],
            "additionalProperties": False,
        },
        "ergodicity": {
            "type": "object",
            "properties": {
                "n_replicas": {"type": "integer", "minimum": 2},
                "t_end": {"type": "number", "exclusiveMinimum": 0},
                "initial_density": {"type": "number", "minimum": 0},
                "target_density": {"type": "number", "minimum": 0},
                "n_times": {"type": "integer", "minimum": 3},
                "seed": {"type": "integer", "minimum": 0},
                "c_minus": {"type": "number", "exclusiveMinimum": 0},
                "grid_points": {"type": "integer", "minimum": 2},
            },
            "required": ["n_replicas", "t_end", "initial_density"],
            "additionalProperties": False,
        },
        "averaging": {
            "type": "object",
            "properties": {
                "epsilons": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 2,
                },
                "n_replicas": {"type": "integer", "minimum": 2},
                "t_end": {"type": "number", "exclusiveMinimum": 0},
                "sys_density": {"type": "number", "minimum": 0},
                "env_density": {"type": "number", "minimum": 0},
                "n_times": {"type": "integer", "minimum": 3},
                "seed": {"type": "integer", "minimum": 0},
                "grid_points": {"type": "integer", "minimum": 2},
            },
            "required": ["n_replicas", "t_end", "sys_density"],
            "additionalProperties": False,
        },
    },
    "required": ["model", "torus"],
    "additionalProperties": False,
}


def validate_config(cfg: dict) -> dict:
    """Schema-check a configuration dict, including the variant parameters."""
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
        variant = cfg["model"]["variant"]
        jsonschema.validate(cfg["model"]["params"], _variant_schema(variant))
    except jsonschema.ValidationError as e:
        raise ConfigError(f"invalid configuration: {e.message}") from e
    return cfg


def load_config(path: str) -> dict:
    try:
        with open(path) as f:
            cfg = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    return validate_config(cfg)


def potential_from_config(d: Optional[dict]) -> Potential:
    if d is None:
        return Potential.zero()
    kind = d["kind"]
    try:
        if kind == "zero":
            return Potential.zero()
        if kind == "step":
            return Potential.step(height=d["height"], cutoff=d["cutoff"])
        if kind == "exponential":
            return Potential.exponential(amplitude=d["amplitude"],
                                         decay=d["decay"], cutoff=d["cutoff"])
        if kind == "table":
            return Potential.table(radii=d["radii"], values=d["values"])
    except KeyError as e:
        raise ConfigError(f"potential spec missing field {e}") from e
    except ValueError as e:
        raise ConfigError(str(e)) from e
    raise ConfigError(f"unknown potential kind {kind!r}")


def model_from_config(cfg: dict) -> RateModel:
    spec = cfg["model"]
    variant = spec["variant"]
    params = spec["params"]
    kwargs = {}
    meta = _PARAMS[variant]
    for name in meta["activities"] + meta["masses"]:
        kwargs[name] = float(params[name])
    for name in meta["potentials"]:
        kwargs[name] = potential_from_config(params.get(name))
    try:
        return _MODEL_CLASSES[variant](**kwargs)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def torus_from_config(cfg: dict) -> Torus:
    t = cfg["torus"]
    return Torus(side=float(t["side"]), dim=int(t["dim"]))


def config_hash(cfg: dict) -> str:
    """Stable hash of the canonical JSON encoding."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
