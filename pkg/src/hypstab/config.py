"""Scenario configuration: JSON schema, dataclass and data construction."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .errors import BadParameter, ConfigError
from .flux_models import FluxModel, builtin
from .functionals_pcw import JumpTable, PiecewiseConstantFn, StabilityConstants
from .generators import random_admissible_pcf, random_bv, random_pcf

TASKS = ("functionals", "phi-pair", "evolve", "approx-study", "calibrate", "acceptance")

_DATA = {
    "oneOf": [
        {"type": "object", "required": ["pcf"], "additionalProperties": False,
         "properties": {"pcf": {"type": "object", "properties": {
             "breakpoints": {"type": "array", "items": {"type": "number"}},
             "values": {"type": "array"}}, "additionalProperties": False}}},
        {"type": "object", "required": ["bv"], "additionalProperties": False,
         "properties": {"bv": {"type": "object", "required": ["pieces"], "properties": {
             "pieces": {"type": "array", "items": {"type": "object", "required": ["a", "b", "p", "slope"]}}},
             "additionalProperties": False}}},
        {"type": "object", "required": ["jumps"], "additionalProperties": False,
         "properties": {"jumps": {"type": "object", "required": ["positions", "strengths"], "properties": {
             "positions": {"type": "array", "items": {"type": "number"}},
             "strengths": {"type": "array"}}, "additionalProperties": False}}},
        {"type": "object", "required": ["generator"], "additionalProperties": False,
         "properties": {"generator": {"type": "object", "required": ["kind", "seed"], "properties": {
             "kind": {"enum": ["pcf", "admissible_pcf", "bv"]},
             "seed": {"type": "integer"},
             "jumps": {"type": "integer", "minimum": 2},
             "pieces": {"type": "integer", "minimum": 1},
             "budget": {"type": "number", "exclusiveMinimum": 0},
             "amplitude": {"type": "number", "exclusiveMinimum": 0},
             "compressive": {"type": "boolean"}}, "additionalProperties": False}}},
    ]
}

SCHEMA = {
    "type": "object",
    "required": ["task"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "task": {"enum": list(TASKS)},
        "model": {"type": "object", "required": ["id"], "additionalProperties": False, "properties": {
            "id": {"enum": ["burgers", "p_system", "linear"]},
            "params": {"type": "object"}}},
        "constants": {"type": "object", "additionalProperties": False, "properties": {
            "C0": {"type": "number", "exclusiveMinimum": 0},
            "kappa1": {"type": "number", "exclusiveMinimum": 0},
            "kappa2": {"type": "number", "exclusiveMinimum": 0},
            "delta": {"type": "number", "exclusiveMinimum": 0}}},
        "initial": _DATA,
        "initial_tilde": _DATA,
        "eps": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "T": {"type": "number", "minimum": 0},
        "sample_times": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "threshold": {"oneOf": [{"type": "number", "minimum": 0}, {"enum": ["eps", "eps^2"]}]},
        "nu": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "seed": {"type": "integer"},
        "samples": {"type": "integer", "minimum": 1},
        "criteria": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 9}},
        "outputs": {"type": "object", "additionalProperties": False, "properties": {
            "csv": {"type": "string"}, "manifest": {"type": "string"}, "report": {"type": "string"},
            "events": {"type": "string"}, "constants": {"type": "string"}}},
    },
}

BATCH_SCHEMA = {"type": "object", "required": ["scenarios"], "additionalProperties": False,
                "properties": {"scenarios": {"type": "array", "items": SCHEMA, "minItems": 1}}}


@dataclass
class ScenarioConfig:
    task: str
    name: str = "scenario"
    model: dict = field(default_factory=lambda: {"id": "burgers"})
    constants: dict | None = None
    initial: dict | None = None
    initial_tilde: dict | None = None
    eps: list = field(default_factory=lambda: [0.01])
    T: float = 1.0
    sample_times: list | None = None
    threshold: object = "eps"
    nu: list = field(default_factory=lambda: [10, 20, 40, 80])
    seed: int | None = None
    samples: int | None = None
    criteria: list | None = None
    outputs: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        try:
            jsonschema.validate(data, SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"invalid config: {exc.message} at {list(exc.absolute_path)}") from None
        cfg = cls(**data)
        if cfg.task == "approx-study" and cfg.initial is None:
            raise ConfigError("task 'approx-study' needs initial data")
        return cfg

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if v is not None}
        return json.loads(json.dumps(out))

    def with_seed(self, seed: int) -> "ScenarioConfig":
        """Override every seed (scenario and generators)."""
        data = self.to_dict()
        data["seed"] = seed
        for key in ("initial", "initial_tilde"):
            if key in data and "generator" in data[key]:
                # the tilde datum must not coincide with the main one
                data[key]["generator"]["seed"] = seed + (1 if key == "initial_tilde" else 0)
        return ScenarioConfig.from_dict(data)

    # -- construction --------------------------------------------------

    def build_model(self) -> FluxModel:
        params = dict(self.model.get("params", {}))
        try:
            return builtin(self.model["id"], **params)
        except BadParameter as exc:
            raise ConfigError(str(exc)) from None

    def build_constants(self, model_name: str | None = None) -> StabilityConstants:
        if self.constants is None:
            from .acceptance import fitted_constants, model_constants
            name = model_name or self.model["id"]
            if name in fitted_constants():
                return model_constants(name)
            return StabilityConstants()
        try:
            return StabilityConstants(**self.constants)
        except BadParameter as exc:
            raise ConfigError(str(exc)) from None

    def build_data(self, model: FluxModel, which="initial"):
        block = getattr(self, which)
        if block is None:
            return PiecewiseConstantFn.constant(model)
        return build_data(model, block, self.build_constants())


def build_data(model: FluxModel, block: dict, consts: StabilityConstants):
    """PiecewiseConstantFn, BVFunction or JumpTable from a validated data block."""
    from .wave_measures import BVFunction
    try:
        if "pcf" in block:
            return PiecewiseConstantFn.from_json(model, block["pcf"])
        if "bv" in block:
            return BVFunction.from_json(model, block["bv"])
        if "jumps" in block:
            pos = np.asarray(block["jumps"]["positions"], dtype=float)
            s = np.asarray(block["jumps"]["strengths"], dtype=float).reshape(pos.size, model.n)
            order = np.argsort(pos, kind="stable")
            return JumpTable(pos[order], s[order], model.gnl)
        g = dict(block["generator"])
        rng = np.random.default_rng(g.pop("seed"))
        kind = g.pop("kind")
        if kind == "pcf":
            return random_pcf(model, rng, **g)
        if kind == "admissible_pcf":
            return random_admissible_pcf(model, rng, consts, **g)
        return random_bv(model, rng, **g)
    except (BadParameter, ValueError, TypeError) as exc:
        raise ConfigError(f"bad initial data: {exc}") from None


def load(path) -> list[ScenarioConfig]:
    """Scenarios in a config file (a single scenario or ``{"scenarios": [...]}``)."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if isinstance(data, dict) and "scenarios" in data:
        try:
            jsonschema.validate(data, BATCH_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"invalid config: {exc.message}") from None
        return [ScenarioConfig.from_dict(d) for d in data["scenarios"]]
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return [ScenarioConfig.from_dict(data)]
