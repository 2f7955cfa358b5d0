"""Run configuration: JSON schema, validation, and typed access.

Configs are strict: unknown fields are rejected before any computation, and
every numeric guard (kappa > 0, eta in (0, 1], ...) is checked up front so
operator errors surface as exit code 2, never as a half-finished run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import Optional

import jsonschema

from .model import DeviceParams

PROTOCOLS = ["chi-kappa-power", "ringdown", "efficiency", "validate-snr",
             "chip-scenario", "simulate-iq", "predict-snr"]

_DEVICE_SCHEMA = {
    "type": "object",
    "properties": {
        "omega_r": {"type": "number", "exclusiveMinimum": 0},
        "chi": {"type": "number"},
        "kappa": {"type": "number", "exclusiveMinimum": 0},
        "eta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    },
    "required": ["omega_r", "chi", "kappa", "eta"],
    "additionalProperties": False,
}

_PULSE_SCHEMA = {
    "type": "object",
    "properties": {
        "omega_d": {"type": "number"},
        "eps": {"type": "number", "minimum": 0},
        "t_on": {"type": "number", "minimum": 0},
        "t_off": {"type": "number", "minimum": 0},
        # alternatively specify the operating point and let the planner pick
        "nbar": {"type": "number", "exclusiveMinimum": 0},
        "d_target": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "protocol": {"enum": PROTOCOLS},
        "master_seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "threads": {"type": "integer", "minimum": 1},
        "device": _DEVICE_SCHEMA,
        "devices": {"type": "array", "items": _DEVICE_SCHEMA, "minItems": 1},
        "chip": {
            "type": "object",
            "properties": {
                "channels": {"type": "integer", "minimum": 1},
                "kappa_min": {"type": "number", "exclusiveMinimum": 0},
                "kappa_spread": {"type": "number", "minimum": 1},
                "chi_over_kappa": {"type": "number"},
                "eta_min": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "eta_max": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "nbar": {"type": "number", "exclusiveMinimum": 0},
                "sweep_shots": {"type": "integer", "minimum": 100},
                "iq_shots": {"type": "integer", "minimum": 100},
            },
            "additionalProperties": False,
        },
        "pulse": _PULSE_SCHEMA,
        "sweep": {
            "type": "object",
            "properties": {
                "points": {"type": "integer", "minimum": 8},
                "span_factor": {"type": "number", "exclusiveMinimum": 0},
                "shots": {"type": "integer", "minimum": 100},
                "phase_target": {"type": "number", "exclusiveMinimum": 0},
                "tau_over_kappa": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "ringdown": {
            "type": "object",
            "properties": {
                "n_delays": {"type": "integer", "minimum": 2},
                "span_over_kappa": {"type": "number", "exclusiveMinimum": 0},
                "slice_dephasing": {"type": "number", "exclusiveMinimum": 0},
                "shots": {"type": "integer", "minimum": 100},
            },
            "additionalProperties": False,
        },
        "efficiency": {
            "type": "object",
            "properties": {"shots": {"type": "integer", "minimum": 100}},
            "additionalProperties": False,
        },
        "snr": {
            "type": "object",
            "properties": {
                "shots": {"type": "integer", "minimum": 100},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "properties": {
                "kappa": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "chi_over_kappa": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "eta": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}, "minItems": 1},
                "nbar": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "omega_r": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
    },
    "required": ["protocol", "master_seed"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Invalid run configuration; message names the offending field."""


@dataclass
class RunConfig:
    protocol: str
    master_seed: int
    raw: dict
    output_dir: Optional[str] = None
    threads: int = 1

    @property
    def device(self) -> DeviceParams:
        d = self.raw.get("device")
        if d is None:
            raise ConfigError(f"protocol '{self.protocol}' requires a 'device' section")
        return DeviceParams(**d)

    def section(self, name: str) -> dict:
        return dict(self.raw.get(name, {}))


def validate_config(data: dict) -> RunConfig:
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config field '{path}': {exc.message}") from exc
    return RunConfig(
        protocol=data["protocol"],
        master_seed=int(data["master_seed"]),
        raw=data,
        output_dir=data.get("output_dir"),
        threads=int(data.get("threads", 1)),
    )


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return validate_config(data)
