"""JSON model configuration shared by the command-line tools."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from thermotool.mimo_refine import MimoSystem, siso_reduction
from thermotool.power_model import (LeakageParams, SourceParams, celsius_to_kelvin,
                                    kelvin_to_celsius, pc_component)
from thermotool.stability import SisoParams
from thermotool.thermal_sim import ThermalStateSpace

SCHEMA_VERSION = 1

_matrix = {"type": "array", "minItems": 1,
           "items": {"type": "array", "minItems": 1, "items": {"type": "number"}}}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["thermal", "sources"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "units": {"enum": ["kelvin", "celsius"]},
        "thermal": {
            "type": "object",
            "required": ["a_matrix", "b_matrix"],
            "properties": {
                "a_matrix": _matrix,
                "b_matrix": _matrix,
                "sample_period_s": {"type": "number", "exclusiveMinimum": 0},
                "source_hotspot_map": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "ambient": {"type": "number"},
            },
            "additionalProperties": False,
        },
        "sources": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["voltage_V", "leakage"],
                "properties": {
                    "name": {"type": "string"},
                    "voltage_V": {"type": "number"},
                    "c_sw_F": {"type": "number"},
                    "frequency_Hz": {"type": "number"},
                    "pc_W": {"type": "number"},
                    "leakage": {
                        "type": "object",
                        "required": ["kappa1", "kappa2_K"],
                        "properties": {
                            "i_gate_A": {"type": "number"},
                            "kappa1": {"type": "number"},
                            "kappa2_K": {"type": "number"},
                        },
                        "additionalProperties": False,
                    },
                },
                "additionalProperties": False,
            },
        },
        "siso": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["a", "b"],
                "properties": {"a": {"type": "number"}, "b": {"type": "number"}},
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    thermal: ThermalStateSpace
    sources: list[SourceParams]
    siso: list[SisoParams] | None = None
    units: str = "kelvin"

    def temp_in(self, value: float) -> float:
        """User-facing temperature to Kelvin."""
        return celsius_to_kelvin(value) if self.units == "celsius" else value

    def temp_out(self, value: float) -> float:
        return kelvin_to_celsius(value) if self.units == "celsius" else value

    @property
    def system(self) -> MimoSystem:
        return MimoSystem(self.thermal, self.sources)

    def siso_problem(self, hotspot: int = 0, pc: float | None = None):
        """Scalar model for one hotspot: ``(siso, pc, voltage, leakage)``.

        With fitted ``siso`` parameters, b multiplies total power, so the
        default ``pc`` is the sum over sources and leakage comes from the
        strongest source driving this hotspot. Without them the model is
        reduced from the full matrices.
        """
        if not 0 <= hotspot < self.thermal.n_hotspots:
            raise ConfigError(f"hotspot {hotspot} out of range")
        if self.siso is None:
            siso, default_pc, volt, lp = siso_reduction(self.system, hotspot)
        else:
            if len(self.siso) != self.thermal.n_hotspots:
                raise ConfigError("siso needs one entry per hotspot")
            siso = self.siso[hotspot]
            default_pc = sum(pc_component(s) for s in self.sources)
            driving = [s for s, h in zip(self.sources, self.thermal.source_hotspot_map)
                       if h == hotspot] or self.sources
            src = max(driving, key=lambda s: s.voltage * s.leakage.kappa1)
            volt, lp = src.voltage, LeakageParams(0.0, src.leakage.kappa1, src.leakage.kappa2)
        return siso, default_pc if pc is None else pc, volt, lp


def _source(raw: dict) -> SourceParams:
    lk = raw["leakage"]
    leak = LeakageParams(lk.get("i_gate_A", 0.0), lk["kappa1"], lk["kappa2_K"])
    if "pc_W" in raw:
        if "c_sw_F" in raw or "frequency_Hz" in raw:
            raise ConfigError("give either pc_W or c_sw_F/frequency_Hz, not both")
        return SourceParams.from_pc(raw["pc_W"], raw["voltage_V"], leak)
    return SourceParams(raw.get("c_sw_F", 0.0), raw["voltage_V"],
                        raw.get("frequency_Hz", 0.0), leak)


def parse_config(raw: dict) -> ModelConfig:
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise ConfigError(f"invalid config at '{path}': {exc.message}") from exc
    units = raw.get("units", "kelvin")
    th = raw["thermal"]
    try:
        ambient = th.get("ambient", 0.0)
        if units == "celsius" and "ambient" in th:
            ambient = celsius_to_kelvin(ambient)
        thermal = ThermalStateSpace(th["a_matrix"], th["b_matrix"],
                                    th.get("sample_period_s", 0.1),
                                    th.get("source_hotspot_map"), ambient)
        sources = [_source(s) for s in raw["sources"]]
        siso = [SisoParams(s["a"], s["b"]) for s in raw["siso"]] if "siso" in raw else None
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if len(sources) != thermal.n_sources:
        raise ConfigError(f"B has {thermal.n_sources} columns but {len(sources)} sources given")
    return ModelConfig(thermal, sources, siso, units)


def load_config(path: str | Path) -> ModelConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    return parse_config(raw)
