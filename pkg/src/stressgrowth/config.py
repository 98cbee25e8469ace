"""Scenario configuration: JSON schema, defaults and resolution."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .growth import TABLE1, GrowthParams
from .isotropic import IsoParams

OUTPUT_ROOT_ENV = "STRESSGROWTH_OUTPUT_ROOT"

SCENARIOS = ("free-block", "constrained-block", "clamped-stripe")
MATERIALS = ("potential", "isotropic")

POTENTIAL_KEYS = ("mu", "lambda", "kappa_g", "m", "sigma_g", "eta", "nu")
ISOTROPIC_KEYS = ("mu", "lambda", "m_crit", "k_plus", "k_minus", "theta_plus", "theta_minus",
                  "gamma_plus", "gamma_minus")

DEFAULT_STEPS = {"free-block": 500, "constrained-block": 1000, "clamped-stripe": 250}
# blocks: 2**level elements per edge; stripe: refinement index
MAX_MESH_LEVEL = {"free-block": 3, "constrained-block": 3, "clamped-stripe": 4}
DEFAULT_PROBES = {
    "free-block": (("p1", (1.0, 1.0, 1.0)), ("p2", (1.0, 1.0, 0.5))),
    "constrained-block": (("p1", (1.0, 1.0, 1.0)), ("p2", (1.0, 1.0, 0.5))),
    # free corner of the symmetry plane at mid-length
    "clamped-stripe": (("p1", (2.0, 2.0, 8.0)),),
}

_NUMBER_OR_INF = {"oneOf": [{"type": "number"}, {"enum": ["inf", "Infinity"]}]}


def _params_schema(keys):
    return {"type": "object", "additionalProperties": False,
            "properties": {k: _NUMBER_OR_INF for k in keys}}


SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "stressgrowth scenario configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario"],
    "properties": {
        "scenario": {"enum": list(SCENARIOS)},
        "material": {"enum": list(MATERIALS)},
        "params": {"type": "object"},
        "mesh_level": {"type": "integer", "minimum": 0},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "steps": {"type": "integer", "minimum": 1},
        "output_dir": {"type": "string", "minLength": 1},
        "probes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "point"],
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z][A-Za-z0-9_]*$"},
                    "point": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
                },
            },
        },
        "vtk_every": {"type": "integer", "minimum": 0},
    },
    "allOf": [
        {"if": {"properties": {"material": {"const": "isotropic"}}, "required": ["material"]},
         "then": {"properties": {"params": _params_schema(ISOTROPIC_KEYS)}},
         "else": {"properties": {"params": _params_schema(POTENTIAL_KEYS)}}},
    ],
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


@dataclass(frozen=True)
class Probe:
    name: str
    point: tuple


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    material: str
    params: dict
    mesh_level: int
    dt: float
    steps: int
    output_dir: str
    probes: tuple
    vtk_every: int = field(default=0)

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "material": self.material,
            "params": {k: _encode_number(v) for k, v in self.params.items()},
            "mesh_level": self.mesh_level,
            "dt": self.dt,
            "steps": self.steps,
            "output_dir": self.output_dir,
            "probes": [{"name": p.name, "point": list(p.point)} for p in self.probes],
            "vtk_every": self.vtk_every,
        }

    def material_params(self):
        if self.material == "isotropic":
            return IsoParams.from_dict(self.params)
        return GrowthParams.from_dict(self.params)

    def with_param(self, name, value):
        params = dict(self.params)
        params[name] = float(value)
        d = self.to_dict()
        d["params"] = {k: _encode_number(v) for k, v in params.items()}
        return resolve(d)

    def with_output_dir(self, path):
        d = self.to_dict()
        d["output_dir"] = str(path)
        return resolve(d)


def _encode_number(v):
    return "inf" if math.isinf(v) else v


def _decode_number(v):
    return math.inf if isinstance(v, str) else float(v)


def default_params(scenario, material):
    row = TABLE1[scenario]
    if material == "isotropic":
        return IsoParams(mu=row.mu, lam=row.lam).as_dict()
    return row.as_dict()


def output_root():
    root = os.environ.get(OUTPUT_ROOT_ENV)
    return Path(root) if root else Path.cwd()


def resolve(data):
    """Validate a configuration mapping and fill every default.

    Relative output directories are anchored at ``$STRESSGROWTH_OUTPUT_ROOT`` (or the
    working directory). Raises :class:`ConfigError` on any violation.
    """
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    errors = sorted(_VALIDATOR.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(msgs))
    scenario = data["scenario"]
    material = data.get("material", "potential")
    params = default_params(scenario, material)
    params.update({k: _decode_number(v) for k, v in data.get("params", {}).items()})
    # build once so parameter validation errors surface as config errors
    try:
        (IsoParams if material == "isotropic" else GrowthParams).from_dict(params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid material parameters: {exc}") from exc
    level = data.get("mesh_level", 0)
    if level > MAX_MESH_LEVEL[scenario]:
        raise ConfigError(f"mesh_level must be at most {MAX_MESH_LEVEL[scenario]} for {scenario}")
    out = Path(data.get("output_dir", f"runs/{scenario}"))
    if not out.is_absolute():
        out = output_root() / out
    probes = data.get("probes")
    if probes is None:
        probes = tuple(Probe(n, p) for n, p in DEFAULT_PROBES[scenario])
    else:
        probes = tuple(Probe(p["name"], tuple(float(x) for x in p["point"])) for p in probes)
    names = [p.name for p in probes]
    if len(set(names)) != len(names):
        raise ConfigError("probe names must be unique")
    return ScenarioConfig(
        scenario=scenario,
        material=material,
        params=params,
        mesh_level=int(level),
        dt=float(data.get("dt", 1.0)),
        steps=int(data.get("steps", DEFAULT_STEPS[scenario])),
        output_dir=str(out.resolve()),
        probes=probes,
        vtk_every=int(data.get("vtk_every", 0)),
    )


def load_config(path):
    """Read and resolve a JSON configuration file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
    return resolve(data)


def parameter_names(material):
    return ISOTROPIC_KEYS if material == "isotropic" else POTENTIAL_KEYS
