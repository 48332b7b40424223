"""Scenario files: JSON description of a plant, a backlash set and an experiment.

The format is documented by ``scenarios/scenario.schema.json``. Validation
runs the schema first and then the dimensional checks, so every
:class:`ConfigError` carries a dotted path to the offending field.
"""

import json
import re
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .convex_sets import from_dict
from .errors import ConfigError, DomainError
from .linear_subsystem import PeriodicInput, PlantModel
from .sweeping_sim import SimConfig

ANALYSIS_DEFAULTS = {
    "tube": True,
    "stationarity": True,
    "certificate": True,
    "exponent": True,
    "lambda": None,
    "lambda_search": False,
    "orbit_steps": 4096,
    "tube_directions": 2048,
    "tube_times": 256,
    "tube_periods": 1,
    "tube_steps_per_period": 65536,
    "stationary_steps": 512,
    "emptiness_starts": 8,
}
BUILTIN = {"desk2d": "desk2d.json", "desk2d_small": "desk2d_small.json"}


def schema():
    text = resources.files("backlashcert").joinpath("scenarios/scenario.schema.json").read_text()
    return json.loads(text)


def _error_path(err):
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        match = re.match(r"'([^']+)'", err.message)
        if match:
            parts.append(match.group(1))
    return ".".join(parts) or "<root>"


def validate(raw):
    """Schema validation; raises :class:`ConfigError` naming the first bad field."""
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: (len(list(e.absolute_path)), list(map(str, e.absolute_path))))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ConfigError(err.message, _error_path(err))


@dataclass
class Scenario:
    name: str
    seed: int
    model: PlantModel
    theta: object
    inp: PeriodicInput
    sim: SimConfig
    pair: SimConfig = None
    analysis: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def rng(self):
        """Counter-based generator seeded from the scenario."""
        return np.random.Generator(np.random.Philox(self.seed))

    def with_overrides(self, seed=None, steps_per_period=None, lam=None):
        raw = json.loads(json.dumps(self.raw))
        if seed is not None:
            raw["seed"] = int(seed)
        if steps_per_period is not None:
            raw["simulation"]["steps_per_period"] = int(steps_per_period)
        if lam is not None:
            raw.setdefault("analysis", {})["lambda"] = float(lam)
        return from_config(raw)


def _period(value):
    return 2.0 * np.pi if value == "2pi" else float(value)


def _build(fn, path):
    try:
        return fn()
    except ConfigError:
        raise
    except (DomainError, ValueError) as exc:
        raise ConfigError(str(exc), path) from exc


def from_config(raw):
    """Validate a parsed JSON scenario and build its objects."""
    validate(raw)
    m = raw["model"]
    model = _build(lambda: PlantModel(m["A"], m["B"], m["C"], m["E"]), "model")
    theta = from_dict(raw["theta"], "theta")
    if theta.dim != model.p:
        raise ConfigError(f"dimension {theta.dim} does not match the plant output dimension {model.p}", "theta.center")
    if raw["theta"].get("contains_origin") and not theta.contains(np.zeros(theta.dim), tol=theta.default_boundary_tol()):
        raise ConfigError("the set does not contain the origin", "theta.contains_origin")

    entry = raw["input"]
    period = _period(entry["period"])
    a0 = entry.get("a0", [0.0] * model.m)
    if len(a0) != model.m:
        raise ConfigError(f"expected {model.m} entries", "input.a0")
    for key in ("cos", "sin"):
        if key in entry and any(len(row) != model.m for row in entry[key]):
            raise ConfigError(f"rows must have {model.m} entries", f"input.{key}")
    inp = _build(lambda: PeriodicInput(period, a0, entry.get("cos"), entry.get("sin")), "input")

    def sim_config(section, path, base=None):
        if len(section["x0"]) != model.n:
            raise ConfigError(f"expected {model.n} entries", f"{path}.x0")
        z0 = section.get("z0")
        if z0 is not None and len(z0) != model.p:
            raise ConfigError(f"expected {model.p} entries", f"{path}.z0")
        src = base or section
        return _build(lambda: SimConfig(
            x0=section["x0"], z0=z0, z0_mode=section.get("z0_mode", "given"),
            steps_per_period=src.get("steps_per_period", 4096), periods=src.get("periods", 30),
        ), path)

    sim = sim_config(raw["simulation"], "simulation")
    pair = sim_config(raw["pair"], "pair", raw["simulation"]) if "pair" in raw else None
    analysis = dict(ANALYSIS_DEFAULTS, **raw.get("analysis", {}))
    return Scenario(raw.get("name", "scenario"), int(raw.get("seed", 0)), model, theta, inp, sim, pair, analysis, raw)


def load(path):
    """Read and validate a scenario file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc.strerror}", str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from exc
    return from_config(raw)


def builtin(name):
    """One of the scenarios shipped with the package (``desk2d``, ``desk2d_small``)."""
    if name not in BUILTIN:
        raise ConfigError(f"unknown builtin scenario {name!r}; choose from {sorted(BUILTIN)}", "name")
    text = resources.files("backlashcert").joinpath("scenarios", BUILTIN[name]).read_text()
    return from_config(json.loads(text))


def desk2d(amplitude=10.0, e_scale=-0.15, radius=0.2, periods=30, steps_per_period=4096):
    """The DESK-2D scenario with a chosen sine amplitude."""
    scen = builtin("desk2d")
    raw = json.loads(json.dumps(scen.raw))
    raw["input"]["sin"] = [[float(amplitude)]]
    raw["model"]["E"] = [[0.0], [float(e_scale)]]
    raw["theta"]["radius"] = float(radius)
    raw["simulation"]["periods"] = periods
    raw["simulation"]["steps_per_period"] = steps_per_period
    return from_config(raw)
