"""Flat key = value configuration for experiments.

Files are plain text: one `section.key = value` per line, `#` comments,
blank lines ignored.  Every key has a default; unknown keys, bad types,
and out-of-range values are rejected with the offending key named.  The
effective configuration (all defaults resolved) can be written back out
and reloaded, which is how run directories snapshot their settings.

Material stiffness accepts the sweep shorthand S1..S5 (0.001 to 10 MPa)
through material.stiffness; material.elastic_modulus takes pascals
directly.  Setting both is rejected as ambiguous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .cppn import MutationRates
from .evolution import EvolutionConfig
from .lattice import STIFFNESS_GRADES, EnvironmentSpec, MaterialParams

ENVIRONMENT_MODES = ("land", "water", "land_water_halfway", "water_land_halfway")


class ConfigError(Exception):
    """Base of all configuration rejections; .key names the offender."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class UnknownKey(ConfigError):
    def __init__(self, key: str):
        super().__init__(key, "unknown configuration key")


class TypeMismatch(ConfigError):
    pass


class ConstraintViolation(ConfigError):
    pass


@dataclass(frozen=True)
class Config:
    # experiment
    environment: str = "land"
    generations: int = 100
    repetitions: int = 1
    master_seed: int = 0
    # evolution
    population_size: int = 32
    cycles_per_eval: int = 8
    eval_workers: int = 0  # 0 = one thread per core, capped at 8
    # body
    grid_x: int = 8
    grid_y: int = 8
    grid_z: int = 7
    frequency_min: float = 0.5
    frequency_max: float = 10.0
    # material
    stiffness: str = ""
    elastic_modulus: float = 0.1e6
    density: float = 1000.0
    damping_ratio: float = 0.4
    friction_static: float = 1.0
    friction_kinetic: float = 0.8
    actuation_amplitude: float = 0.15
    voxel_size: float = 0.01
    # environment
    gravity: float = 9.81
    fluid_density: float = 1000.0
    drag_coefficient: float = 1.5
    ground_stiffness: float = 1e5
    ground_damping: float = 10.0
    # simulation
    settle_time: float = 0.5
    self_collision: bool = False
    # mutation
    perturb_weight_prob: float = 0.8
    perturb_connection_prob: float = 0.1
    add_connection_prob: float = 0.15
    add_node_prob: float = 0.08
    change_activation_prob: float = 0.1
    weight_sigma: float = 0.5
    # output
    snapshot_interval: int = 0  # generations between snapshots; 0 = final only
    trace_sample_interval: int = 50
    # statistics
    bootstrap_resamples: int = 10_000
    confidence_level: float = 0.95


# key in file -> dataclass field
_KEYS: dict[str, str] = {
    "experiment.environment": "environment",
    "experiment.generations": "generations",
    "experiment.repetitions": "repetitions",
    "experiment.master_seed": "master_seed",
    "evolution.population_size": "population_size",
    "evolution.cycles_per_eval": "cycles_per_eval",
    "evolution.eval_workers": "eval_workers",
    "body.grid_x": "grid_x",
    "body.grid_y": "grid_y",
    "body.grid_z": "grid_z",
    "body.frequency_min": "frequency_min",
    "body.frequency_max": "frequency_max",
    "material.stiffness": "stiffness",
    "material.elastic_modulus": "elastic_modulus",
    "material.density": "density",
    "material.damping_ratio": "damping_ratio",
    "material.friction_static": "friction_static",
    "material.friction_kinetic": "friction_kinetic",
    "material.actuation_amplitude": "actuation_amplitude",
    "material.voxel_size": "voxel_size",
    "environment.gravity": "gravity",
    "environment.fluid_density": "fluid_density",
    "environment.drag_coefficient": "drag_coefficient",
    "environment.ground_stiffness": "ground_stiffness",
    "environment.ground_damping": "ground_damping",
    "simulation.settle_time": "settle_time",
    "simulation.self_collision": "self_collision",
    "mutation.perturb_weight_prob": "perturb_weight_prob",
    "mutation.perturb_connection_prob": "perturb_connection_prob",
    "mutation.add_connection_prob": "add_connection_prob",
    "mutation.add_node_prob": "add_node_prob",
    "mutation.change_activation_prob": "change_activation_prob",
    "mutation.weight_sigma": "weight_sigma",
    "output.snapshot_interval": "snapshot_interval",
    "output.trace_sample_interval": "trace_sample_interval",
    "stats.bootstrap_resamples": "bootstrap_resamples",
    "stats.confidence_level": "confidence_level",
}

_FIELD_TO_KEY = {v: k for k, v in _KEYS.items()}
_FIELD_TYPES = {f.name: f.type for f in fields(Config)}


def _parse_value(key: str, raw: str, kind: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            lowered = raw.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError as exc:
        raise TypeMismatch(key, f"expected {kind}, got {raw!r}") from exc


def parse_config(text: str) -> Config:
    values: dict[str, object] = {}
    explicit: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise TypeMismatch(f"line {lineno}", f"expected key = value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _KEYS:
            raise UnknownKey(key)
        name = _KEYS[key]
        values[name] = _parse_value(key, raw, _FIELD_TYPES[name])
        explicit.add(key)

    if "material.stiffness" in explicit and "material.elastic_modulus" in explicit:
        raise ConstraintViolation(
            "material.stiffness", "give either the grade or elastic_modulus, not both"
        )
    config = Config(**values)
    if config.stiffness:
        grade = config.stiffness.upper()
        if grade not in STIFFNESS_GRADES:
            raise ConstraintViolation(
                "material.stiffness", f"unknown grade {config.stiffness!r}"
            )
        config = replace(config, stiffness="", elastic_modulus=STIFFNESS_GRADES[grade])
    validate_config(config)
    return config


def load_config(path: str | Path) -> Config:
    return parse_config(Path(path).read_text())


def _require(ok: bool, key: str, message: str) -> None:
    if not ok:
        raise ConstraintViolation(key, message)


def validate_config(config: Config) -> None:
    c = config
    _require(c.environment in ENVIRONMENT_MODES, "experiment.environment",
             f"must be one of {', '.join(ENVIRONMENT_MODES)}")
    _require(c.generations >= 1, "experiment.generations", "must be >= 1")
    _require("halfway" not in c.environment or c.generations >= 2,
             "experiment.generations", "transitions need at least 2 generations")
    _require(c.repetitions >= 1, "experiment.repetitions", "must be >= 1")
    _require(c.population_size >= 1, "evolution.population_size", "must be >= 1")
    _require(c.cycles_per_eval >= 1, "evolution.cycles_per_eval", "must be >= 1")
    _require(c.eval_workers >= 0, "evolution.eval_workers", "must be >= 0")
    for axis in ("grid_x", "grid_y", "grid_z"):
        _require(getattr(c, axis) >= 1, f"body.{axis}", "must be >= 1")
    _require(0 < c.frequency_min < c.frequency_max, "body.frequency_min",
             "need 0 < frequency_min < frequency_max")
    _require(c.elastic_modulus > 0, "material.elastic_modulus", "must be positive")
    _require(c.density > 0, "material.density", "must be positive")
    _require(0.0 <= c.damping_ratio <= 2.0, "material.damping_ratio", "must lie in [0, 2]")
    _require(0.0 <= c.friction_kinetic <= c.friction_static,
             "material.friction_kinetic", "need 0 <= kinetic <= static")
    _require(0.0 <= c.actuation_amplitude < 0.5, "material.actuation_amplitude",
             "must lie in [0, 0.5)")
    _require(c.voxel_size > 0, "material.voxel_size", "must be positive")
    _require(c.gravity >= 0, "environment.gravity", "must be >= 0")
    _require(c.fluid_density > 0, "environment.fluid_density", "must be positive")
    _require(c.drag_coefficient > 0, "environment.drag_coefficient", "must be positive")
    _require(c.ground_stiffness > 0, "environment.ground_stiffness", "must be positive")
    _require(c.ground_damping >= 0, "environment.ground_damping", "must be >= 0")
    _require(c.settle_time >= 0, "simulation.settle_time", "must be >= 0")
    for key, name in (
        ("mutation.perturb_weight_prob", "perturb_weight_prob"),
        ("mutation.perturb_connection_prob", "perturb_connection_prob"),
        ("mutation.add_connection_prob", "add_connection_prob"),
        ("mutation.add_node_prob", "add_node_prob"),
        ("mutation.change_activation_prob", "change_activation_prob"),
    ):
        _require(0.0 <= getattr(c, name) <= 1.0, key, "must lie in [0, 1]")
    _require(c.weight_sigma > 0, "mutation.weight_sigma", "must be positive")
    _require(c.snapshot_interval >= 0, "output.snapshot_interval", "must be >= 0")
    _require(c.trace_sample_interval >= 1, "output.trace_sample_interval", "must be >= 1")
    _require(c.bootstrap_resamples >= 1, "stats.bootstrap_resamples", "must be >= 1")
    _require(0.0 < c.confidence_level < 1.0, "stats.confidence_level",
             "must lie in (0, 1)")


def render_config(config: Config) -> str:
    """The effective configuration as loadable key = value text."""
    lines = ["# effective configuration (all defaults resolved)"]
    for key, name in _KEYS.items():
        if name == "stiffness":
            continue  # always echoed as the resolved modulus
        value = getattr(config, name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def material_params(config: Config) -> MaterialParams:
    return MaterialParams(
        elastic_modulus=config.elastic_modulus,
        density=config.density,
        bond_damping_ratio=config.damping_ratio,
        friction_static=config.friction_static,
        friction_kinetic=config.friction_kinetic,
        actuation_amplitude=config.actuation_amplitude,
        voxel_size=config.voxel_size,
    )


def environment_spec(config: Config, mode: str) -> EnvironmentSpec:
    common = dict(
        fluid_density=config.fluid_density,
        drag_coefficient=config.drag_coefficient,
        ground_contact_stiffness=config.ground_stiffness,
        ground_contact_damping=config.ground_damping,
    )
    if mode == "land":
        return EnvironmentSpec.land(gravity=config.gravity, **common)
    return EnvironmentSpec.water(**common)


def environment_schedule(config: Config) -> tuple[tuple[int, EnvironmentSpec], ...]:
    land = environment_spec(config, "land")
    water = environment_spec(config, "water")
    half = config.generations // 2
    if config.environment == "land":
        return ((0, land),)
    if config.environment == "water":
        return ((0, water),)
    if config.environment == "land_water_halfway":
        return ((0, land), (half, water))
    return ((0, water), (half, land))


def mutation_rates(config: Config) -> MutationRates:
    return MutationRates(
        perturb_weight_prob=config.perturb_weight_prob,
        perturb_connection_prob=config.perturb_connection_prob,
        add_connection_prob=config.add_connection_prob,
        add_node_prob=config.add_node_prob,
        change_activation_prob=config.change_activation_prob,
        weight_sigma=config.weight_sigma,
    )


def evolution_config(config: Config, run_seed: int) -> EvolutionConfig:
    return EvolutionConfig(
        population_size=config.population_size,
        generations=config.generations,
        environment_schedule=environment_schedule(config),
        material=material_params(config),
        cycles_per_eval=config.cycles_per_eval,
        dims=(config.grid_x, config.grid_y, config.grid_z),
        rates=mutation_rates(config),
        master_seed=run_seed,
        frequency_min=config.frequency_min,
        frequency_max=config.frequency_max,
        settle_time=config.settle_time,
        self_collision=config.self_collision,
        eval_workers=config.eval_workers,
    )
