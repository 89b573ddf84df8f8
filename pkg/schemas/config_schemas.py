import json
import os
from collections.abc import Mapping
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from constants import defaults
from constants.exceptions import Exceptions
from constants.modes import DESK_SCALE, FULLY_ADAPTIVE, FULL_SCALE, MODE_MAP, POINT_LOAD, SCALES

ENV_PREFIX = "RSO_"
ENV_NESTING = "__"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DomainConfig(_Section):
    lx: float = Field(defaults.DOMAIN_LX, gt=0)
    ly: float = Field(defaults.DOMAIN_LY, gt=0)
    nx: int = Field(defaults.GRID_NX, ge=1)
    ny: int = Field(defaults.GRID_NY, ge=1)
    dirichlet_y_min: float = defaults.DIRICHLET_Y_MIN


class LoadConfig(_Section):
    kind: Literal["point", "traction"] = POINT_LOAD
    point: tuple[float, float] = defaults.LOAD_POINT
    magnitude: float = Field(defaults.LOAD_MAGNITUDE, gt=0)
    angle_mean_deg: float = defaults.LOAD_ANGLE_MEAN_DEG
    angle_std_deg: float = Field(defaults.LOAD_ANGLE_STD_DEG, ge=0)
    # right-edge segment carrying a uniform traction when kind == "traction"
    traction_y_range: tuple[float, float] = (0.0, 0.1)
    body_force: tuple[float, float] = (0.0, 0.0)

    @field_validator("traction_y_range")
    @classmethod
    def validate_range(cls, value):
        if not value[0] < value[1]:
            raise ValueError("traction_y_range must be increasing")
        return value


class RandomFieldConfig(_Section):
    correlation_lengths: tuple[float, float] = (
        defaults.CORRELATION_LENGTH,
        defaults.CORRELATION_LENGTH,
    )
    energy_target: float = Field(defaults.KL_ENERGY_TARGET, ge=0, le=1)
    max_modes: int = Field(defaults.KL_MAX_MODES, ge=1)
    # kappa_E of E = E0 exp(kappa_E * KL); zero keeps the material deterministic
    young_std: float = Field(0.0, ge=0)

    @field_validator("correlation_lengths")
    @classmethod
    def validate_lengths(cls, value):
        if min(value) <= 0:
            raise ValueError("correlation lengths must be positive")
        return value


class MaterialConfig(_Section):
    young: float = Field(defaults.YOUNG_MODULUS, gt=0)
    poisson: float = Field(defaults.POISSON_RATIO, gt=-1, lt=0.5)
    epsilon: float = Field(defaults.ERSATZ_EPSILON, gt=0, lt=1)


class OptimizationConfig(_Section):
    penalty_weight: float = Field(defaults.PENALTY_WEIGHT, gt=0)
    target_fraction: float = Field(defaults.TARGET_VOLUME_FRACTION, gt=0, lt=1)
    tau1: float = Field(defaults.TAU1, gt=0)
    tau2: float = Field(defaults.TAU2, gt=0)
    alpha_initial: float = Field(defaults.ALPHA_INITIAL, gt=0)
    alpha_min: float = Field(defaults.ALPHA_MIN, gt=0)
    nu_it: float = Field(defaults.NU_IT, gt=0)
    nu_ot: float = Field(defaults.NU_OT, gt=0)
    initial_sample_size: int = Field(defaults.INITIAL_SAMPLE_SIZE, ge=1)
    full_sample_size: int = Field(defaults.FULL_SAMPLE_SIZE, ge=1)
    max_sample_size: int = Field(defaults.MAX_SAMPLE_SIZE, ge=1)
    max_iters: int = Field(defaults.MAX_ITERATIONS, ge=1)
    stop_combinator: Literal["and", "or"] = "and"
    stagnation_window: int = Field(defaults.STAGNATION_WINDOW, ge=1)
    stagnation_tolerance: float = Field(defaults.STAGNATION_TOLERANCE, gt=0)
    volume_tolerance: float = Field(defaults.VOLUME_TOLERANCE, gt=0)
    initial_steps: int = Field(defaults.INITIAL_FICTITIOUS_STEPS, ge=1)
    max_steps: int = Field(defaults.MAX_FICTITIOUS_STEPS, ge=1)
    step_increase_after: int = Field(defaults.STEP_INCREASE_AFTER, ge=1)
    reinit_every: int = Field(defaults.REINIT_EVERY, ge=0)
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def validate_bounds(self):
        if self.alpha_min > self.alpha_initial:
            raise ValueError("alpha_min must not exceed alpha_initial")
        if self.initial_sample_size > self.max_sample_size:
            raise ValueError("initial_sample_size must not exceed max_sample_size")
        if self.initial_steps > self.max_steps:
            raise ValueError("initial_steps must not exceed max_steps")
        return self


class AdaptivityConfig(_Section):
    tolerance: float = Field(defaults.ESTIMATOR_TOLERANCE, gt=0)
    reference_mesh_size: float = Field(defaults.REFERENCE_MESH_SIZE, gt=0)
    theta_mark: float = Field(defaults.DORFLER_THETA, gt=0, le=1)
    max_refinement_passes: int = Field(defaults.MAX_REFINEMENT_PASSES, ge=0)
    max_dof: int = Field(defaults.MAX_DOF, ge=1)
    estimate_on_fixed_mesh: bool = False


class OutputConfig(_Section):
    directory: str = "runs/latest"
    snapshot_every: int = Field(defaults.SNAPSHOT_EVERY, ge=0)
    write_vtk: bool = True


class Config(_Section):
    mode: str = FULLY_ADAPTIVE
    scale: str = FULL_SCALE
    seed: int = Field(0, ge=0, lt=2**64)
    domain: DomainConfig = DomainConfig()
    load: LoadConfig = LoadConfig()
    random_field: RandomFieldConfig = RandomFieldConfig()
    material: MaterialConfig = MaterialConfig()
    optimization: OptimizationConfig = OptimizationConfig()
    adaptivity: AdaptivityConfig = AdaptivityConfig()
    output: OutputConfig = OutputConfig()

    @field_validator("mode")
    @classmethod
    def validate_mode(cls, value):
        if value not in MODE_MAP:
            raise ValueError(f"mode must be one of {sorted(MODE_MAP)}")
        return value

    @field_validator("scale")
    @classmethod
    def validate_scale(cls, value):
        if value not in SCALES:
            raise ValueError(f"scale must be one of {list(SCALES)}")
        return value

    @property
    def adaptive_sampling(self) -> bool:
        return MODE_MAP[self.mode][0]

    @property
    def adaptive_mesh(self) -> bool:
        return MODE_MAP[self.mode][1]


# Desk scale keeps the benchmark but shrinks it to minutes
SCALE_PRESETS: dict[str, dict] = {
    FULL_SCALE: {},
    DESK_SCALE: {
        "domain": {"nx": 30, "ny": 60},
        "random_field": {"max_modes": 25},
        "optimization": {"max_sample_size": 16, "max_iters": 60},
        "adaptivity": {"reference_mesh_size": 1.0 / 90.0},
    },
}


def _deep_merge(base: dict, update: Mapping) -> dict:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _parse_env_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def env_overrides(environ: Mapping[str, str]) -> dict:
    """RSO_SECTION__FIELD=value pairs as a nested dict, e.g. RSO_OPTIMIZATION__MAX_ITERS."""
    overrides: dict = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX) :].lower().split(ENV_NESTING)
        node = overrides
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = _parse_env_value(raw)
    return overrides


def read_config_file(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise Exceptions.not_found_exception(f"config file {path}")
    except json.JSONDecodeError as e:
        raise Exceptions.configuration_exception(f"{path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise Exceptions.configuration_exception(f"{path} must hold a JSON object")
    return data


def load_config(
    path: str | Path | None = None,
    cli_overrides: Mapping | None = None,
    environ: Mapping[str, str] | None = None,
) -> Config:
    """
    Resolve the configuration: defaults, scale preset, JSON file, RSO_*
    environment variables, then CLI flags.

    Args:
        path (str | Path | None): Optional JSON config file.
        cli_overrides (Mapping | None): Nested overrides from the command line.
        environ (Mapping[str, str] | None): Environment, os.environ by default.
    """
    environ = os.environ if environ is None else environ
    file_data = read_config_file(path) if path else {}
    env_data = env_overrides(environ)
    cli_data = dict(cli_overrides or {})

    scale = cli_data.get("scale") or env_data.get("scale") or file_data.get("scale") or FULL_SCALE
    if scale not in SCALE_PRESETS:
        raise Exceptions.configuration_exception(f"unknown scale {scale!r}")

    merged = _deep_merge(SCALE_PRESETS[scale], file_data)
    merged = _deep_merge(merged, env_data)
    merged = _deep_merge(merged, cli_data)
    merged["scale"] = scale
    try:
        return Config.model_validate(merged)
    except ValidationError as e:
        raise Exceptions.configuration_exception(str(e))
