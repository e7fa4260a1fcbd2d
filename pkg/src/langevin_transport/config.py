"""Experiment configuration: a YAML tree validated against a schema with defaults."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .measures import (
    AbsValue,
    GaussianQuadratic,
    Linear,
    PerturbedConvex,
    SmoothedAbs,
    SphereLinear,
    SphereUniform,
    Zero,
)

EXPERIMENTS = (
    "hessian-check",
    "lipschitz-check",
    "pushforward-check",
    "sharpness",
    "inverse-check",
    "martingale-tail",
    "reverse-holder",
    "bounds-table",
)


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SourceConfig(_Strict):
    """``kappa`` is the convexity constant; for ``perturbed_convex`` the base is ``kappa + lam``."""

    family: Literal["gaussian", "perturbed_convex", "sphere_uniform"] = "gaussian"
    kappa: float = Field(1.0, gt=0)
    lam: float = Field(0.0, ge=0)
    d: int = Field(1, ge=1)
    n: int = Field(3, ge=3)

    def build(self):
        if self.family == "gaussian":
            return GaussianQuadratic(self.kappa, self.d)
        if self.family == "perturbed_convex":
            return PerturbedConvex(self.kappa + self.lam, self.lam, self.d)
        return SphereUniform(self.n)


class PerturbationConfig(_Strict):
    family: Literal["zero", "linear", "smoothed_abs", "abs", "sphere_linear"] = "smoothed_abs"
    L: float = Field(1.0, ge=0)
    eps: float = Field(1e-3, gt=0)
    sign: Literal[1, -1] = 1
    a: float = 1.0
    ell: Optional[list[float]] = None

    def build(self, source: SourceConfig):
        if self.family == "zero":
            return Zero(source.d, on_sphere=source.family == "sphere_uniform")
        if self.family == "linear":
            return Linear(self.ell if self.ell is not None else [self.L] + [0.0] * (source.d - 1))
        if self.family == "smoothed_abs":
            return SmoothedAbs(self.L, self.eps, source.d, float(self.sign))
        if self.family == "abs":
            return AbsValue(self.L, source.d, float(self.sign))
        return SphereLinear(self.a, source.n)


class MonteCarloConfig(_Strict):
    n_paths: int = Field(200_000, ge=2)
    dt: Optional[float] = Field(None, gt=0)


class FlowConfig(_Strict):
    tau: float = Field(8.0, gt=0)
    n_steps: int = Field(800, ge=1)
    graded: int = Field(16, ge=1)
    probes: Optional[int] = Field(None, ge=2)


class GridConfig(_Strict):
    """Evaluation grid; ``None`` entries take the experiment's defaults.

    ``space`` is ``x`` in Euclidean runs and the polar angle on the sphere.
    """

    t_min: Optional[float] = Field(None, gt=0)
    t_max: Optional[float] = Field(None, gt=0)
    t_num: Optional[int] = Field(None, ge=1)
    space_min: Optional[float] = None
    space_max: Optional[float] = None
    space_num: Optional[int] = Field(None, ge=1)


class BoundsGrid(_Strict):
    kappa: list[float] = [1.0]
    K: list[float] = [0.0]
    L: list[float] = [1.0]
    n: list[int] = [3]
    riem_inf: list[float] = [0.0]
    beta: list[float] = [0.0]
    t: list[float] = []


class ExperimentConfig(_Strict):
    experiment: Literal[EXPERIMENTS]  # type: ignore[valid-type]
    seed: int = Field(..., ge=0, lt=2**64)
    setting: Literal["euclidean", "sphere"] = "euclidean"
    source: SourceConfig = SourceConfig()
    perturbation: PerturbationConfig = PerturbationConfig()
    mc: MonteCarloConfig = MonteCarloConfig()
    flow: FlowConfig = FlowConfig()
    grid: GridConfig = GridConfig()
    mc_points: Optional[list[tuple[float, float]]] = None
    deltas: list[float] = [0.5, 1.0, 2.0]
    horizon: float = Field(1.0, gt=0)
    n_samples: int = Field(10_000, ge=1000)
    sample_mode: Literal["quantile", "random"] = "quantile"
    bounds: BoundsGrid = BoundsGrid()

    @model_validator(mode="after")
    def _consistent(self):
        sph = self.source.family == "sphere_uniform"
        if (self.setting == "sphere") != sph:
            raise ValueError("setting 'sphere' requires source.family 'sphere_uniform' and vice versa")
        if sph and self.perturbation.family not in ("sphere_linear", "zero"):
            raise ValueError("on the sphere the perturbation must be 'sphere_linear' or 'zero'")
        if not sph and self.perturbation.family == "sphere_linear":
            raise ValueError("'sphere_linear' needs the sphere setting")
        return self


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        where = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{where}: {e['msg']}")
    return "; ".join(lines)


def load_config(experiment: str, path: str | Path | None = None, seed: int | None = None,
                overrides: dict | None = None) -> ExperimentConfig:
    """Read and validate a config; ``seed`` overrides the file's seed."""
    data: dict = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
    if data.get("experiment", experiment) != experiment:
        raise ConfigError(f"experiment: config is for {data['experiment']!r}, not {experiment!r}")
    data["experiment"] = experiment
    if seed is not None:
        data["seed"] = seed
    if overrides:
        data.update(overrides)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from exc
