"""Config and scenario documents (JSON), validated with pydantic."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .detection import DetectorConfig
from .optimizer import OptimizerConfig
from .simulator import InjectedChange, NoiseModel
from .stats import BootstrapConfig


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class OptimizerSection(_Strict):
    min_gain: int = Field(4, ge=1)
    top_k: Optional[int] = Field(None, ge=1)

    def build(self) -> OptimizerConfig:
        return OptimizerConfig(self.min_gain, self.top_k)


class BootstrapSection(_Strict):
    samples: int = Field(10_000, ge=100)
    alpha: float = Field(0.005, gt=0, lt=0.5)
    rng_seed: int = 0
    scheme: Literal["hierarchical", "flat"] = "hierarchical"

    def build(self, seed: int | None = None) -> BootstrapConfig:
        return BootstrapConfig(self.samples, self.alpha, self.rng_seed if seed is None else seed, self.scheme)


class DetectorSection(_Strict):
    initial_threshold_pct: float = Field(1.0, ge=0)
    initial_thresholds: dict[str, float] = {}
    threshold_factor: float = Field(0.75, gt=0, le=1)
    min_threshold_pct: float = Field(1.0, ge=0)
    instability_window: int = Field(10, ge=2)
    trend_window: int = Field(10, ge=2)
    reset_on_detection: bool = True

    def build(self) -> DetectorConfig:
        return DetectorConfig(**self.model_dump())


class TrimSection(_Strict):
    head_frac: float = Field(0.05, ge=0, lt=1)
    tail_frac: float = Field(0.20, ge=0, lt=1)


class PlanSection(_Strict):
    suite: list[str] = []
    instance_runs: int = Field(3, ge=1)
    suite_runs: int = Field(3, ge=1)
    iterations: int = Field(5, ge=1)
    iteration_duration_s: float = Field(1.0, gt=0)
    seed: int = 0
    base: Optional[str] = None
    variation: Optional[str] = None
    workload: str = "influxdb"
    repetitions: int = Field(3, ge=3)


class ProjectConfig(_Strict):
    app_graph: Optional[str] = None
    micro_graphs: list[str] = []
    graph_format: Optional[Literal["json", "edge_csv"]] = None
    measurements: Optional[str] = None
    optimizer: OptimizerSection = Field(default_factory=OptimizerSection)
    bootstrap: BootstrapSection = Field(default_factory=BootstrapSection)
    detector: DetectorSection = Field(default_factory=DetectorSection)
    trim: TrimSection = Field(default_factory=TrimSection)
    plan: PlanSection = Field(default_factory=PlanSection)
    output_dir: str = "benchgate-out"
    # directory the config file lives in; relative paths resolve against it
    root: Path = Field(default=Path("."), exclude=True)

    def path(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else self.root / q


class NoiseSection(_Strict):
    instance: float = Field(0.0, ge=0)
    suite: float = Field(0.0, ge=0)
    iteration: float = Field(0.0, ge=0)

    def build(self) -> NoiseModel:
        return NoiseModel(self.instance, self.suite, self.iteration)


class InjectionSection(_Strict):
    commit: int = Field(ge=0)
    magnitude_pct: float
    kind: Literal["jump", "trend"] = "jump"
    span: int = Field(1, ge=1)
    metrics: list[str] = []

    def build(self, magnitude: float | None = None) -> InjectedChange:
        m = self.magnitude_pct if magnitude is None else magnitude
        return InjectedChange(self.commit, m, self.kind, self.span, tuple(self.metrics))


class MatrixSection(_Strict):
    magnitudes_pct: list[float] = Field(min_length=1)
    iteration_noise: list[float] = Field(min_length=1)


class Scenario(_Strict):
    n_commits: int = Field(ge=1)
    base_latency_s: float = Field(1.0, gt=0)
    noise: NoiseSection = Field(default_factory=NoiseSection)
    injections: list[InjectionSection] = []
    shape: tuple[int, int, int] = (3, 3, 5)
    metrics: list[str] = ["bench"]
    seed: int = 0
    runs: int = Field(1, ge=1)
    bootstrap: BootstrapSection = Field(default_factory=BootstrapSection)
    detector: DetectorSection = Field(default_factory=DetectorSection)
    matrix: Optional[MatrixSection] = None

    @field_validator("shape")
    @classmethod
    def _positive_shape(cls, v):
        if min(v) < 1:
            raise ValueError("shape entries must be >= 1")
        return v


class ConfigError(ValueError):
    pass


def _read_json(path: Path) -> dict:
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return doc


def _errors(exc: ValidationError) -> str:
    return "; ".join(f"{'.'.join(map(str, e['loc'])) or '<root>'}: {e['msg']}" for e in exc.errors())


def load_project_config(path: str | Path | None) -> ProjectConfig:
    if path is None:
        return ProjectConfig()
    path = Path(path)
    doc = _read_json(path)
    try:
        cfg = ProjectConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {_errors(exc)}") from exc
    cfg.root = path.parent
    return cfg


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    doc = _read_json(path)
    try:
        return Scenario.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {_errors(exc)}") from exc
