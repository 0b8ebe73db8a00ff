"""Configuration loader for sparsespec.json"""
import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, Field, ValidationError, model_validator
from returns.result import Failure, Result, Success

from src.estimation.bayes import DEFAULT_CONDITION_CAP, REFERENCE_MAX_BINS
from src.estimation.rrmmse import DEFAULT_PRIOR_VARIANCE, DEFAULT_TOLERANCE, RrmmseConfig
from src.simulation.scene import DEFAULT_NOISE_FLOOR, MagnitudeConvention
from src.spectrum.designer import DesignNormalization
from src.spectrum.grid import FrequencyGrid, RangeGrid

EstimatorName = Literal["mf", "mmse", "rrmmse"]

PAPER_TIMEWIDTH = 10e-3
PAPER_OVERSAMPLING = 10


class GeometryConfig(BaseModel, frozen=True, extra="forbid"):
    bandwidth: float = Field(default=20e3, gt=0.0)  # Hz
    timewidth: float = Field(default=2.5e-3, gt=0.0)  # s
    oversampling_factor: int = Field(default=8, ge=1)
    carrier_frequency: float = Field(default=0.0, ge=0.0)  # Hz, recorded only

    def frequency_grid(self) -> FrequencyGrid:
        return FrequencyGrid.from_geometry(
            self.bandwidth, self.timewidth, self.oversampling_factor, self.carrier_frequency
        )

    def range_grid(self) -> RangeGrid:
        return RangeGrid.from_geometry(self.bandwidth, self.timewidth)


class SpectrumConfig(BaseModel, frozen=True, extra="forbid"):
    occupancy: float = Field(default=0.5, gt=0.0, le=1.0)
    block_size: int | None = Field(default=None, gt=0)  # None means ⌈0.0125·N⌉
    support_file: str | None = None  # skip design and load this support
    design_method: Literal["gram", "recompute"] = "gram"
    design_prior_variance: float | None = Field(default=None, gt=0.0)  # None: estimator prior
    design_noise_variance: float = Field(default=1.0, gt=0.0)
    design_normalization: DesignNormalization = "fixed"


class SceneSection(BaseModel, frozen=True, extra="forbid"):
    target_occupancy: float = Field(default=0.2, ge=0.0, le=1.0)  # ρ
    magnitude_range: tuple[float, float] = (-10.0, 30.0)
    magnitude_convention: MagnitudeConvention = "amplitude"
    eligible_bins: tuple[int, ...] | None = None  # 1-based; None means 2..M
    detection_floor_db: float = -10.0

    @model_validator(mode="after")
    def _check_range(self) -> "SceneSection":
        if not self.magnitude_range[0] < self.magnitude_range[1]:
            raise ValueError("magnitude_range needs low < high")
        if self.eligible_bins is not None and min(self.eligible_bins, default=1) < 1:
            raise ValueError("eligible_bins are 1-based")
        return self


class NoiseConfig(BaseModel, frozen=True, extra="forbid"):
    snr_db: float = 30.0
    noise_floor: float = Field(default=DEFAULT_NOISE_FLOOR, gt=0.0)


class EstimatorConfig(BaseModel, frozen=True, extra="forbid"):
    name: EstimatorName = "rrmmse"
    prior_variance: float = Field(default=DEFAULT_PRIOR_VARIANCE, gt=0.0)
    tolerance: float = Field(default=DEFAULT_TOLERANCE, gt=0.0)
    max_iterations: int | None = Field(default=None, gt=0)
    condition_cap: float = Field(default=DEFAULT_CONDITION_CAP, gt=1.0)
    one_step_max_bins: int = Field(default=REFERENCE_MAX_BINS, ge=1)  # one-step MMSE cut-off

    def rrmmse(self) -> RrmmseConfig:
        return RrmmseConfig(
            prior_variance=self.prior_variance,
            tolerance=self.tolerance,
            max_iterations=self.max_iterations,
            condition_cap=self.condition_cap,
        )


class SweepConfig(BaseModel, frozen=True, extra="forbid"):
    occupancies: tuple[float, ...] = (0.5, 0.75, 1.0)
    target_occupancies: tuple[float, ...] = (0.2,)

    @model_validator(mode="after")
    def _check_values(self) -> "SweepConfig":
        if not self.occupancies or any(not 0.0 < x <= 1.0 for x in self.occupancies):
            raise ValueError("occupancies must lie in (0, 1]")
        if not self.target_occupancies or any(
            not 0.0 <= x <= 1.0 for x in self.target_occupancies
        ):
            raise ValueError("target_occupancies must lie in [0, 1]")
        return self


class OutputConfig(BaseModel, frozen=True, extra="forbid"):
    directory: str = "results"
    include_timing: bool = False  # wall-time columns break byte-reproducibility


class ExperimentConfig(BaseModel, frozen=True, extra="forbid"):
    """Main configuration loaded from sparsespec.json"""
    geometry: GeometryConfig = GeometryConfig()
    spectrum: SpectrumConfig = SpectrumConfig()
    scene: SceneSection = SceneSection()
    noise: NoiseConfig = NoiseConfig()
    estimator: EstimatorConfig = EstimatorConfig()
    sweep: SweepConfig = SweepConfig()
    outputs: OutputConfig = OutputConfig()
    trials: int = Field(default=10, ge=1)
    rng_seed: int = Field(default=0, ge=0, lt=2**64)
    workers: int = Field(default=4, ge=1)

    @property
    def design_prior_variance(self) -> float:
        if self.spectrum.design_prior_variance is not None:
            return self.spectrum.design_prior_variance
        return self.estimator.prior_variance

    def paper_scale(self) -> "ExperimentConfig":
        """B = 20 kHz, T_0 = 10 ms, oversampling 10: N = 4000, M = 401"""
        geometry = self.geometry.model_copy(
            update={
                "bandwidth": 20e3,
                "timewidth": PAPER_TIMEWIDTH,
                "oversampling_factor": PAPER_OVERSAMPLING,
            }
        )
        return self.model_copy(update={"geometry": geometry})

    def with_overrides(
        self, seed: int | None = None, output_dir: str | None = None
    ) -> "ExperimentConfig":
        update: dict[str, Any] = {}
        if seed is not None:
            update["rng_seed"] = seed
        if output_dir is not None:
            update["outputs"] = self.outputs.model_copy(update={"directory": output_dir})
        return self.model_validate({**self.model_dump(), **_dump(update)})


def _dump(update: dict[str, Any]) -> dict[str, Any]:
    return {k: v.model_dump() if isinstance(v, BaseModel) else v for k, v in update.items()}


def format_validation_error(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        path = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return "Invalid config: " + "; ".join(lines)


def experiment_config_from_dict(data: dict[str, Any]) -> Result[ExperimentConfig, str]:
    try:
        return Success(ExperimentConfig.model_validate(data))
    except ValidationError as e:
        return Failure(format_validation_error(e))


def find_config_file() -> Path | None:
    possible_paths = [
        Path.cwd() / "sparsespec.json",
        Path.cwd() / ".sparsespec.json",
        Path.home() / ".sparsespec.json",
    ]
    for path in possible_paths:
        if path.exists():
            return path
    return None


def load_experiment_config(config_path: str | None = None) -> Result[ExperimentConfig, str]:
    """Load configuration from sparsespec.json"""
    if config_path is None:
        found = find_config_file()
        if found is None:
            return Failure("Could not find sparsespec.json in any standard location")
        config_path = str(found)

    try:
        with open(config_path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        return Failure(f"Config file not found: {config_path}")
    except json.JSONDecodeError as e:
        return Failure(f"Invalid JSON in config file: {e}")
    except OSError as e:
        return Failure(f"Error reading config file: {e}")

    if not isinstance(data, dict):
        return Failure("Invalid config: top level must be a JSON object")
    return experiment_config_from_dict(data)
