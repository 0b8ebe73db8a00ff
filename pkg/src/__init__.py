from src.config import ExperimentConfig, load_experiment_config
from src.errors import (
    DesignError,
    EstimationError,
    NumericalError,
    SceneError,
    SparseSpecError,
    SpectrumError,
)
from src.estimation.bayes import (
    DiagonalPrior,
    Measurement,
    NoiseModel,
    bayesian_crlb_diag,
    matched_filter,
    mmse_estimate,
    posterior_covariance_diag,
)
from src.estimation.estimators import FunctionalEstimator, create_all_estimators
from src.estimation.rrmmse import EstimationResult, RrmmseConfig, complexity_model, run_rrmmse
from src.simulation.experiment import ExperimentRecord, run_experiment, sweep
from src.spectrum.designer import BlockPartition, MfiReport, design_spectrum
from src.spectrum.grid import (
    FrequencyGrid,
    RangeGrid,
    SpectrumSupport,
    build_sensing_matrix,
    compute_coarray,
)
from src.types import RunFailure

__all__ = [
    "ExperimentConfig",
    "load_experiment_config",
    "DesignError",
    "EstimationError",
    "NumericalError",
    "SceneError",
    "SparseSpecError",
    "SpectrumError",
    "DiagonalPrior",
    "Measurement",
    "NoiseModel",
    "bayesian_crlb_diag",
    "matched_filter",
    "mmse_estimate",
    "posterior_covariance_diag",
    "FunctionalEstimator",
    "create_all_estimators",
    "EstimationResult",
    "RrmmseConfig",
    "complexity_model",
    "run_rrmmse",
    "ExperimentRecord",
    "run_experiment",
    "sweep",
    "BlockPartition",
    "MfiReport",
    "design_spectrum",
    "FrequencyGrid",
    "RangeGrid",
    "SpectrumSupport",
    "build_sensing_matrix",
    "compute_coarray",
    "RunFailure",
]
