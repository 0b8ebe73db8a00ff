"""Range-profile estimators behind one callable shape, selectable by key (mf | mmse | rrmmse)"""
from dataclasses import dataclass
from typing import Callable

import numpy as np
from returns.result import Failure, Result, Success

from src.errors import SparseSpecError
from src.estimation.bayes import (
    DEFAULT_CONDITION_CAP,
    DiagonalPrior,
    Measurement,
    NoiseModel,
    matched_filter,
    mmse_estimate,
)
from src.estimation.rrmmse import EstimationResult, RrmmseConfig, run_rrmmse
from src.protocols import Estimator
from src.spectrum.grid import SensingMatrix


@dataclass(frozen=True, eq=False)
class EstimatorOutput:
    name: str
    estimate: np.ndarray
    posterior_variance_diag: np.ndarray | None = None
    support: tuple[int, ...] = ()
    result: EstimationResult | None = None  # RRMMSE only


@dataclass(frozen=True)
class FunctionalEstimator:
    name: str
    description: str
    runner: Callable[[SensingMatrix, Measurement, NoiseModel], EstimatorOutput]

    def execute(
        self, h: SensingMatrix, v: Measurement, noise: NoiseModel
    ) -> Result[EstimatorOutput, str]:
        try:
            return Success(self.runner(h, v, noise))
        except SparseSpecError as e:
            return Failure(f"{self.name}: {e}")


def create_matched_filter_estimator() -> FunctionalEstimator:
    def run(h: SensingMatrix, v: Measurement, noise: NoiseModel) -> EstimatorOutput:
        return EstimatorOutput(name="mf", estimate=matched_filter(h, v))

    return FunctionalEstimator(
        name="mf",
        description="Matched filter back-projection H^H v",
        runner=run,
    )


def create_mmse_estimator(
    prior_variance: float, condition_cap: float = DEFAULT_CONDITION_CAP
) -> FunctionalEstimator:
    def run(h: SensingMatrix, v: Measurement, noise: NoiseModel) -> EstimatorOutput:
        prior = DiagonalPrior.uniform(h.column_count, prior_variance)
        posterior = mmse_estimate(h, prior, noise, v, condition_cap)
        return EstimatorOutput(
            name="mmse",
            estimate=posterior.estimate,
            posterior_variance_diag=posterior.error_variance_diag,
        )

    return FunctionalEstimator(
        name="mmse",
        description="One-step MMSE under the flat prior",
        runner=run,
    )


def create_rrmmse_estimator(config: RrmmseConfig) -> FunctionalEstimator:
    def run(h: SensingMatrix, v: Measurement, noise: NoiseModel) -> EstimatorOutput:
        result = run_rrmmse(h, v, noise, config)
        return EstimatorOutput(
            name="rrmmse",
            estimate=result.estimate,
            posterior_variance_diag=result.posterior_variance_diag,
            support=result.support.indices,
            result=result,
        )

    return FunctionalEstimator(
        name="rrmmse",
        description="Iterative reduced-rank MMSE with support growth",
        runner=run,
    )


def create_all_estimators(config: RrmmseConfig) -> list[Estimator]:
    return [
        create_matched_filter_estimator(),
        create_mmse_estimator(config.prior_variance, config.condition_cap),
        create_rrmmse_estimator(config),
    ]


def estimator_by_name(name: str, config: RrmmseConfig) -> Result[Estimator, str]:
    estimators = {e.name: e for e in create_all_estimators(config)}
    if name not in estimators:
        return Failure(f"Unknown estimator: {name}. Expected one of {sorted(estimators)}")
    return Success(estimators[name])
