from .bayes import (
    DiagonalPrior,
    Measurement,
    NoiseModel,
    PosteriorSummary,
    bayesian_crlb_diag,
    matched_filter,
    mmse_estimate,
    posterior_covariance,
    posterior_covariance_diag,
)
from .rrmmse import (
    EstimationResult,
    IterationTrace,
    RrmmseConfig,
    SupportSet,
    complexity_model,
    run_rrmmse,
    score_candidates,
    update_prior,
)
from .estimators import (
    EstimatorOutput,
    FunctionalEstimator,
    create_all_estimators,
    create_matched_filter_estimator,
    create_mmse_estimator,
    create_rrmmse_estimator,
)

__all__ = [
    "DiagonalPrior",
    "Measurement",
    "NoiseModel",
    "PosteriorSummary",
    "bayesian_crlb_diag",
    "matched_filter",
    "mmse_estimate",
    "posterior_covariance",
    "posterior_covariance_diag",
    "EstimationResult",
    "IterationTrace",
    "RrmmseConfig",
    "SupportSet",
    "complexity_model",
    "run_rrmmse",
    "score_candidates",
    "update_prior",
    "EstimatorOutput",
    "FunctionalEstimator",
    "create_all_estimators",
    "create_matched_filter_estimator",
    "create_mmse_estimator",
    "create_rrmmse_estimator",
]
