"""Per-trial error metrics and support scoring"""
from typing import Iterable, Sequence

import numpy as np

from src.errors import EstimationError
from src.simulation.scene import MagnitudeConvention, magnitude_to_db
from src.types import MetricSummary, SupportMetrics


def mse_from_posterior(posterior_diag: np.ndarray) -> float:
    """Tr(K_ε)/M"""
    diag = np.asarray(posterior_diag, dtype=float)
    if diag.size == 0:
        raise EstimationError("posterior diagonal is empty")
    return float(np.mean(diag))


def mse_ground_truth(gamma: np.ndarray, estimate: np.ndarray) -> float:
    """(1/M)·(γ - γ̂)^H (γ - γ̂)"""
    gamma = np.asarray(gamma, dtype=complex)
    estimate = np.asarray(estimate, dtype=complex)
    if gamma.shape != estimate.shape:
        raise EstimationError(f"length mismatch: {gamma.size} vs {estimate.size}")
    error = gamma - estimate
    return float(np.real(np.vdot(error, error))) / gamma.size


def support_metrics(
    true_support: Iterable[int],
    estimated_support: Iterable[int],
    gamma: np.ndarray,
    detection_floor_db: float,
    convention: MagnitudeConvention = "amplitude",
) -> SupportMetrics:
    """Precision over the estimate; recall over true scatterers strictly above the floor"""
    truth = set(true_support)
    estimated = set(estimated_support)
    levels = magnitude_to_db(np.asarray(gamma), convention)
    significant = {m for m in truth if levels[m] > detection_floor_db}

    if estimated:
        precision, precision_defined = len(estimated & truth) / len(estimated), True
    else:
        precision, precision_defined = 1.0, False
    if significant:
        recall, recall_defined = len(estimated & significant) / len(significant), True
    else:
        recall, recall_defined = 1.0, False
    return SupportMetrics(
        precision=precision,
        recall=recall,
        precision_defined=precision_defined,
        recall_defined=recall_defined,
    )


def summarize(values: Sequence[float]) -> MetricSummary:
    if not values:
        return MetricSummary(mean=float("nan"), std=float("nan"))
    data = np.asarray(values, dtype=float)
    return MetricSummary(mean=float(np.mean(data)), std=float(np.std(data)))


def to_db(value: float) -> float:
    return float(10.0 * np.log10(value)) if value > 0.0 else float("-inf")
