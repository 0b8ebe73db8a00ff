"""Iterative reduced-rank MMSE (RRMMSE) range-profile recovery

Each iteration scores every bin outside the support with the innovation solve z = S^{-1} v
shared by all candidates, absorbs the strongest one, refreshes the prior from the current
full-M MMSE and recomputes the posterior. The returned estimate is the MMSE over the support
alone. The loop stops once absorbing the next bin lowers the expected error of that
support-restricted estimate by less than η times its flat-prior value (the bin is then
discarded), or after min(G_max, M) iterations.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, Field

from src.errors import EstimationError
from src.estimation.bayes import (
    DEFAULT_CONDITION_CAP,
    DiagonalPrior,
    Measurement,
    NoiseModel,
    PosteriorSummary,
    factor_innovation,
    posterior_from_factor,
    restricted_mmse,
)
from src.spectrum.grid import SensingMatrix
from src.types import ComplexityEstimate, IterationRecord, TerminationReason

logger = logging.getLogger(__name__)

DEFAULT_PRIOR_VARIANCE = 5e3
DEFAULT_TOLERANCE = 1e-3
SCORE_TIE_TOLERANCE = 1e-12


class RrmmseConfig(BaseModel, frozen=True):
    prior_variance: float = Field(default=DEFAULT_PRIOR_VARIANCE, gt=0.0)
    tolerance: float = Field(default=DEFAULT_TOLERANCE, gt=0.0)
    max_iterations: int | None = Field(default=None, gt=0)  # None means K
    condition_cap: float = Field(default=DEFAULT_CONDITION_CAP, gt=1.0)
    tie_break: Literal["lowest_index"] = "lowest_index"
    keep_snapshots: bool = True


@dataclass(frozen=True)
class SupportSet:
    """Range bins absorbed so far, in insertion order (0-based)"""
    indices: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if len(set(self.indices)) != len(self.indices):
            raise EstimationError("support indices must be unique")

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, index: object) -> bool:
        return index in self.indices

    def add(self, index: int) -> "SupportSet":
        if index in self.indices:
            raise EstimationError(f"bin {index} is already in the support")
        return SupportSet(indices=(*self.indices, int(index)))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64)

    def sorted(self) -> tuple[int, ...]:
        return tuple(sorted(self.indices))


class IterationTrace(BaseModel, frozen=True):
    records: tuple[IterationRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    @property
    def traces(self) -> tuple[float, ...]:
        return tuple(r.trace_over_m for r in self.records)

    @property
    def chosen(self) -> tuple[int, ...]:
        return tuple(r.chosen_index for r in self.records)

    @property
    def expected_errors(self) -> tuple[float, ...]:
        return tuple(r.expected_error for r in self.records)


@dataclass(frozen=True, eq=False)
class EstimationResult:
    estimate: np.ndarray  # MMSE over the support, zero elsewhere
    support: SupportSet
    posterior_variance_diag: np.ndarray
    trace_history: IterationTrace
    initial_trace: float  # Tr(K_ε)/M under the flat prior
    termination_reason: TerminationReason
    warnings: tuple[str, ...] = ()
    snapshots: tuple[np.ndarray, ...] = field(default=())  # γ̂ after each iteration
    initial_estimate: np.ndarray | None = None  # flat-prior one-step MMSE
    initial_error: float = 0.0  # (Tr(K_ε) + ‖γ̂‖²)/M under the flat prior

    @property
    def iterations(self) -> int:
        return len(self.trace_history)

    @property
    def final_trace(self) -> float:
        if self.trace_history.records:
            return self.trace_history.records[-1].trace_over_m
        return self.initial_trace

    def to_dict(self) -> dict[str, Any]:
        """JSON form: interleaved re/im estimate and 1-based bins"""
        interleaved = np.column_stack([self.estimate.real, self.estimate.imag]).ravel()
        return {
            "estimate": [float(x) for x in interleaved],
            "support": [i + 1 for i in self.support.indices],
            "posterior_variance_diag": [float(x) for x in self.posterior_variance_diag],
            "initial_trace": self.initial_trace,
            "initial_error": self.initial_error,
            "trace_history": [
                {
                    "iteration": r.iteration,
                    "chosen_bin": r.chosen_index + 1,
                    "magnitude": r.magnitude,
                    "trace_over_m": r.trace_over_m,
                    "expected_error": r.expected_error,
                }
                for r in self.trace_history.records
            ],
            "termination_reason": self.termination_reason,
            "warnings": list(self.warnings),
        }


def _candidate_scores(
    h: SensingMatrix, prior: DiagonalPrior, z: np.ndarray, support: SupportSet
) -> np.ndarray:
    """|σ²_{γ,m}·h_m^H z| for every bin, with support bins set to -inf"""
    scores = np.abs(prior.variances * (h.entries.conj().T @ z))
    if len(support):
        scores[support.as_array()] = -np.inf
    return scores


def _pick(scores: np.ndarray) -> tuple[int, float]:
    best = float(np.max(scores))
    if not np.isfinite(best):
        raise EstimationError("no candidates: every bin is already in the support")
    # near-equal scores resolve to the lowest index
    threshold = best - SCORE_TIE_TOLERANCE * max(best, 1.0)
    index = int(np.flatnonzero(scores >= threshold)[0])
    return index, float(scores[index])


def score_candidates(
    h: SensingMatrix,
    prior: DiagonalPrior,
    noise: NoiseModel,
    v: Measurement,
    support: SupportSet,
    condition_cap: float = DEFAULT_CONDITION_CAP,
) -> tuple[int, float]:
    if len(support) >= h.column_count:
        raise EstimationError("no candidates: every bin is already in the support")
    if len(v) != h.row_count:
        raise EstimationError(
            f"measurement has {len(v)} samples, sensing matrix has {h.row_count} rows"
        )
    factor = factor_innovation(h, prior, noise, condition_cap)
    z = factor.solve(v.values)
    return _pick(_candidate_scores(h, prior, z, support))


def update_prior(
    prior: DiagonalPrior,
    support: SupportSet,
    estimate: np.ndarray,
    posterior_diag: np.ndarray,
    prior_variance: float,
) -> DiagonalPrior:
    """|γ̂_m|² + [K_ε]_mm on the support, the flat σ_γ² elsewhere"""
    variances = np.full(prior.bin_count, float(prior_variance))
    if len(support):
        idx = support.as_array()
        refreshed = np.abs(estimate[idx]) ** 2 + np.maximum(posterior_diag[idx], 0.0)
        variances[idx] = np.maximum(refreshed, np.finfo(float).tiny)
    return DiagonalPrior(variances=variances)


def expected_error(posterior: PosteriorSummary, support: SupportSet) -> float:
    """(Tr(K_ε) + Σ_{m∉S} |γ̂_m|²)/M: posterior MSE of γ̂ with off-support bins zeroed"""
    off = np.abs(posterior.estimate) ** 2
    if len(support):
        off[support.as_array()] = 0.0
    return float(np.mean(posterior.error_variance_diag + off))


def _recorded_warning(warnings: list[str], message: str) -> None:
    logger.warning(message)
    warnings.append(message)


def run_rrmmse(
    h: SensingMatrix, v: Measurement, noise: NoiseModel, config: RrmmseConfig
) -> EstimationResult:
    k, m = h.row_count, h.column_count
    if k == 0:
        raise EstimationError("sensing matrix has no rows (K = 0)")
    if len(v) != k:
        raise EstimationError(f"measurement has {len(v)} samples, sensing matrix has {k} rows")

    warnings: list[str] = []
    g_max = config.max_iterations if config.max_iterations is not None else k
    if g_max > k:
        _recorded_warning(warnings, f"G_max = {g_max} exceeds the preserved line count K = {k}")
    limit = min(g_max, m)
    rank = int(np.linalg.matrix_rank(h.entries))

    prior = DiagonalPrior.uniform(m, config.prior_variance)
    factor = factor_innovation(h, prior, noise, config.condition_cap)
    z = factor.solve(v.values)
    posterior: PosteriorSummary = posterior_from_factor(h, prior, factor, v)
    support = SupportSet()
    initial_trace = posterior.trace_over_m
    initial_estimate = posterior.estimate
    initial_error = expected_error(posterior, support)
    previous = initial_error
    estimate = np.zeros(m, dtype=complex)

    records: list[IterationRecord] = []
    snapshots: list[np.ndarray] = []
    reason: TerminationReason = "max_iterations"

    for iteration in range(1, limit + 1):
        started = time.perf_counter()
        chosen, magnitude = _pick(_candidate_scores(h, prior, z, support))
        grown = support.add(chosen)
        grown_prior = update_prior(
            prior, grown, posterior.estimate, posterior.error_variance_diag,
            config.prior_variance,
        )
        grown_factor = factor_innovation(h, grown_prior, noise, config.condition_cap)
        grown_posterior = posterior_from_factor(h, grown_prior, grown_factor, v)
        current = expected_error(grown_posterior, grown)

        if previous - current <= config.tolerance * initial_error:
            logger.debug(
                "bin %d lowers the expected error by %.3g only; stopping",
                chosen, previous - current,
            )
            reason = "plateau"
            break

        support, prior, posterior = grown, grown_prior, grown_posterior
        z = grown_factor.solve(v.values)
        estimate = restricted_mmse(h, prior, noise, v, support.as_array())
        previous = current

        records.append(
            IterationRecord(
                iteration=iteration,
                chosen_index=chosen,
                magnitude=magnitude,
                trace_over_m=posterior.trace_over_m,
                expected_error=current,
                wall_time=time.perf_counter() - started,
            )
        )
        if config.keep_snapshots:
            snapshots.append(estimate.copy())
        logger.debug(
            "iteration %d: bin %d |γ̂| %.4g trace %.6g expected error %.6g",
            iteration, chosen, magnitude, posterior.trace_over_m, current,
        )

        if iteration == rank + 1:
            _recorded_warning(
                warnings, f"iteration count exceeded the sensing-matrix rank ({rank})"
            )

    logger.info(
        "RRMMSE stopped after %d iterations (%s), trace %.6g",
        len(records), reason, posterior.trace_over_m,
    )
    return EstimationResult(
        estimate=estimate,
        support=support,
        posterior_variance_diag=posterior.error_variance_diag,
        trace_history=IterationTrace(records=tuple(records)),
        initial_trace=initial_trace,
        termination_reason=reason,
        warnings=tuple(warnings),
        snapshots=tuple(snapshots),
        initial_estimate=initial_estimate,
        initial_error=initial_error,
    )


def complexity_model(g: int, m: int, k: int) -> ComplexityEstimate:
    """Flop estimates G·K³ + G²·M·K² and its dominant term G²·M·K²"""
    if g < 1 or m < 1 or k < 1:
        raise EstimationError("complexity model needs positive G, M and K")
    dominant = g * g * m * k * k
    return ComplexityEstimate(full=g * k**3 + dominant, dominant=dominant)
