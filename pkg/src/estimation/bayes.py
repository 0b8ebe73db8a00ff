"""Linear-Gaussian Bayesian machinery: MMSE estimate, posterior covariance, Bayesian FIM/CRLB

All K×K innovation solves go through a Cholesky factor; explicit inverses are never formed
on the production path. The M×M information form is a reference used by oracles and is
refused above REFERENCE_MAX_BINS.
"""
import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg as la

from src.errors import EstimationError, NumericalError
from src.spectrum.grid import SensingMatrix

logger = logging.getLogger(__name__)

DEFAULT_CONDITION_CAP = 1e12
REFERENCE_MAX_BINS = 256

CovarianceForm = Literal["gain", "information"]


@dataclass(frozen=True, eq=False)
class DiagonalPrior:
    """Per-bin a-priori variances, the diagonal of K_γ"""
    variances: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.variances, dtype=float, copy=True).ravel()
        if v.size == 0:
            raise EstimationError("prior needs at least one bin")
        if not np.all(np.isfinite(v)) or np.any(v <= 0.0):
            raise EstimationError("prior variances must be finite and strictly positive")
        v.setflags(write=False)
        object.__setattr__(self, "variances", v)

    @property
    def bin_count(self) -> int:
        return int(self.variances.size)

    @classmethod
    def uniform(cls, bin_count: int, variance: float) -> "DiagonalPrior":
        return cls(variances=np.full(bin_count, float(variance)))


@dataclass(frozen=True)
class NoiseModel:
    """White measurement noise, K_n = σ_n²·I"""
    variance: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.variance) or self.variance <= 0.0:
            raise EstimationError(f"noise variance must be positive, got {self.variance}")

    def covariance(self, row_count: int) -> np.ndarray:
        return self.variance * np.eye(row_count)


@dataclass(frozen=True, eq=False)
class Measurement:
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex).ravel())

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    estimate: np.ndarray
    error_variance_diag: np.ndarray
    trace_over_m: float


@dataclass(frozen=True, eq=False)
class InnovationFactor:
    """Cholesky factor of the innovation covariance H K_γ H^H + K_n"""
    factor: tuple[np.ndarray, bool]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return la.cho_solve(self.factor, rhs)


def _check_dimensions(
    h: SensingMatrix, prior: DiagonalPrior, v: Measurement | None = None
) -> None:
    if h.row_count == 0:
        raise EstimationError("sensing matrix has no rows (K = 0)")
    if prior.bin_count != h.column_count:
        raise EstimationError(
            f"prior has {prior.bin_count} bins, sensing matrix has {h.column_count} columns"
        )
    if v is not None and len(v) != h.row_count:
        raise EstimationError(
            f"measurement has {len(v)} samples, sensing matrix has {h.row_count} rows"
        )


def factor_innovation(
    h: SensingMatrix,
    prior: DiagonalPrior,
    noise: NoiseModel,
    condition_cap: float = DEFAULT_CONDITION_CAP,
) -> InnovationFactor:
    _check_dimensions(h, prior)
    p = prior.variances
    s = (h.entries * p[np.newaxis, :]) @ h.entries.conj().T
    s = 0.5 * (s + s.conj().T)
    s[np.diag_indices_from(s)] += noise.variance

    # λ_min ≥ σ_n² and λ_max ≤ σ_n² + Σ p_m‖h_m‖², so the eigen check runs only when needed
    column_power = np.sum(np.abs(h.entries) ** 2, axis=0)
    bound = 1.0 + float(np.dot(p, column_power)) / noise.variance
    if bound > condition_cap:
        eig = np.linalg.eigvalsh(s)
        condition = eig[-1] / eig[0] if eig[0] > 0.0 else np.inf
        if condition > condition_cap:
            raise NumericalError(
                f"ill-conditioned innovation covariance (condition number {condition:.3g} "
                f"exceeds cap {condition_cap:.3g})"
            )

    try:
        factor = la.cho_factor(s, lower=True)
    except la.LinAlgError as e:
        raise NumericalError(f"ill-conditioned innovation covariance: {e}") from e
    return InnovationFactor(factor=factor)


def posterior_diag_from_factor(
    h: SensingMatrix, prior: DiagonalPrior, factor: InnovationFactor
) -> np.ndarray:
    """[K_ε]_mm = σ²_m − σ⁴_m·h_m^H S^{-1} h_m, diagonal only"""
    p = prior.variances
    x = factor.solve(h.entries)
    quad = np.real(np.sum(h.entries.conj() * x, axis=0))
    return np.clip(p - p**2 * quad, 0.0, p)


def posterior_from_factor(
    h: SensingMatrix, prior: DiagonalPrior, factor: InnovationFactor, v: Measurement
) -> PosteriorSummary:
    z = factor.solve(v.values)
    estimate = prior.variances * (h.entries.conj().T @ z)
    diag = posterior_diag_from_factor(h, prior, factor)
    return PosteriorSummary(
        estimate=estimate, error_variance_diag=diag, trace_over_m=float(np.mean(diag))
    )


def mmse_estimate(
    h: SensingMatrix,
    prior: DiagonalPrior,
    noise: NoiseModel,
    v: Measurement,
    condition_cap: float = DEFAULT_CONDITION_CAP,
) -> PosteriorSummary:
    _check_dimensions(h, prior, v)
    factor = factor_innovation(h, prior, noise, condition_cap)
    return posterior_from_factor(h, prior, factor, v)


def restricted_mmse(
    h: SensingMatrix,
    prior: DiagonalPrior,
    noise: NoiseModel,
    v: Measurement,
    indices: np.ndarray,
) -> np.ndarray:
    """MMSE over the listed bins with every other bin held at zero

    Solved in the |S|×|S| information form, so a short support never meets the
    near-singular K×K innovation of a rank-|S| prior.
    """
    _check_dimensions(h, prior, v)
    estimate = np.zeros(h.column_count, dtype=complex)
    if indices.size == 0:
        return estimate
    sub = h.entries[:, indices]
    j = sub.conj().T @ sub / noise.variance
    j = 0.5 * (j + j.conj().T)
    j[np.diag_indices_from(j)] += 1.0 / prior.variances[indices]
    try:
        factor = la.cho_factor(j, lower=True)
    except la.LinAlgError as e:
        raise NumericalError(f"support information matrix is not positive definite: {e}") from e
    estimate[indices] = la.cho_solve(factor, sub.conj().T @ v.values / noise.variance)
    return estimate


def posterior_covariance_diag(
    h: SensingMatrix,
    prior: DiagonalPrior,
    noise: NoiseModel,
    condition_cap: float = DEFAULT_CONDITION_CAP,
) -> np.ndarray:
    factor = factor_innovation(h, prior, noise, condition_cap)
    return posterior_diag_from_factor(h, prior, factor)


def bayesian_fim(h: SensingMatrix, prior: DiagonalPrior, noise: NoiseModel) -> np.ndarray:
    """J_B = H^H K_n^{-1} H + K_γ^{-1}"""
    _check_dimensions(h, prior)
    j = h.gram() / noise.variance
    j = 0.5 * (j + j.conj().T)
    j[np.diag_indices_from(j)] += 1.0 / prior.variances
    return j


def _reference_factor(h: SensingMatrix, prior: DiagonalPrior, noise: NoiseModel) -> np.ndarray:
    if h.column_count > REFERENCE_MAX_BINS:
        raise EstimationError(
            f"M×M reference form is limited to {REFERENCE_MAX_BINS} bins, got {h.column_count}"
        )
    try:
        return np.linalg.cholesky(bayesian_fim(h, prior, noise))
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Bayesian FIM is not positive definite: {e}") from e


def posterior_covariance(
    h: SensingMatrix,
    prior: DiagonalPrior,
    noise: NoiseModel,
    form: CovarianceForm = "gain",
    condition_cap: float = DEFAULT_CONDITION_CAP,
) -> np.ndarray:
    """Full M×M K_ε in gain form (K×K solve) or information form (J_B^{-1})"""
    if form == "information":
        lower = _reference_factor(h, prior, noise)
        inv_lower = la.solve_triangular(lower, np.eye(h.column_count), lower=True)
        return inv_lower.conj().T @ inv_lower

    p = prior.variances
    factor = factor_innovation(h, prior, noise, condition_cap)
    hk = h.entries * p[np.newaxis, :]
    return np.diag(p).astype(complex) - hk.conj().T @ factor.solve(hk)


def bayesian_crlb_diag(
    h: SensingMatrix,
    prior: DiagonalPrior,
    noise: NoiseModel,
    method: CovarianceForm | None = None,
    condition_cap: float = DEFAULT_CONDITION_CAP,
) -> np.ndarray:
    """diag(J_B^{-1}); the information form is the reference, the gain form the fast path"""
    if method is None:
        method = "information" if h.column_count <= REFERENCE_MAX_BINS else "gain"
    if method == "gain":
        return posterior_covariance_diag(h, prior, noise, condition_cap)

    lower = _reference_factor(h, prior, noise)
    inv_lower = la.solve_triangular(lower, np.eye(h.column_count), lower=True)
    return np.sum(np.abs(inv_lower) ** 2, axis=0)


def matched_filter(h: SensingMatrix, v: Measurement) -> np.ndarray:
    if len(v) != h.row_count:
        raise EstimationError(
            f"measurement has {len(v)} samples, sensing matrix has {h.row_count} rows"
        )
    return h.entries.conj().T @ v.values


def trace_over_bins(diag: np.ndarray) -> float:
    return float(np.mean(diag))
