import numpy as np

from src.estimation.bayes import DiagonalPrior, NoiseModel
from src.spectrum.grid import SensingMatrix


def random_sensing(rng: np.random.Generator, rows: int, columns: int) -> SensingMatrix:
    raw = rng.standard_normal((rows, columns)) + 1j * rng.standard_normal((rows, columns))
    return SensingMatrix.from_array(raw / np.linalg.norm(raw, axis=0))


def information_trace(h: SensingMatrix, prior: DiagonalPrior, noise: NoiseModel) -> float:
    """Tr((H^H H/σ_n² + K_γ^{-1})^{-1})/M with an explicit inverse"""
    j = h.gram() / noise.variance + np.diag(1.0 / prior.variances)
    return float(np.real(np.trace(np.linalg.inv(j)))) / h.column_count
