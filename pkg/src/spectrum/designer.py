"""Greedy block-removal design of sparse spectra by Marginal Fisher Information (MFI)

The MFI of a block is the increase of Tr(K_ε)/M its removal would cause. Starting from the
full grid, the designer repeatedly removes the remaining block with the smallest MFI until
the occupancy target is met.
"""
import logging
import math
from typing import Iterable, Literal, Protocol, Sequence

import numpy as np
import scipy.linalg as la
from pydantic import BaseModel, Field, model_validator

from src.errors import DesignError, SparseSpecError
from src.estimation.bayes import DiagonalPrior, NoiseModel, posterior_covariance_diag
from src.spectrum.grid import (
    FrequencyGrid,
    RangeGrid,
    SensingMatrix,
    SpectrumSupport,
    build_sensing_matrix,
    steering_rows,
)

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_FRACTION = 0.0125
TIE_TOLERANCE = 1e-10

DesignMethod = Literal["gram", "recompute"]
# "fixed": every line keeps energy 1/N, so a sparse column has norm sqrt(K/N);
# "renormalized": columns rescaled to unit norm after removal, as in build_sensing_matrix
DesignNormalization = Literal["fixed", "renormalized"]


class BlockPartition(BaseModel, frozen=True):
    """Consecutive blocks of `block_size` lines covering [0, N); the last may be short"""
    line_count: int = Field(gt=0)
    block_size: int = Field(gt=0)

    @model_validator(mode="after")
    def _check_size(self) -> "BlockPartition":
        if self.block_size > self.line_count:
            raise ValueError("block_size cannot exceed line_count")
        return self

    @property
    def block_count(self) -> int:
        return math.ceil(self.line_count / self.block_size)

    def block(self, block_id: int) -> range:
        if not 0 <= block_id < self.block_count:
            raise DesignError(f"block {block_id} outside [0, {self.block_count})")
        start = block_id * self.block_size
        return range(start, min(start + self.block_size, self.line_count))

    @property
    def blocks(self) -> tuple[range, ...]:
        return tuple(self.block(b) for b in range(self.block_count))

    @classmethod
    def default(
        cls, line_count: int, fraction: float = DEFAULT_BLOCK_FRACTION
    ) -> "BlockPartition":
        return cls(line_count=line_count, block_size=max(1, math.ceil(fraction * line_count)))


class MfiReport(BaseModel, frozen=True):
    removal_order: tuple[int, ...] = ()
    mfi_values: tuple[float, ...] = ()
    trace_history: tuple[float, ...] = ()  # full spectrum first, then after each removal
    final_occupancy: float = 1.0
    block_size: int = 1
    normalization: DesignNormalization = "fixed"


def occupancy(support: SpectrumSupport) -> float:
    return support.preserved_count / support.n


def _trace_from_gram(
    gram: np.ndarray,
    prior: DiagonalPrior,
    noise: NoiseModel,
    normalization: DesignNormalization,
    full_line_count: int,
) -> float:
    """Tr((H^H H/σ_n² + K_γ^{-1})^{-1})/M for the rows behind `gram`, per `normalization`"""
    power = np.real(np.diag(gram))
    if normalization == "renormalized":
        if np.any(power <= 0.0):
            raise DesignError("a range bin has no remaining spectral energy")
        scale = np.sqrt(power)
        j = gram / np.outer(scale, scale)
    else:
        j = gram / full_line_count
    j = 0.5 * (j + j.conj().T) / noise.variance
    j[np.diag_indices_from(j)] += 1.0 / prior.variances
    lower = np.linalg.cholesky(j)
    inv_lower = la.solve_triangular(lower, np.eye(j.shape[0]), lower=True)
    return float(np.sum(np.abs(inv_lower) ** 2) / j.shape[0])


def block_removal_cost(
    rows: np.ndarray,
    block: Sequence[int],
    prior: DiagonalPrior,
    noise: NoiseModel,
    normalization: DesignNormalization = "fixed",
) -> float:
    """Bound-trace increase from dropping `block` rows out of an arbitrary steering-row set"""
    keep = np.setdiff1d(np.arange(rows.shape[0]), np.asarray(block, dtype=int))
    if keep.size == 0:
        raise DesignError("removal would empty the spectrum")
    total = rows.shape[0]
    before = _trace_from_gram(rows.conj().T @ rows, prior, noise, normalization, total)
    kept = rows[keep]
    after = _trace_from_gram(kept.conj().T @ kept, prior, noise, normalization, total)
    return after - before


def design_sensing_matrix(
    support: SpectrumSupport,
    grid: FrequencyGrid,
    ranges: RangeGrid,
    normalization: DesignNormalization = "fixed",
) -> SensingMatrix:
    """H as seen by the design criterion"""
    if normalization == "renormalized":
        return build_sensing_matrix(support, grid, ranges)
    if support.n != grid.line_count:
        raise DesignError(f"support spans {support.n} lines but the grid has {grid.line_count}")
    if support.preserved_count == 0:
        raise DesignError("empty spectrum")
    omega = grid.angular_frequencies(support.preserved)
    entries = steering_rows(omega, ranges.delays) / np.sqrt(grid.line_count)
    return SensingMatrix(entries=entries, frequencies=omega, normalized=False)


def support_trace(
    support: SpectrumSupport,
    grid: FrequencyGrid,
    ranges: RangeGrid,
    prior: DiagonalPrior,
    noise: NoiseModel,
    normalization: DesignNormalization = "fixed",
) -> float:
    """Tr(K_ε)/M of a support through the K×K path"""
    h = design_sensing_matrix(support, grid, ranges, normalization)
    return float(np.mean(posterior_covariance_diag(h, prior, noise)))


def mfi_of_removal(
    current: SpectrumSupport,
    block: Iterable[int],
    grid: FrequencyGrid,
    ranges: RangeGrid,
    prior: DiagonalPrior,
    noise: NoiseModel,
    normalization: DesignNormalization = "fixed",
) -> float:
    lines = tuple(block)
    if not lines or not set(lines).issubset(current.preserved):
        raise DesignError("block is not contained in the current support")
    remaining = current.without(lines)
    if remaining.preserved_count == 0:
        raise DesignError("removal would empty the spectrum")
    before = support_trace(current, grid, ranges, prior, noise, normalization)
    after = support_trace(remaining, grid, ranges, prior, noise, normalization)
    return max(after - before, 0.0)


class _TraceEvaluator(Protocol):
    def current_trace(self) -> float: ...
    def trace_without(self, lines: range) -> float: ...
    def commit(self, lines: range) -> None: ...


class _GramEvaluator:
    """Downdates the M×M Gram of unscaled steering rows, one block at a time"""

    def __init__(
        self,
        grid: FrequencyGrid,
        ranges: RangeGrid,
        prior: DiagonalPrior,
        noise: NoiseModel,
        normalization: DesignNormalization,
    ):
        self._grid = grid
        self._delays = ranges.delays
        self._prior = prior
        self._noise = noise
        self._normalization = normalization
        rows = self._rows(range(grid.line_count))
        self._gram = rows.conj().T @ rows

    def _rows(self, lines: Iterable[int]) -> np.ndarray:
        return steering_rows(self._grid.angular_frequencies(lines), self._delays)

    def _block_gram(self, lines: range) -> np.ndarray:
        rows = self._rows(lines)
        return rows.conj().T @ rows

    def _trace(self, gram: np.ndarray) -> float:
        return _trace_from_gram(
            gram, self._prior, self._noise, self._normalization, self._grid.line_count
        )

    def current_trace(self) -> float:
        return self._trace(self._gram)

    def trace_without(self, lines: range) -> float:
        return self._trace(self._gram - self._block_gram(lines))

    def commit(self, lines: range) -> None:
        self._gram = self._gram - self._block_gram(lines)


class _RecomputeEvaluator:
    """Rebuilds H for every candidate and evaluates the trace through the K×K form"""

    def __init__(
        self,
        grid: FrequencyGrid,
        ranges: RangeGrid,
        prior: DiagonalPrior,
        noise: NoiseModel,
        normalization: DesignNormalization,
    ):
        self._grid = grid
        self._ranges = ranges
        self._prior = prior
        self._noise = noise
        self._normalization = normalization
        self._support = SpectrumSupport.full(grid.line_count)

    def _trace(self, support: SpectrumSupport) -> float:
        return support_trace(
            support, self._grid, self._ranges, self._prior, self._noise, self._normalization
        )

    def current_trace(self) -> float:
        return self._trace(self._support)

    def trace_without(self, lines: range) -> float:
        return self._trace(self._support.without(lines))

    def commit(self, lines: range) -> None:
        self._support = self._support.without(lines)


def design_spectrum(
    grid: FrequencyGrid,
    ranges: RangeGrid,
    partition: BlockPartition,
    target_occupancy: float,
    prior: DiagonalPrior,
    noise: NoiseModel,
    method: DesignMethod = "gram",
    normalization: DesignNormalization = "fixed",
) -> tuple[SpectrumSupport, MfiReport]:
    if not 0.0 < target_occupancy <= 1.0:
        raise DesignError(f"target occupancy must lie in (0, 1], got {target_occupancy}")
    if partition.line_count != grid.line_count:
        raise DesignError(
            f"partition covers {partition.line_count} lines, grid has {grid.line_count}"
        )
    if prior.bin_count != ranges.bin_count:
        raise DesignError(f"prior has {prior.bin_count} bins, range grid has {ranges.bin_count}")
    if target_occupancy * grid.line_count < partition.block_size:
        raise DesignError(
            f"target occupancy {target_occupancy} keeps fewer lines than one block "
            f"({partition.block_size})"
        )

    evaluator: _TraceEvaluator
    if method == "gram":
        evaluator = _GramEvaluator(grid, ranges, prior, noise, normalization)
    else:
        evaluator = _RecomputeEvaluator(grid, ranges, prior, noise, normalization)

    support = SpectrumSupport.full(grid.line_count)
    removed: list[int] = []
    mfi_values: list[float] = []
    trace = evaluator.current_trace()
    history = [trace]

    while occupancy(support) > target_occupancy:
        costs: list[tuple[int, float, float]] = []
        for block_id in range(partition.block_count):
            if block_id in removed:
                continue
            try:
                after = evaluator.trace_without(partition.block(block_id))
            except (np.linalg.LinAlgError, SparseSpecError) as e:
                logger.debug("block %d rejected: %s", block_id, e)
                continue
            costs.append((block_id, after - trace, after))
        if not costs:
            raise DesignError("no block can be removed without losing a range bin")

        # ties (within rounding) go to the lowest block index
        best = min(cost for _, cost, _ in costs)
        threshold = best + TIE_TOLERANCE * max(1.0, abs(trace))
        chosen, cost, after = next(c for c in costs if c[1] <= threshold)
        if cost < -TIE_TOLERANCE * max(1.0, abs(trace)):
            logger.warning("removing block %d lowered the bound trace by %.3g", chosen, -cost)

        lines = partition.block(chosen)
        evaluator.commit(lines)
        support = support.without(lines)
        removed.append(chosen)
        mfi_values.append(max(cost, 0.0))
        trace = after
        history.append(trace)
        logger.debug(
            "removed block %d (MFI %.6g), occupancy %.4f", chosen, cost, occupancy(support)
        )

    logger.info(
        "designed %d/%d-line spectrum (occupancy %.4f) after %d removals",
        support.preserved_count,
        support.n,
        occupancy(support),
        len(removed),
    )
    report = MfiReport(
        removal_order=tuple(removed),
        mfi_values=tuple(mfi_values),
        trace_history=tuple(history),
        final_occupancy=occupancy(support),
        block_size=partition.block_size,
        normalization=normalization,
    )
    return support, report
