"""Frequency and range grids, spectral supports, sensing matrices and coarray diagnostics"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from pydantic import BaseModel, Field, model_validator

from src.errors import SpectrumError
from src.types import GramStats

logger = logging.getLogger(__name__)

# Dense K×M complex128 storage ceiling for build_sensing_matrix
DEFAULT_MEMORY_BUDGET = 2 * 1024**3
NORMALIZATION_TOLERANCE = 1e-12


class FrequencyGrid(BaseModel, frozen=True):
    """N uniformly spaced spectral lines n·Δf, n = 0..N-1 (baseband)"""
    line_count: int = Field(gt=0)
    line_spacing: float = Field(gt=0.0)  # Hz
    oversampling_factor: int = Field(default=1, ge=1)
    carrier_frequency: float = 0.0  # Hz, recorded only

    @property
    def bandwidth(self) -> float:
        return self.line_count * self.line_spacing

    @property
    def angular_spacing(self) -> float:
        return 2.0 * math.pi * self.line_spacing

    @property
    def nyquist_count(self) -> int:
        return max(1, self.line_count // self.oversampling_factor)

    def angular_frequencies(self, indices: Iterable[int]) -> np.ndarray:
        return self.angular_spacing * np.asarray(list(indices), dtype=float)

    @classmethod
    def from_geometry(
        cls,
        bandwidth: float,
        timewidth: float,
        oversampling_factor: int,
        carrier_frequency: float = 0.0,
    ) -> "FrequencyGrid":
        """N = oversampling·2·B·T_0 lines spanning the two-sided baseband ±B, so Δf = 2B/N

        With delays at 1/(2B) this makes Δf·Δτ = 1/N, so the full support gives orthonormal
        columns whenever N ≥ M. The `bandwidth` of the returned grid is therefore the span 2B.
        """
        nyquist = round(2.0 * bandwidth * timewidth)
        if nyquist < 1:
            raise SpectrumError(
                f"2·B·T0 = {2.0 * bandwidth * timewidth:g} leaves no Nyquist samples"
            )
        line_count = oversampling_factor * nyquist
        return cls(
            line_count=line_count,
            line_spacing=2.0 * bandwidth / line_count,
            oversampling_factor=oversampling_factor,
            carrier_frequency=carrier_frequency,
        )


class RangeGrid(BaseModel, frozen=True):
    """M range bins with delays τ_m = m·T_0/(M-1), m = 0..M-1, spanning [0, T_0]"""
    bin_count: int = Field(gt=0)
    timewidth: float = Field(ge=0.0)  # seconds

    @model_validator(mode="after")
    def _check_span(self) -> "RangeGrid":
        if self.bin_count > 1 and self.timewidth <= 0.0:
            raise ValueError("timewidth must be positive when bin_count > 1")
        return self

    @property
    def bin_spacing(self) -> float:
        if self.bin_count == 1:
            return 0.0
        return self.timewidth / (self.bin_count - 1)

    @property
    def delays(self) -> np.ndarray:
        return np.linspace(0.0, self.timewidth, self.bin_count)

    @classmethod
    def from_geometry(cls, bandwidth: float, timewidth: float) -> "RangeGrid":
        """M = 2·B·T_0 + 1 bins at Nyquist spacing 1/(2B)"""
        return cls(bin_count=round(2.0 * bandwidth * timewidth) + 1, timewidth=timewidth)


class SpectrumSupport(BaseModel, frozen=True):
    """Binary occupancy over the frequency grid; serializes as {"n": N, "preserved": [...]}"""
    n: int = Field(gt=0)
    preserved: tuple[int, ...] = ()

    @model_validator(mode="after")
    def _check_indices(self) -> "SpectrumSupport":
        previous = -1
        for index in self.preserved:
            if index <= previous:
                raise ValueError("preserved indices must be strictly increasing")
            previous = index
        if self.preserved and (self.preserved[0] < 0 or self.preserved[-1] >= self.n):
            raise ValueError(f"preserved indices must lie in [0, {self.n})")
        return self

    @property
    def line_count(self) -> int:
        return self.n

    @property
    def preserved_count(self) -> int:
        return len(self.preserved)

    @property
    def mask(self) -> np.ndarray:
        w = np.zeros(self.n, dtype=np.int64)
        w[list(self.preserved)] = 1
        return w

    @classmethod
    def full(cls, n: int) -> "SpectrumSupport":
        return cls(n=n, preserved=tuple(range(n)))

    @classmethod
    def from_mask(cls, mask: Iterable[int]) -> "SpectrumSupport":
        w = np.asarray(list(mask), dtype=np.int64)
        if np.any((w != 0) & (w != 1)):
            raise SpectrumError("mask entries must be 0 or 1")
        return cls(n=int(w.size), preserved=tuple(int(i) for i in np.flatnonzero(w)))

    def without(self, indices: Iterable[int]) -> "SpectrumSupport":
        removed = set(indices)
        missing = removed.difference(self.preserved)
        if missing:
            raise SpectrumError(f"lines {sorted(missing)} are not preserved")
        return SpectrumSupport(
            n=self.n, preserved=tuple(i for i in self.preserved if i not in removed)
        )


@dataclass(frozen=True, eq=False)
class SensingMatrix:
    entries: np.ndarray  # K×M complex
    frequencies: np.ndarray  # ω_k, rad/s
    normalized: bool

    @property
    def row_count(self) -> int:
        return int(self.entries.shape[0])

    @property
    def column_count(self) -> int:
        return int(self.entries.shape[1])

    def gram(self) -> np.ndarray:
        return self.entries.conj().T @ self.entries

    @classmethod
    def from_array(
        cls, entries: np.ndarray, frequencies: np.ndarray | None = None
    ) -> "SensingMatrix":
        """Wrap an arbitrary K×M matrix; `normalized` reflects its actual column norms"""
        h = np.asarray(entries, dtype=complex)
        if h.ndim != 2:
            raise SpectrumError("sensing matrix must be two-dimensional")
        norms = np.linalg.norm(h, axis=0)
        normalized = bool(np.all(np.abs(norms - 1.0) < NORMALIZATION_TOLERANCE))
        omega = np.zeros(h.shape[0]) if frequencies is None else np.asarray(frequencies, float)
        return cls(entries=h, frequencies=omega, normalized=normalized)


def steering_rows(omega: np.ndarray, delays: np.ndarray) -> np.ndarray:
    """Unnormalized rows exp(j·ω_k·τ_m)"""
    return np.exp(1j * np.outer(omega, delays))


def build_sensing_matrix(
    support: SpectrumSupport,
    grid: FrequencyGrid,
    ranges: RangeGrid,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> SensingMatrix:
    if support.n != grid.line_count:
        raise SpectrumError(
            f"support spans {support.n} lines but the grid has {grid.line_count}"
        )
    k = support.preserved_count
    if k == 0:
        raise SpectrumError("empty spectrum")
    m = ranges.bin_count
    required = k * m * np.dtype(complex).itemsize
    if required > memory_budget:
        raise SpectrumError(
            f"{k}x{m} sensing matrix needs {required} bytes, budget is {memory_budget}"
        )

    omega = grid.angular_frequencies(support.preserved)
    raw = steering_rows(omega, ranges.delays)
    entries = raw / np.linalg.norm(raw, axis=0)[np.newaxis, :]
    logger.debug("built %dx%d sensing matrix", k, m)
    return SensingMatrix(entries=entries, frequencies=omega, normalized=True)


@dataclass(frozen=True, eq=False)
class Coarray:
    values: np.ndarray  # c(0)..c(N-1)

    @property
    def zero_lag(self) -> int:
        return int(self.values[0])

    @property
    def redundancy(self) -> np.ndarray:
        return self.values[1:]

    @property
    def hole_lags(self) -> tuple[int, ...]:
        return tuple(int(lag) for lag in np.flatnonzero(self.values[1:] == 0) + 1)

    @property
    def span(self) -> int:
        """Largest covered lag, equal to max - min of the preserved indices"""
        covered = np.flatnonzero(self.values > 0)
        return int(covered[-1]) if covered.size else 0

    @property
    def holes_within_span(self) -> tuple[int, ...]:
        return tuple(lag for lag in self.hole_lags if lag <= self.span)

    def normalized(self) -> np.ndarray:
        if self.zero_lag == 0:
            return np.zeros(self.values.shape, dtype=float)
        return self.values / float(self.zero_lag)


def compute_coarray(support: SpectrumSupport) -> Coarray:
    w = support.mask
    c = np.correlate(w, w, mode="full")[support.n - 1:]
    return Coarray(values=c.astype(np.int64))


def gram_offdiag_stats(h: SensingMatrix) -> GramStats:
    m = h.column_count
    if m < 2:
        return GramStats(max_offdiag=0.0, integrated_sidelobe=0.0)

    power = np.abs(h.gram()) ** 2
    np.fill_diagonal(power, 0.0)
    return GramStats(
        max_offdiag=float(np.sqrt(power.max())),
        integrated_sidelobe=float(power.sum() / (m * (m - 1))),
    )
