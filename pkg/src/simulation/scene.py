"""Random sparse range profiles and noisy measurements with per-realization SNR"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, Field, model_validator

from src.errors import SceneError
from src.estimation.bayes import Measurement, NoiseModel
from src.spectrum.grid import RangeGrid, SensingMatrix

logger = logging.getLogger(__name__)

DEFAULT_NOISE_FLOOR = 1e-9

# Per-trial stream ids mixed into the seed
SCENE_STREAM = 0
NOISE_STREAM = 1

# "amplitude": u = 20·log10|γ|; "power": u = 10·log10|γ|, as if |γ| were itself a power
MagnitudeConvention = Literal["amplitude", "power"]


def derive_seed(base_seed: int, trial: int, stream: int) -> int:
    """64-bit seed for one (trial, stream) pair, independent of scheduling order"""
    sequence = np.random.SeedSequence([base_seed, trial, stream])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def magnitude_to_db(
    magnitude: np.ndarray, convention: MagnitudeConvention = "amplitude"
) -> np.ndarray:
    scale = 20.0 if convention == "amplitude" else 10.0
    with np.errstate(divide="ignore"):
        return scale * np.log10(np.abs(magnitude))


class SceneConfig(BaseModel, frozen=True):
    target_occupancy: float = Field(ge=0.0, le=1.0)  # ρ
    magnitude_range: tuple[float, float] = (-10.0, 30.0)  # dB
    magnitude_convention: MagnitudeConvention = "amplitude"
    rng_seed: int = Field(default=0, ge=0, lt=2**64)
    eligible_bins: tuple[int, ...] | None = None  # 0-based; None means 1..M-1

    @model_validator(mode="after")
    def _check_range(self) -> "SceneConfig":
        low, high = self.magnitude_range
        if not low < high:
            raise ValueError("magnitude_range needs low < high")
        return self


@dataclass(frozen=True, eq=False)
class Scene:
    reflectivity: np.ndarray  # γ, complex M-vector
    true_support: tuple[int, ...]  # sorted, 0-based

    @property
    def scatterer_count(self) -> int:
        return len(self.true_support)

    @property
    def bin_count(self) -> int:
        return int(self.reflectivity.size)

    def to_dict(self) -> dict[str, Any]:
        return {
            "bin_count": self.bin_count,
            "true_support": [m + 1 for m in self.true_support],
            "reflectivity": [
                [float(self.reflectivity[m].real), float(self.reflectivity[m].imag)]
                for m in self.true_support
            ],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Scene":
        reflectivity = np.zeros(int(data["bin_count"]), dtype=complex)
        support = tuple(int(m) - 1 for m in data["true_support"])
        for m, (re, im) in zip(support, data["reflectivity"]):
            reflectivity[m] = complex(re, im)
        return cls(reflectivity=reflectivity, true_support=support)


def scatterer_count(target_occupancy: float, bin_count: int) -> int:
    """G = ⌊ρ·(M-1)⌋"""
    return math.floor(target_occupancy * (bin_count - 1))


def generate_scene(cfg: SceneConfig, ranges: RangeGrid) -> Scene:
    m = ranges.bin_count
    eligible = np.asarray(
        cfg.eligible_bins if cfg.eligible_bins is not None else range(1, m), dtype=np.int64
    )
    if eligible.size and (eligible.min() < 0 or eligible.max() >= m):
        raise SceneError(f"eligible bins must lie in [0, {m})")
    if np.unique(eligible).size != eligible.size:
        raise SceneError("eligible bins must be distinct")

    g = scatterer_count(cfg.target_occupancy, m)
    if cfg.target_occupancy > 0.0 and g < 1:
        logger.warning(
            "ρ·(M-1) = %.3g is below one scatterer; placing a single scatterer",
            cfg.target_occupancy * (m - 1),
        )
        g = 1
    if g > eligible.size:
        raise SceneError(f"requested {g} scatterers but only {eligible.size} bins are eligible")

    reflectivity = np.zeros(m, dtype=complex)
    if g == 0:
        return Scene(reflectivity=reflectivity, true_support=())

    rng = np.random.default_rng(cfg.rng_seed)
    bins = np.sort(rng.choice(eligible, size=g, replace=False))
    low, high = cfg.magnitude_range
    level_db = rng.uniform(low, high, size=g)
    scale = 20.0 if cfg.magnitude_convention == "amplitude" else 10.0
    magnitude = 10.0 ** (level_db / scale)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=g)
    reflectivity[bins] = magnitude * np.exp(1j * phase)
    return Scene(reflectivity=reflectivity, true_support=tuple(int(b) for b in bins))


def simulate_measurement(
    h: SensingMatrix,
    scene: Scene,
    snr_db: float,
    rng_seed: int,
    noise_floor: float = DEFAULT_NOISE_FLOOR,
) -> tuple[Measurement, NoiseModel]:
    """v = Hγ + n with σ_n² = (‖Hγ‖²/K)/10^{SNR/10} for this realization"""
    if scene.bin_count != h.column_count:
        raise SceneError(
            f"scene has {scene.bin_count} bins, sensing matrix has {h.column_count} columns"
        )
    k = h.row_count
    clean = h.entries @ scene.reflectivity
    signal_power = float(np.real(np.vdot(clean, clean))) / k
    if signal_power > 0.0:
        variance = signal_power / 10.0 ** (snr_db / 10.0)
    else:
        logger.warning("zero-signal scene; noise variance falls back to %g", noise_floor)
        variance = noise_floor
    if variance <= 0.0:
        variance = noise_floor

    rng = np.random.default_rng(rng_seed)
    noise = math.sqrt(variance / 2.0) * (rng.standard_normal(k) + 1j * rng.standard_normal(k))
    return Measurement(values=clean + noise), NoiseModel(variance=variance)
