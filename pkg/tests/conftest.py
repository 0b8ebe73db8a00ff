import numpy as np
import pytest

from src.config import ExperimentConfig
from src.metrics import reset_run_metrics
from src.spectrum.grid import (
    FrequencyGrid,
    RangeGrid,
    SensingMatrix,
    SpectrumSupport,
    build_sensing_matrix,
)


@pytest.fixture(autouse=True)
def fresh_metrics():
    reset_run_metrics()
    yield


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def dft_geometry() -> tuple[FrequencyGrid, RangeGrid]:
    """N = M = 8 with delays m/8: the full support gives a unitary H"""
    return FrequencyGrid(line_count=8, line_spacing=1.0), RangeGrid(bin_count=8, timewidth=7 / 8)


@pytest.fixture
def dft_matrix(dft_geometry: tuple[FrequencyGrid, RangeGrid]) -> SensingMatrix:
    grid, ranges = dft_geometry
    return build_sensing_matrix(SpectrumSupport.full(grid.line_count), grid, ranges)


@pytest.fixture
def small_geometry() -> tuple[FrequencyGrid, RangeGrid]:
    """N = 16 lines, M = 8 bins at delays m/16; columns orthogonal under the full support"""
    return (
        FrequencyGrid(line_count=16, line_spacing=1.0),
        RangeGrid(bin_count=8, timewidth=7 / 16),
    )


@pytest.fixture
def small_config(tmp_path) -> ExperimentConfig:
    """2·B·T_0 = 16: N = 32 lines, M = 17 bins, three scatterers at ρ = 0.2"""
    return ExperimentConfig.model_validate(
        {
            "geometry": {"bandwidth": 2000.0, "timewidth": 4e-3, "oversampling_factor": 2},
            "spectrum": {"occupancy": 0.5},
            "scene": {"target_occupancy": 0.2},
            "trials": 3,
            "rng_seed": 7,
            "workers": 2,
            "outputs": {"directory": str(tmp_path / "results")},
        }
    )
