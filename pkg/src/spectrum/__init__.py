from .grid import (
    Coarray,
    FrequencyGrid,
    RangeGrid,
    SensingMatrix,
    SpectrumSupport,
    build_sensing_matrix,
    compute_coarray,
    gram_offdiag_stats,
)

__all__ = [
    "Coarray",
    "FrequencyGrid",
    "RangeGrid",
    "SensingMatrix",
    "SpectrumSupport",
    "build_sensing_matrix",
    "compute_coarray",
    "gram_offdiag_stats",
]
