"""Exception hierarchy raised by the numerical core"""


class SparseSpecError(Exception):
    """Base class for every error raised inside sparsespec"""


class SpectrumError(SparseSpecError):
    """Invalid spectral support or sensing-matrix geometry"""


class NumericalError(SparseSpecError):
    """A linear system could not be solved to the required accuracy"""


class DesignError(SparseSpecError):
    """Invalid spectrum design request"""


class EstimationError(SparseSpecError):
    """Invalid estimator input or state"""


class SceneError(SparseSpecError):
    """Scene generation request cannot be satisfied"""
