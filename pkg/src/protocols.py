from typing import TYPE_CHECKING, Protocol, runtime_checkable

from returns.result import Result

from src.estimation.bayes import Measurement, NoiseModel
from src.spectrum.grid import SensingMatrix

if TYPE_CHECKING:
    from src.estimation.estimators import EstimatorOutput


@runtime_checkable
class Estimator(Protocol):
    @property
    def name(self) -> str: ...
    @property
    def description(self) -> str: ...
    def execute(
        self, h: SensingMatrix, v: Measurement, noise: NoiseModel
    ) -> "Result[EstimatorOutput, str]": ...
