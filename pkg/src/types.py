from typing import Literal

from pydantic import BaseModel

FailureKind = Literal["config", "numerical", "io"]
TerminationReason = Literal["plateau", "max_iterations"]


class RunFailure(BaseModel, frozen=True):
    kind: FailureKind
    message: str

    @property
    def exit_code(self) -> int:
        return {"config": 1, "numerical": 2, "io": 3}[self.kind]

    def __str__(self) -> str:
        return f"{self.kind} error: {self.message}"


class GramStats(BaseModel, frozen=True):
    max_offdiag: float
    integrated_sidelobe: float


class ComplexityEstimate(BaseModel, frozen=True):
    full: int  # G·K³ + G²·M·K²
    dominant: int  # G²·M·K²


class SupportMetrics(BaseModel, frozen=True):
    precision: float
    recall: float
    precision_defined: bool = True  # False when the estimated support is empty
    recall_defined: bool = True  # False when no true scatterer clears the floor


class IterationRecord(BaseModel, frozen=True):
    iteration: int
    chosen_index: int
    magnitude: float
    trace_over_m: float
    expected_error: float  # posterior mean squared error of the support-restricted estimate, /M
    wall_time: float = 0.0


class MetricSummary(BaseModel, frozen=True):
    mean: float
    std: float
