"""Pipeline stage metrics for sparsespec runs"""
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Dict, Iterator


@dataclass
class StageMetrics:
    """Track calls and time spent in one pipeline stage"""
    stage_name: str
    call_count: int = 0
    success_count: int = 0
    error_count: int = 0
    total_execution_time_ms: float = 0.0

    @property
    def success_rate(self) -> float:
        if self.call_count == 0:
            return 0.0
        return (self.success_count / self.call_count) * 100

    @property
    def mean_time_ms(self) -> float:
        if self.call_count == 0:
            return 0.0
        return self.total_execution_time_ms / self.call_count


@dataclass
class RunMetrics:
    """Track metrics for an entire CLI run; safe to update from worker threads"""
    run_start: datetime = field(default_factory=datetime.now)
    stages: Dict[str, StageMetrics] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record_stage(self, stage_name: str, success: bool, execution_time_ms: float = 0.0):
        with self._lock:
            if stage_name not in self.stages:
                self.stages[stage_name] = StageMetrics(stage_name=stage_name)
            metrics = self.stages[stage_name]
            metrics.call_count += 1
            metrics.total_execution_time_ms += execution_time_ms
            if success:
                metrics.success_count += 1
            else:
                metrics.error_count += 1

    def snapshot(self) -> list[StageMetrics]:
        with self._lock:
            return [
                StageMetrics(
                    stage_name=m.stage_name,
                    call_count=m.call_count,
                    success_count=m.success_count,
                    error_count=m.error_count,
                    total_execution_time_ms=m.total_execution_time_ms,
                )
                for m in sorted(self.stages.values(), key=lambda m: m.stage_name)
            ]

    @property
    def elapsed(self) -> timedelta:
        return datetime.now() - self.run_start


# Global metrics instance
_run_metrics: RunMetrics = RunMetrics()


def get_run_metrics() -> RunMetrics:
    return _run_metrics


def reset_run_metrics():
    """Reset run metrics (call at the start of each CLI command)"""
    global _run_metrics
    _run_metrics = RunMetrics()


def record_stage_execution(stage_name: str, success: bool, execution_time_ms: float = 0.0):
    _run_metrics.record_stage(stage_name, success, execution_time_ms)


@contextmanager
def timed_stage(stage_name: str) -> Iterator[None]:
    """Time the enclosed block and record it; exceptions count as failures and propagate"""
    started = time.perf_counter()
    success = False
    try:
        yield
        success = True
    finally:
        record_stage_execution(stage_name, success, (time.perf_counter() - started) * 1000.0)
