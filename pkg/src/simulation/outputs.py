"""CSV/JSON rendering and serialized asynchronous writes of experiment artifacts

Floats go to CSV with 17 significant digits; JSON uses Python's round-trip float repr.
Renderers are pure so identical inputs give byte-identical files.
"""
import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import aiofiles
import numpy as np
from returns.result import Failure, Result, Success

from src.estimation.rrmmse import EstimationResult
from src.simulation.scene import Scene
from src.simulation.scoring import mse_ground_truth
from src.spectrum.grid import RangeGrid, SpectrumSupport

TRIAL_FIELDS = [
    "trial",
    "scene_seed",
    "noise_seed",
    "scatterers",
    "iterations",
    "termination_reason",
    "mse_ke",
    "mse_gt",
    "mse_ke_one_step",
    "mse_gt_one_step",
    "mse_gt_matched",
    "precision",
    "recall",
    "precision_defined",
    "recall_defined",
    "noise_variance",
]
TIMING_FIELDS = ["wall_time", "complexity_full", "complexity_dominant"]
CONVERGENCE_FIELDS = [
    "trial", "iteration", "chosen_bin", "magnitude", "mse_ke", "expected_error", "mse_gt"
]
PROFILE_FIELDS = [
    "bin",
    "delay",
    "true_db",
    "matched_db",
    "rrmmse_db",
    "posterior_variance",
    "in_support",
]


def format_float(value: float) -> str:
    """17 significant digits; -inf (the 0 dB-power sentinel) becomes an empty cell"""
    if value == -math.inf:
        return ""
    return format(float(value), ".17g")


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    return str(value)


def csv_text(fieldnames: Sequence[str], rows: Iterable[dict[str, Any]]) -> str:
    buf = io.StringIO(newline="")
    w = csv.DictWriter(
        buf, fieldnames=list(fieldnames), extrasaction="ignore", lineterminator="\n"
    )
    w.writeheader()
    for row in rows:
        w.writerow({k: _cell(row.get(k)) for k in fieldnames})
    return buf.getvalue()


def json_text(data: Any) -> str:
    return json.dumps(data, indent=2) + "\n"


def interleave(values: np.ndarray) -> list[float]:
    """[re0, im0, re1, im1, ...]"""
    return [float(x) for x in np.column_stack([values.real, values.imag]).ravel()]


def power_db(values: np.ndarray) -> np.ndarray:
    """10·log10|x|², -inf where x = 0"""
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.abs(values) ** 2)


async def write_text(path: Path, text: str) -> Result[Path, str]:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        async with aiofiles.open(path, "w", encoding="utf-8", newline="") as f:
            await f.write(text)
        return Success(path)
    except OSError as e:
        return Failure(f"Cannot write {path}: {e}")


async def read_json(path: Path) -> Result[Any, str]:
    try:
        async with aiofiles.open(path, "r", encoding="utf-8") as f:
            return Success(json.loads(await f.read()))
    except FileNotFoundError:
        return Failure(f"File not found: {path}")
    except json.JSONDecodeError as e:
        return Failure(f"Invalid JSON in {path}: {e}")
    except OSError as e:
        return Failure(f"Cannot read {path}: {e}")


def support_from_dict(data: dict[str, Any]) -> SpectrumSupport:
    return SpectrumSupport(n=int(data["n"]), preserved=tuple(int(i) for i in data["preserved"]))


def profile_rows(
    scene: Scene,
    ranges: RangeGrid,
    matched: np.ndarray,
    result: EstimationResult,
) -> list[dict[str, Any]]:
    truth = power_db(scene.reflectivity)
    mf = power_db(matched)
    est = power_db(result.estimate)
    delays = ranges.delays
    in_support = set(result.support.indices)
    return [
        {
            "bin": m + 1,
            "delay": float(delays[m]),
            "true_db": float(truth[m]),
            "matched_db": float(mf[m]),
            "rrmmse_db": float(est[m]),
            "posterior_variance": float(result.posterior_variance_diag[m]),
            "in_support": m in in_support,
        }
        for m in range(ranges.bin_count)
    ]


def snapshot_iterations(iterations: int) -> list[int]:
    """First, middle and last iteration (1-based), deduplicated"""
    if iterations == 0:
        return []
    return sorted({1, (iterations + 1) // 2, iterations})


def snapshot_rows(
    scene: Scene, ranges: RangeGrid, result: EstimationResult
) -> tuple[list[str], list[dict[str, Any]]]:
    picks = snapshot_iterations(len(result.snapshots))
    fields = ["bin", "delay", "true_db"] + [f"iter_{i}_db" for i in picks]
    levels = {i: power_db(result.snapshots[i - 1]) for i in picks}
    truth = power_db(scene.reflectivity)
    delays = ranges.delays
    rows = []
    for m in range(ranges.bin_count):
        row: dict[str, Any] = {
            "bin": m + 1, "delay": float(delays[m]), "true_db": float(truth[m])
        }
        for i in picks:
            row[f"iter_{i}_db"] = float(levels[i][m])
        rows.append(row)
    return fields, rows


def convergence_rows(trial: int, scene: Scene, result: EstimationResult) -> list[dict[str, Any]]:
    """Iteration 0 is the flat-prior one-step MMSE"""
    rows: list[dict[str, Any]] = []
    if result.initial_estimate is not None:
        rows.append(
            {
                "trial": trial,
                "iteration": 0,
                "chosen_bin": None,
                "magnitude": None,
                "mse_ke": result.initial_trace,
                "expected_error": result.initial_error,
                "mse_gt": mse_ground_truth(scene.reflectivity, result.initial_estimate),
            }
        )
    for record in result.trace_history.records:
        snapshot = (
            result.snapshots[record.iteration - 1]
            if record.iteration <= len(result.snapshots)
            else None
        )
        rows.append(
            {
                "trial": trial,
                "iteration": record.iteration,
                "chosen_bin": record.chosen_index + 1,
                "magnitude": record.magnitude,
                "mse_ke": record.trace_over_m,
                "expected_error": record.expected_error,
                "mse_gt": (
                    mse_ground_truth(scene.reflectivity, snapshot) if snapshot is not None else None
                ),
            }
        )
    return rows


async def emit_profile_table(
    scene: Scene,
    ranges: RangeGrid,
    matched: np.ndarray,
    result: EstimationResult,
    path: Path,
) -> Result[Path, str]:
    rows = profile_rows(scene, ranges, matched, result)
    return await write_text(path, csv_text(PROFILE_FIELDS, rows))


async def emit_snapshot_table(
    scene: Scene, ranges: RangeGrid, result: EstimationResult, path: Path
) -> Result[Path, str]:
    fields, rows = snapshot_rows(scene, ranges, result)
    return await write_text(path, csv_text(fields, rows))
