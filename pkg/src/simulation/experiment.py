"""Monte-Carlo experiments: design or load a spectrum, then simulate and estimate every trial

Trials run on worker threads with per-trial seed streams and are folded back in trial-index
order; files are written one after another, so outputs depend only on (config, seed).
"""
import asyncio
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from pydantic import BaseModel
from returns.result import Failure, Result, Success

from src.config import ExperimentConfig
from src.errors import DesignError, SceneError, SparseSpecError, SpectrumError
from src.estimation.bayes import (
    DiagonalPrior,
    Measurement,
    NoiseModel,
    PosteriorSummary,
    matched_filter,
    mmse_estimate,
)
from src.estimation.estimators import EstimatorOutput, estimator_by_name
from src.estimation.rrmmse import EstimationResult, complexity_model, run_rrmmse
from src.metrics import timed_stage
from src.simulation.outputs import (
    CONVERGENCE_FIELDS,
    TIMING_FIELDS,
    TRIAL_FIELDS,
    convergence_rows,
    csv_text,
    emit_profile_table,
    emit_snapshot_table,
    interleave,
    json_text,
    read_json,
    support_from_dict,
    write_text,
)
from src.simulation.scene import (
    NOISE_STREAM,
    SCENE_STREAM,
    Scene,
    SceneConfig,
    derive_seed,
    generate_scene,
    simulate_measurement,
)
from src.simulation.scoring import (
    mse_from_posterior,
    mse_ground_truth,
    summarize,
    support_metrics,
    to_db,
)
from src.spectrum.designer import BlockPartition, MfiReport, design_spectrum, occupancy
from src.spectrum.grid import (
    FrequencyGrid,
    RangeGrid,
    SensingMatrix,
    SpectrumSupport,
    build_sensing_matrix,
    compute_coarray,
    gram_offdiag_stats,
)
from src.types import ComplexityEstimate, GramStats, MetricSummary, RunFailure, TerminationReason

logger = logging.getLogger(__name__)

SUMMARY_FIELDS = [
    "experiment",
    "occupancy",
    "target_occupancy",
    "trials",
    "preserved_count",
    "rank",
    "mse_gt_mean",
    "mse_gt_std",
    "mse_gt_db",
    "mse_ke_mean",
    "mse_ke_db",
    "mse_gt_matched_db",
    "iterations_mean",
    "plateau_fraction",
    "precision_mean",
    "recall_mean",
    "max_offdiag",
    "integrated_sidelobe",
    "coarray_holes",
]


class TrialRecord(BaseModel, frozen=True):
    trial: int
    scene_seed: int
    noise_seed: int
    scatterers: int
    iterations: int
    termination_reason: TerminationReason
    mse_ke: float
    mse_gt: float
    mse_ke_one_step: float | None = None
    mse_gt_one_step: float | None = None
    mse_gt_matched: float
    precision: float
    recall: float
    precision_defined: bool = True
    recall_defined: bool = True
    noise_variance: float
    warnings: tuple[str, ...] = ()
    wall_time: float = 0.0


class ExperimentRecord(BaseModel, frozen=True):
    config: ExperimentConfig
    occupancy: float  # requested spectral occupancy
    realized_occupancy: float
    target_occupancy: float  # ρ
    line_count: int
    preserved_count: int
    bin_count: int
    rank: int
    gram: GramStats
    coarray_holes: int
    trials: tuple[TrialRecord, ...]
    aggregates: dict[str, MetricSummary]
    plateau_fraction: float
    complexity: ComplexityEstimate

    @property
    def converged(self) -> bool:
        return self.plateau_fraction == 1.0


@dataclass(frozen=True, eq=False)
class SpectrumPlan:
    grid: FrequencyGrid
    ranges: RangeGrid
    support: SpectrumSupport
    report: MfiReport | None  # None when loaded from a file
    h: SensingMatrix


@dataclass(frozen=True, eq=False)
class TrialOutcome:
    record: TrialRecord
    scene: Scene
    matched: np.ndarray
    result: EstimationResult


def failure_from_exception(error: Exception) -> RunFailure:
    if isinstance(error, OSError):
        return RunFailure(kind="io", message=str(error))
    if isinstance(error, (DesignError, SceneError, SpectrumError)):
        return RunFailure(kind="config", message=str(error))
    if isinstance(error, (SparseSpecError, np.linalg.LinAlgError)):
        return RunFailure(kind="numerical", message=str(error))
    if isinstance(error, ValueError):
        return RunFailure(kind="config", message=str(error))
    return RunFailure(kind="numerical", message=f"{type(error).__name__}: {error}")


def scene_config(cfg: ExperimentConfig, target_occupancy: float, seed: int) -> SceneConfig:
    eligible = cfg.scene.eligible_bins
    return SceneConfig(
        target_occupancy=target_occupancy,
        magnitude_range=cfg.scene.magnitude_range,
        magnitude_convention=cfg.scene.magnitude_convention,
        rng_seed=seed,
        eligible_bins=None if eligible is None else tuple(b - 1 for b in eligible),
    )


def design_for_config(
    cfg: ExperimentConfig, target: float
) -> tuple[SpectrumSupport, MfiReport]:
    grid = cfg.geometry.frequency_grid()
    ranges = cfg.geometry.range_grid()
    partition = (
        BlockPartition(line_count=grid.line_count, block_size=cfg.spectrum.block_size)
        if cfg.spectrum.block_size is not None
        else BlockPartition.default(grid.line_count)
    )
    prior = DiagonalPrior.uniform(ranges.bin_count, cfg.design_prior_variance)
    noise = NoiseModel(variance=cfg.spectrum.design_noise_variance)
    with timed_stage("design"):
        return design_spectrum(
            grid,
            ranges,
            partition,
            target,
            prior,
            noise,
            method=cfg.spectrum.design_method,
            normalization=cfg.spectrum.design_normalization,
        )


async def prepare_spectrum(
    cfg: ExperimentConfig, target: float | None = None
) -> Result[SpectrumPlan, RunFailure]:
    """Load the configured support file or design one at the requested occupancy"""
    target = cfg.spectrum.occupancy if target is None else target
    try:
        grid = cfg.geometry.frequency_grid()
        ranges = cfg.geometry.range_grid()
    except (SparseSpecError, ValueError) as e:
        return Failure(RunFailure(kind="config", message=str(e)))

    report: MfiReport | None = None
    if cfg.spectrum.support_file is not None:
        loaded = await read_json(Path(cfg.spectrum.support_file))
        if isinstance(loaded, Failure):
            return Failure(RunFailure(kind="io", message=loaded.failure()))
        try:
            support = support_from_dict(loaded.unwrap())
        except (KeyError, TypeError, ValueError) as e:
            return Failure(RunFailure(kind="config", message=f"Invalid support file: {e}"))
        if support.n != grid.line_count:
            return Failure(
                RunFailure(
                    kind="config",
                    message=f"support file spans {support.n} lines, grid has {grid.line_count}",
                )
            )
    else:
        try:
            support, report = await asyncio.to_thread(design_for_config, cfg, target)
        except (SparseSpecError, np.linalg.LinAlgError, ValueError) as e:
            return Failure(failure_from_exception(e))

    try:
        h = build_sensing_matrix(support, grid, ranges)
    except SparseSpecError as e:
        return Failure(failure_from_exception(e))
    return Success(SpectrumPlan(grid=grid, ranges=ranges, support=support, report=report, h=h))


def run_trial(
    cfg: ExperimentConfig, plan: SpectrumPlan, target_occupancy: float, trial: int
) -> TrialOutcome:
    started = time.perf_counter()
    scene_seed = derive_seed(cfg.rng_seed, trial, SCENE_STREAM)
    noise_seed = derive_seed(cfg.rng_seed, trial, NOISE_STREAM)

    with timed_stage("simulate"):
        scene = generate_scene(scene_config(cfg, target_occupancy, scene_seed), plan.ranges)
        v, noise = simulate_measurement(
            plan.h, scene, cfg.noise.snr_db, noise_seed, cfg.noise.noise_floor
        )

    with timed_stage("estimate"):
        matched = matched_filter(plan.h, v)
        one_step: PosteriorSummary | None = None
        if plan.ranges.bin_count <= cfg.estimator.one_step_max_bins:
            prior = DiagonalPrior.uniform(plan.ranges.bin_count, cfg.estimator.prior_variance)
            one_step = mmse_estimate(plan.h, prior, noise, v, cfg.estimator.condition_cap)
        result = run_rrmmse(plan.h, v, noise, cfg.estimator.rrmmse())

    metrics = support_metrics(
        scene.true_support,
        result.support.indices,
        scene.reflectivity,
        cfg.scene.detection_floor_db,
        cfg.scene.magnitude_convention,
    )
    record = TrialRecord(
        trial=trial,
        scene_seed=scene_seed,
        noise_seed=noise_seed,
        scatterers=scene.scatterer_count,
        iterations=result.iterations,
        termination_reason=result.termination_reason,
        mse_ke=mse_from_posterior(result.posterior_variance_diag),
        mse_gt=mse_ground_truth(scene.reflectivity, result.estimate),
        mse_ke_one_step=(
            mse_from_posterior(one_step.error_variance_diag) if one_step is not None else None
        ),
        mse_gt_one_step=(
            mse_ground_truth(scene.reflectivity, one_step.estimate)
            if one_step is not None
            else None
        ),
        mse_gt_matched=mse_ground_truth(scene.reflectivity, matched),
        precision=metrics.precision,
        recall=metrics.recall,
        precision_defined=metrics.precision_defined,
        recall_defined=metrics.recall_defined,
        noise_variance=noise.variance,
        warnings=result.warnings,
        wall_time=time.perf_counter() - started,
    )
    return TrialOutcome(record=record, scene=scene, matched=matched, result=result)


async def run_trials(
    cfg: ExperimentConfig, plan: SpectrumPlan, target_occupancy: float
) -> list[TrialOutcome]:
    semaphore = asyncio.Semaphore(cfg.workers)

    async def one(trial: int) -> TrialOutcome:
        async with semaphore:
            return await asyncio.to_thread(run_trial, cfg, plan, target_occupancy, trial)

    outcomes = await asyncio.gather(*(one(t) for t in range(cfg.trials)))
    return sorted(outcomes, key=lambda o: o.record.trial)


def aggregate_trials(records: Sequence[TrialRecord]) -> dict[str, MetricSummary]:
    columns: dict[str, list[float]] = {
        "mse_ke": [r.mse_ke for r in records],
        "mse_gt": [r.mse_gt for r in records],
        "mse_gt_matched": [r.mse_gt_matched for r in records],
        "iterations": [float(r.iterations) for r in records],
        "precision": [r.precision for r in records],
        "recall": [r.recall for r in records],
    }
    one_step_ke = [r.mse_ke_one_step for r in records if r.mse_ke_one_step is not None]
    one_step_gt = [r.mse_gt_one_step for r in records if r.mse_gt_one_step is not None]
    if one_step_ke:
        columns["mse_ke_one_step"] = one_step_ke
        columns["mse_gt_one_step"] = one_step_gt
    return {name: summarize(values) for name, values in columns.items()}


def build_record(
    cfg: ExperimentConfig,
    plan: SpectrumPlan,
    requested_occupancy: float,
    target_occupancy: float,
    outcomes: Sequence[TrialOutcome],
) -> ExperimentRecord:
    records = tuple(o.record for o in outcomes)
    aggregates = aggregate_trials(records)
    plateau = sum(r.termination_reason == "plateau" for r in records) / len(records)
    g = max(1, round(aggregates["iterations"].mean))
    return ExperimentRecord(
        config=cfg,
        occupancy=requested_occupancy,
        realized_occupancy=occupancy(plan.support),
        target_occupancy=target_occupancy,
        line_count=plan.grid.line_count,
        preserved_count=plan.support.preserved_count,
        bin_count=plan.ranges.bin_count,
        rank=int(np.linalg.matrix_rank(plan.h.entries)),
        gram=gram_offdiag_stats(plan.h),
        coarray_holes=len(compute_coarray(plan.support).holes_within_span),
        trials=records,
        aggregates=aggregates,
        plateau_fraction=plateau,
        complexity=complexity_model(g, plan.ranges.bin_count, plan.support.preserved_count),
    )


def record_json(record: ExperimentRecord) -> dict[str, Any]:
    if record.config.outputs.include_timing:
        return record.model_dump(mode="json")
    return record.model_dump(mode="json", exclude={"trials": {"__all__": {"wall_time"}}})


def trial_rows(record: ExperimentRecord) -> tuple[list[str], list[dict[str, Any]]]:
    fields = list(TRIAL_FIELDS)
    timing = record.config.outputs.include_timing
    if timing:
        fields += TIMING_FIELDS
    rows = []
    for trial in record.trials:
        row = trial.model_dump()
        if timing:
            estimate = complexity_model(
                max(1, trial.iterations), record.bin_count, record.preserved_count
            )
            row.update(
                complexity_full=estimate.full, complexity_dominant=estimate.dominant
            )
        rows.append(row)
    return fields, rows


def support_json(plan: SpectrumPlan) -> dict[str, Any]:
    return plan.support.model_dump(mode="json")


async def write_experiment(
    directory: Path,
    plan: SpectrumPlan,
    record: ExperimentRecord,
    outcomes: Sequence[TrialOutcome],
) -> Result[Path, RunFailure]:
    fields, rows = trial_rows(record)
    convergence = [
        row for o in outcomes for row in convergence_rows(o.record.trial, o.scene, o.result)
    ]
    writes: list[tuple[str, str]] = [("support.json", json_text(support_json(plan)))]
    if plan.report is not None:
        writes.append(("mfi_report.json", json_text(plan.report.model_dump(mode="json"))))
    writes += [
        ("record.json", json_text(record_json(record))),
        ("trials.csv", csv_text(fields, rows)),
        ("convergence.csv", csv_text(CONVERGENCE_FIELDS, convergence)),
    ]
    for name, text in writes:
        written = await write_text(directory / name, text)
        if isinstance(written, Failure):
            return Failure(RunFailure(kind="io", message=written.failure()))

    first = outcomes[0]
    for emitted in (
        await emit_profile_table(
            first.scene, plan.ranges, first.matched, first.result, directory / "profile.csv"
        ),
        await emit_snapshot_table(
            first.scene, plan.ranges, first.result, directory / "snapshots.csv"
        ),
    ):
        if isinstance(emitted, Failure):
            return Failure(RunFailure(kind="io", message=emitted.failure()))
    return Success(directory)


async def run_experiment_async(
    cfg: ExperimentConfig,
    spectral_occupancy: float | None = None,
    target_occupancy: float | None = None,
    output_dir: Path | None = None,
    plan: SpectrumPlan | None = None,
) -> Result[ExperimentRecord, RunFailure]:
    requested = cfg.spectrum.occupancy if spectral_occupancy is None else spectral_occupancy
    rho = cfg.scene.target_occupancy if target_occupancy is None else target_occupancy

    if plan is None:
        prepared = await prepare_spectrum(cfg, requested)
        if isinstance(prepared, Failure):
            return prepared
        plan = prepared.unwrap()

    try:
        outcomes = await run_trials(cfg, plan, rho)
        record = build_record(cfg, plan, requested, rho, outcomes)
    except (SparseSpecError, np.linalg.LinAlgError) as e:
        return Failure(failure_from_exception(e))

    logger.info(
        "occupancy %.3g, ρ %.3g: mean MSE_GT %.4g over %d trials, plateau fraction %.2f",
        requested, rho, record.aggregates["mse_gt"].mean, cfg.trials, record.plateau_fraction,
    )
    if output_dir is not None:
        written = await write_experiment(output_dir, plan, record, outcomes)
        if isinstance(written, Failure):
            return written
    return Success(record)


def run_experiment(
    cfg: ExperimentConfig, output_dir: Path | None = None
) -> Result[ExperimentRecord, RunFailure]:
    return asyncio.run(run_experiment_async(cfg, output_dir=output_dir))


def experiment_name(spectral_occupancy: float, target_occupancy: float) -> str:
    return f"occupancy_{spectral_occupancy:g}_rho_{target_occupancy:g}"


def summary_row(name: str, record: ExperimentRecord) -> dict[str, Any]:
    agg = record.aggregates
    return {
        "experiment": name,
        "occupancy": record.occupancy,
        "target_occupancy": record.target_occupancy,
        "trials": len(record.trials),
        "preserved_count": record.preserved_count,
        "rank": record.rank,
        "mse_gt_mean": agg["mse_gt"].mean,
        "mse_gt_std": agg["mse_gt"].std,
        "mse_gt_db": to_db(agg["mse_gt"].mean),
        "mse_ke_mean": agg["mse_ke"].mean,
        "mse_ke_db": to_db(agg["mse_ke"].mean),
        "mse_gt_matched_db": to_db(agg["mse_gt_matched"].mean),
        "iterations_mean": agg["iterations"].mean,
        "plateau_fraction": record.plateau_fraction,
        "precision_mean": agg["precision"].mean,
        "recall_mean": agg["recall"].mean,
        "max_offdiag": record.gram.max_offdiag,
        "integrated_sidelobe": record.gram.integrated_sidelobe,
        "coarray_holes": record.coarray_holes,
    }


async def sweep_async(cfg: ExperimentConfig) -> Result[list[ExperimentRecord], RunFailure]:
    """Occupancy × ρ grid; one design per occupancy shared by every ρ"""
    root = Path(cfg.outputs.directory)
    records: list[ExperimentRecord] = []
    rows: list[dict[str, Any]] = []
    for spectral in cfg.sweep.occupancies:
        prepared = await prepare_spectrum(cfg, spectral)
        if isinstance(prepared, Failure):
            return Failure(prepared.failure())
        plan = prepared.unwrap()
        for rho in cfg.sweep.target_occupancies:
            name = experiment_name(spectral, rho)
            result = await run_experiment_async(cfg, spectral, rho, root / name, plan)
            if isinstance(result, Failure):
                return Failure(result.failure())
            record = result.unwrap()
            records.append(record)
            rows.append(summary_row(name, record))

    written = await write_text(root / "sweep_summary.csv", csv_text(SUMMARY_FIELDS, rows))
    if isinstance(written, Failure):
        return Failure(RunFailure(kind="io", message=written.failure()))
    return Success(records)


def sweep(cfg: ExperimentConfig) -> Result[list[ExperimentRecord], RunFailure]:
    return asyncio.run(sweep_async(cfg))


async def aggregate_reports(directory: Path) -> Result[Path, RunFailure]:
    """Collect every record.json below `directory` into report.csv"""
    if not directory.is_dir():
        return Failure(RunFailure(kind="io", message=f"Not a directory: {directory}"))
    rows: list[dict[str, Any]] = []
    for path in sorted(directory.rglob("record.json")):
        loaded = await read_json(path)
        if isinstance(loaded, Failure):
            return Failure(RunFailure(kind="io", message=loaded.failure()))
        try:
            record = ExperimentRecord.model_validate(loaded.unwrap())
        except ValueError as e:
            return Failure(RunFailure(kind="config", message=f"Invalid record {path}: {e}"))
        rows.append(summary_row(path.parent.relative_to(directory).as_posix(), record))
    if not rows:
        return Failure(RunFailure(kind="io", message=f"No record.json found under {directory}"))

    target = directory / "report.csv"
    written = await write_text(target, csv_text(SUMMARY_FIELDS, rows))
    if isinstance(written, Failure):
        return Failure(RunFailure(kind="io", message=written.failure()))
    return Success(target)


def measurement_json(v: Measurement, noise: NoiseModel) -> dict[str, Any]:
    return {"values": interleave(v.values), "noise_variance": noise.variance}


def measurement_from_json(data: dict[str, Any]) -> tuple[Measurement, NoiseModel]:
    values = np.asarray(data["values"], dtype=float)
    if values.size % 2:
        raise ValueError("interleaved measurement needs an even number of values")
    return (
        Measurement(values=values[0::2] + 1j * values[1::2]),
        NoiseModel(variance=float(data["noise_variance"])),
    )


async def simulate_async(
    cfg: ExperimentConfig, directory: Path
) -> Result[tuple[Scene, Measurement, NoiseModel], RunFailure]:
    """Trial-0 scene and measurement on the configured spectrum, written as scene.json"""
    prepared = await prepare_spectrum(cfg)
    if isinstance(prepared, Failure):
        return Failure(prepared.failure())
    plan = prepared.unwrap()
    scene_seed = derive_seed(cfg.rng_seed, 0, SCENE_STREAM)
    noise_seed = derive_seed(cfg.rng_seed, 0, NOISE_STREAM)
    try:
        with timed_stage("simulate"):
            scene = generate_scene(
                scene_config(cfg, cfg.scene.target_occupancy, scene_seed), plan.ranges
            )
            v, noise = simulate_measurement(
                plan.h, scene, cfg.noise.snr_db, noise_seed, cfg.noise.noise_floor
            )
    except SparseSpecError as e:
        return Failure(failure_from_exception(e))

    payload = {
        "scene_seed": scene_seed,
        "noise_seed": noise_seed,
        "snr_db": cfg.noise.snr_db,
        "scene": scene.to_dict(),
        "measurement": measurement_json(v, noise),
    }
    writes = [("support.json", json_text(support_json(plan))), ("scene.json", json_text(payload))]
    if plan.report is not None:
        writes.append(("mfi_report.json", json_text(plan.report.model_dump(mode="json"))))
    for name, text in writes:
        written = await write_text(directory / name, text)
        if isinstance(written, Failure):
            return Failure(RunFailure(kind="io", message=written.failure()))
    return Success((scene, v, noise))


async def estimate_async(
    cfg: ExperimentConfig, estimator_name: str, input_dir: Path, output_dir: Path
) -> Result[EstimatorOutput, RunFailure]:
    """Run one estimator on the support.json and scene.json found in `input_dir`"""
    support_data = await read_json(input_dir / "support.json")
    scene_data = await read_json(input_dir / "scene.json")
    for loaded in (support_data, scene_data):
        if isinstance(loaded, Failure):
            return Failure(RunFailure(kind="io", message=loaded.failure()))
    try:
        support = support_from_dict(support_data.unwrap())
        payload = scene_data.unwrap()
        scene = Scene.from_dict(payload["scene"])
        v, noise = measurement_from_json(payload["measurement"])
        ranges = cfg.geometry.range_grid()
        h = build_sensing_matrix(support, cfg.geometry.frequency_grid(), ranges)
    except (KeyError, TypeError, ValueError, SparseSpecError) as e:
        return Failure(RunFailure(kind="config", message=f"Invalid estimation inputs: {e}"))

    selected = estimator_by_name(estimator_name, cfg.estimator.rrmmse())
    if isinstance(selected, Failure):
        return Failure(RunFailure(kind="config", message=selected.failure()))
    with timed_stage("estimate"):
        executed = await asyncio.to_thread(selected.unwrap().execute, h, v, noise)
    if isinstance(executed, Failure):
        return Failure(RunFailure(kind="numerical", message=executed.failure()))
    output = executed.unwrap()

    data: dict[str, Any] = {
        "estimator": output.name,
        "estimate": interleave(output.estimate),
        "mse_gt": mse_ground_truth(scene.reflectivity, output.estimate),
    }
    if output.posterior_variance_diag is not None:
        data["mse_ke"] = mse_from_posterior(output.posterior_variance_diag)
    if output.result is not None:
        data["rrmmse"] = output.result.to_dict()

    written = await write_text(output_dir / "estimate.json", json_text(data))
    if isinstance(written, Failure):
        return Failure(RunFailure(kind="io", message=written.failure()))
    if output.result is not None:
        emitted = await emit_profile_table(
            scene, ranges, matched_filter(h, v), output.result, output_dir / "profile.csv"
        )
        if isinstance(emitted, Failure):
            return Failure(RunFailure(kind="io", message=emitted.failure()))
    return Success(output)
