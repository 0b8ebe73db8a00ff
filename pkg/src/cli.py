#!/usr/bin/env python3
"""sparsespec CLI - sparse spectrum design and RRMMSE range-profile recovery"""

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import NoReturn

from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table
from returns.result import Failure, Result, Success

from src.config import (
    ExperimentConfig,
    find_config_file,
    format_validation_error,
    load_experiment_config,
)
from src.metrics import get_run_metrics, reset_run_metrics
from src.simulation.experiment import (
    ExperimentRecord,
    SpectrumPlan,
    aggregate_reports,
    estimate_async,
    experiment_name,
    prepare_spectrum,
    simulate_async,
    summary_row,
    support_json,
    sweep_async,
)
from src.simulation.outputs import json_text, write_text
from src.spectrum.grid import compute_coarray, gram_offdiag_stats
from src.types import RunFailure

console = Console()


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


class CliArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with 1, the config-error code"""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command line arguments"""
    common = CliArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="Path to sparsespec.json")
    common.add_argument("--seed", type=int, help="Override rng_seed (unsigned 64-bit)")
    common.add_argument("--out", type=str, help="Output directory (overrides outputs.directory)")
    common.add_argument(
        "--paper-scale",
        "--full-scale",
        dest="paper_scale",
        action="store_true",
        help="N = 4000 lines, M = 401 bins",
    )
    common.add_argument(
        "--estimator", choices=["mf", "mmse", "rrmmse"], help="Estimator for `estimate`"
    )
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    parser = CliArgumentParser(
        prog="sparsespec",
        description="sparsespec - sparse spectrum design and range-profile recovery",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Quick Start:
  sparsespec design --out results/design    # MFI block-removal design
  sparsespec simulate --out results/run     # scene + measurement on that spectrum
  sparsespec estimate --out results/run     # RRMMSE on the simulated measurement
  sparsespec sweep --config sparsespec.json # Monte-Carlo grid over occupancy x rho
  sparsespec report --out results           # collect record.json files into report.csv
        """,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("design", parents=[common], help="Design a sparse spectrum")
    sub.add_parser("simulate", parents=[common], help="Simulate one scene and measurement")
    estimate = sub.add_parser("estimate", parents=[common], help="Run one estimator")
    estimate.add_argument("--input", type=str, help="Directory holding scene.json/support.json")
    sub.add_parser("sweep", parents=[common], help="Monte-Carlo sweep over occupancy x rho")
    sub.add_parser("report", parents=[common], help="Aggregate record.json files")
    return parser.parse_args(argv)


def resolve_config(args: argparse.Namespace) -> Result[ExperimentConfig, str]:
    if args.config is None and find_config_file() is None:
        console.print("[dim]No sparsespec.json found; using desk-scale defaults.[/]")
        cfg = ExperimentConfig()
    else:
        loaded = load_experiment_config(args.config)
        if isinstance(loaded, Failure):
            return loaded
        cfg = loaded.unwrap()
    if args.paper_scale:
        cfg = cfg.paper_scale()
    try:
        return Success(cfg.with_overrides(seed=args.seed, output_dir=args.out))
    except ValidationError as e:
        return Failure(format_validation_error(e))


def show_failure(failure: RunFailure) -> int:
    console.print(
        Panel(
            f"[red]{failure.message}[/red]",
            title=f"[bold red]{failure.kind} error[/bold red]",
            border_style="red",
        )
    )
    return failure.exit_code


def show_design(plan: SpectrumPlan) -> None:
    stats = gram_offdiag_stats(plan.h)
    coarray = compute_coarray(plan.support)
    table = Table(show_header=False, box=None)
    table.add_column("metric", style="dim")
    table.add_column("value", style="cyan")
    table.add_row("Lines (K/N):", f"{plan.support.preserved_count}/{plan.support.n}")
    table.add_row("Range bins (M):", str(plan.ranges.bin_count))
    if plan.report is not None:
        table.add_row("Blocks removed:", str(len(plan.report.removal_order)))
        table.add_row("Tr(K_ε)/M:", f"{plan.report.trace_history[-1]:.6g}")
    table.add_row("Max off-diagonal:", f"{stats.max_offdiag:.4f}")
    table.add_row("Integrated sidelobe:", f"{stats.integrated_sidelobe:.4g}")
    table.add_row("Coarray span:", str(coarray.span))
    table.add_row("Holes within span:", str(len(coarray.holes_within_span)))
    if coarray.redundancy.size:
        table.add_row("Peak redundancy:", str(int(coarray.redundancy.max())))
    console.print(Panel(table, title="[bold green]Spectrum design[/bold green]"))


def show_sweep(records: list[ExperimentRecord]) -> None:
    table = Table(title="Sweep summary")
    for column in ("occupancy", "ρ", "trials", "MSE_GT dB", "MSE_Ke dB", "iters", "plateau"):
        table.add_column(column, justify="right")
    for record in records:
        row = summary_row(experiment_name(record.occupancy, record.target_occupancy), record)
        plateau = f"{row['plateau_fraction']:.2f}"
        table.add_row(
            f"{record.occupancy:g}",
            f"{record.target_occupancy:g}",
            str(row["trials"]),
            f"{row['mse_gt_db']:.2f}",
            f"{row['mse_ke_db']:.2f}",
            f"{row['iterations_mean']:.1f}",
            f"[green]{plateau}[/]" if record.converged else plateau,
        )
    console.print(table)


def show_metrics() -> None:
    stages = get_run_metrics().snapshot()
    if not stages:
        return
    elapsed = get_run_metrics().elapsed.total_seconds()
    table = Table(title=f"Stages ({elapsed:.1f} s)", box=None)
    table.add_column("stage", style="dim")
    table.add_column("calls", justify="right")
    table.add_column("success", justify="right")
    table.add_column("ms/call", justify="right", style="cyan")
    for stage in stages:
        table.add_row(
            stage.stage_name,
            str(stage.call_count),
            f"{stage.success_rate:.0f}%",
            f"{stage.mean_time_ms:.2f}",
        )
    console.print(table)


async def command_design(cfg: ExperimentConfig, out: Path) -> int:
    prepared = await prepare_spectrum(cfg)
    if isinstance(prepared, Failure):
        return show_failure(prepared.failure())
    plan = prepared.unwrap()
    show_design(plan)

    writes = [("support.json", json_text(support_json(plan)))]
    if plan.report is not None:
        writes.append(("mfi_report.json", json_text(plan.report.model_dump(mode="json"))))
    for name, text in writes:
        written = await write_text(out / name, text)
        if isinstance(written, Failure):
            return show_failure(RunFailure(kind="io", message=written.failure()))
    console.print(f"[green]✓ Wrote design to {out}[/green]")
    return 0


async def command_simulate(cfg: ExperimentConfig, out: Path) -> int:
    simulated = await simulate_async(cfg, out)
    if isinstance(simulated, Failure):
        return show_failure(simulated.failure())
    scene, v, noise = simulated.unwrap()
    console.print(
        f"[green]✓ {scene.scatterer_count} scatterers, {len(v)} samples, "
        f"σ_n² = {noise.variance:.4g} → {out / 'scene.json'}[/green]"
    )
    return 0


async def command_estimate(
    cfg: ExperimentConfig, estimator: str, input_dir: Path, out: Path
) -> int:
    estimated = await estimate_async(cfg, estimator, input_dir, out)
    if isinstance(estimated, Failure):
        return show_failure(estimated.failure())
    output = estimated.unwrap()
    message = f"[green]✓ {output.name} estimate → {out / 'estimate.json'}[/green]"
    if output.result is not None:
        message += (
            f"\n[dim]{output.result.iterations} iterations, "
            f"{output.result.termination_reason}, support size {len(output.result.support)}[/]"
        )
    console.print(message)
    return 0


async def command_sweep(cfg: ExperimentConfig) -> int:
    swept = await sweep_async(cfg)
    if isinstance(swept, Failure):
        return show_failure(swept.failure())
    show_sweep(swept.unwrap())
    console.print(f"[green]✓ Wrote sweep to {cfg.outputs.directory}[/green]")
    return 0


async def command_report(out: Path) -> int:
    reported = await aggregate_reports(out)
    if isinstance(reported, Failure):
        return show_failure(reported.failure())
    console.print(f"[green]✓ Wrote {reported.unwrap()}[/green]")
    return 0


async def run_async(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    configure_logging(args.verbose)
    reset_run_metrics()

    resolved = resolve_config(args)
    if isinstance(resolved, Failure):
        return show_failure(RunFailure(kind="config", message=resolved.failure()))
    cfg = resolved.unwrap()
    out = Path(cfg.outputs.directory)

    if args.command == "design":
        code = await command_design(cfg, out)
    elif args.command == "simulate":
        code = await command_simulate(cfg, out)
    elif args.command == "estimate":
        input_dir = Path(args.input) if args.input else out
        code = await command_estimate(cfg, args.estimator or cfg.estimator.name, input_dir, out)
    elif args.command == "sweep":
        code = await command_sweep(cfg)
    else:
        code = await command_report(out)

    if args.verbose:
        show_metrics()
    return code


def run():
    """Entry point for sparsespec CLI - wraps the async run function"""
    try:
        exit_code = asyncio.run(run_async())
        sys.exit(exit_code or 0)
    except KeyboardInterrupt:
        console.print("\n[yellow]Interrupted.[/]")
        sys.exit(130)


if __name__ == "__main__":
    run()
