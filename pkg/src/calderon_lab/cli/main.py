"""Command-line front end.

Exit codes: 0 when every property check passes, 1 when a check fails,
2 for config, file or fit errors, 3 for numerical failures, 4 for any
other exception (logged with its traceback).
"""

from __future__ import annotations

from collections.abc import Callable
from pathlib import Path
from typing import Annotated, NoReturn

from rich.console import Console
import structlog
import typer

from calderon_lab import __version__
from calderon_lab.core.conductivity import ConductivityError
from calderon_lab.core.forward import ForwardSolverError, build_mesh, mesh_to_text
from calderon_lab.core.inference import InferenceError
from calderon_lab.core.measurement import MeasurementError
from calderon_lab.core.prior import PriorError
from calderon_lab.core.runner import RunnerError, SweepItemError
from calderon_lab.core.spectral import SpectralError
from calderon_lab.models.config import (
    ConfigError,
    ExperimentConfig,
    ExperimentKind,
    LogLevel,
    Settings,
    get_settings,
    load_experiment_config,
)
from calderon_lab.models.results import ExperimentResult
from calderon_lab.services.experiments import (
    FitError,
    cmd_klcheck,
    cmd_lecam,
    cmd_recover,
    cmd_stability,
    cmd_truncation,
)
from calderon_lab.utils.file_ops import FileOperationError, write_text
from calderon_lab.utils.formatting import print_result
from calderon_lab.utils.logging import run_context, setup_logging

logger = structlog.get_logger(__name__)

app = typer.Typer(
    name="calderon-lab",
    help="Desk-scale experiments for the statistical Calderon problem.",
    no_args_is_help=True,
)

EXIT_CHECKS_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_NUMERICAL_ERROR = 3
EXIT_UNEXPECTED_ERROR = 4

INPUT_ERRORS = (ConfigError, FileOperationError, FitError)
NUMERICAL_ERRORS = (
    SpectralError,
    ConductivityError,
    ForwardSolverError,
    MeasurementError,
    PriorError,
    InferenceError,
    RunnerError,
)

err_console = Console(stderr=True)

ConfigOption = Annotated[
    Path, typer.Option("--config", "-c", help="Experiment TOML file")
]
OutOption = Annotated[
    Path | None, typer.Option("--out", "-o", help="Output directory (overrides config)")
]
WorkersOption = Annotated[
    int | None,
    typer.Option("--workers", "-w", min=1, help="Concurrent runs (env CALDERON_LAB_WORKERS)"),
]
SeedOffsetOption = Annotated[
    int, typer.Option("--seed-offset", min=0, help="Shift every configured seed")
]
LogLevelOption = Annotated[
    LogLevel | None, typer.Option("--log-level", case_sensitive=False, help="Log level")
]
ProgressOption = Annotated[
    bool, typer.Option("--progress/--no-progress", help="Show the sweep progress bar")
]


def _settings(log_level: LogLevel | None) -> Settings:
    settings = get_settings()
    if log_level is not None:
        settings.log_level = log_level
    setup_logging(settings)
    return settings


def _load(path: Path, kind: ExperimentKind, seed_offset: int) -> ExperimentConfig:
    config = load_experiment_config(path)
    if config.experiment != kind:
        raise ConfigError(
            f"{path} configures experiment '{config.experiment.value}', not '{kind.value}'"
        )
    return config.with_seed_offset(seed_offset)


def _run(
    kind: ExperimentKind,
    driver: Callable[..., ExperimentResult],
    config_path: Path,
    out: Path | None,
    workers: int | None,
    seed_offset: int,
    log_level: LogLevel | None,
    progress: bool,
) -> None:
    settings = _settings(log_level)
    try:
        config = _load(config_path, kind, seed_offset)
        out_dir = out or config.output.directory
        with run_context(experiment=kind.value, config_hash=config.config_hash()[:12]):
            result = driver(
                config,
                out_dir,
                workers=workers or settings.workers,
                show_progress=progress,
            )
    except SweepItemError as e:
        cause = e.__cause__ or e
        _fail(cause)
    except Exception as e:
        _fail(e)

    print_result(result, out_dir, err_console=err_console)
    if not result.passed:
        err_console.print(
            f"{len(result.failures)} of {len(result.checks)} checks failed", style="bold red"
        )
        raise typer.Exit(EXIT_CHECKS_FAILED)
    logger.info("All checks passed", experiment=kind.value, checks=len(result.checks))


def _fail(error: BaseException) -> NoReturn:
    err_console.print(f"Error: {error}", style="bold red", markup=False, highlight=False)
    if isinstance(error, INPUT_ERRORS):
        raise typer.Exit(EXIT_INPUT_ERROR)
    if isinstance(error, NUMERICAL_ERRORS):
        raise typer.Exit(EXIT_NUMERICAL_ERROR)
    logger.error("Unexpected failure", error_type=type(error).__name__, exc_info=error)
    raise typer.Exit(EXIT_UNEXPECTED_ERROR)


@app.command()
def recover(
    config: ConfigOption,
    out: OutOption = None,
    workers: WorkersOption = None,
    seed_offset: SeedOffsetOption = 0,
    log_level: LogLevelOption = None,
    progress: ProgressOption = True,
) -> None:
    """Posterior-mean recovery over noise levels and seeds."""
    _run(
        ExperimentKind.RECOVER, cmd_recover, config, out, workers, seed_offset, log_level, progress
    )


@app.command()
def stability(
    config: ConfigOption,
    out: OutOption = None,
    workers: WorkersOption = None,
    seed_offset: SeedOffsetOption = 0,
    log_level: LogLevelOption = None,
    progress: ProgressOption = True,
) -> None:
    """Forward stability and norm-equivalence exponents on a bump family."""
    _run(
        ExperimentKind.STABILITY,
        cmd_stability,
        config,
        out,
        workers,
        seed_offset,
        log_level,
        progress,
    )


@app.command()
def lecam(
    config: ConfigOption,
    out: OutOption = None,
    workers: WorkersOption = None,
    seed_offset: SeedOffsetOption = 0,
    log_level: LogLevelOption = None,
    progress: ProgressOption = True,
) -> None:
    """Electrode and spectral measurement kernels over the electrode grid."""
    _run(
        ExperimentKind.LECAM, cmd_lecam, config, out, workers, seed_offset, log_level, progress
    )


@app.command()
def klcheck(
    config: ConfigOption,
    out: OutOption = None,
    workers: WorkersOption = None,
    seed_offset: SeedOffsetOption = 0,
    log_level: LogLevelOption = None,
    progress: ProgressOption = True,
) -> None:
    """Closed-form against Monte Carlo KL, and the two-point bound table."""
    _run(
        ExperimentKind.KLCHECK, cmd_klcheck, config, out, workers, seed_offset, log_level, progress
    )


@app.command()
def truncation(
    config: ConfigOption,
    out: OutOption = None,
    workers: WorkersOption = None,
    seed_offset: SeedOffsetOption = 0,
    log_level: LogLevelOption = None,
    progress: ProgressOption = True,
) -> None:
    """Bias-variance sweep of the spectral-truncation estimator and test."""
    _run(
        ExperimentKind.TRUNCATION,
        cmd_truncation,
        config,
        out,
        workers,
        seed_offset,
        log_level,
        progress,
    )


@app.command()
def mesh(
    h: Annotated[float, typer.Option("--h", help="Target mesh width")] = 0.05,
    fitted: Annotated[
        list[float] | None, typer.Option("--fitted", help="Radius resolved by a ring")
    ] = None,
    out: Annotated[Path | None, typer.Option("--out", "-o", help="Write the mesh here")] = None,
    log_level: LogLevelOption = None,
) -> None:
    """Build a disk mesh and print or export it."""
    _settings(log_level)
    try:
        disk = build_mesh(h, tuple(fitted or ()))
        text = mesh_to_text(disk)
        if out is not None:
            write_text(out, text)
    except (*INPUT_ERRORS, *NUMERICAL_ERRORS) as e:
        _fail(e)
    typer.echo(
        f"vertices={disk.n_vertices} triangles={disk.n_triangles} "
        f"boundary={disk.boundary_vertices.shape[0]} h={disk.h}"
    )
    if out is None:
        typer.echo(text, nl=False)


@app.command()
def version() -> None:
    """Show the package version."""
    typer.echo(f"calderon-lab {__version__}")


if __name__ == "__main__":
    app()
