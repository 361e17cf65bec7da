"""Console formatting of experiment results."""

from __future__ import annotations

from pathlib import Path

from rich.console import Console
from rich.table import Table

from calderon_lab.models.results import CheckResult, ExperimentResult


def format_check(check: CheckResult) -> str:
    """One-line rendering: ``[PASS] name: detail``."""
    status = "PASS" if check.passed else "FAIL"
    suffix = f": {check.detail}" if check.detail else ""
    return f"[{status}] {check.name}{suffix}"


def checks_table(result: ExperimentResult) -> Table:
    """Rich table of every check of an experiment run.

    Args:
        result: Experiment result

    Returns:
        Table with one row per check
    """
    table = Table(title=f"{result.experiment.value} ({result.config_hash[:12]})")
    table.add_column("Check", style="cyan")
    table.add_column("Status", justify="center")
    table.add_column("Detail", style="dim")
    for check in result.checks:
        status = "[green]PASS[/green]" if check.passed else "[bold red]FAIL[/bold red]"
        table.add_row(check.name, status, check.detail)
    return table


def relative_files(result: ExperimentResult, root: Path) -> list[str]:
    out = []
    for path in result.files:
        try:
            out.append(str(path.relative_to(root)))
        except ValueError:
            out.append(str(path))
    return out


def print_result(
    result: ExperimentResult,
    out_dir: Path,
    console: Console | None = None,
    err_console: Console | None = None,
) -> None:
    """Print the checks table, the written files, and failures on stderr."""
    console = console or Console()
    err_console = err_console or Console(stderr=True)
    console.print(checks_table(result))
    files = relative_files(result, out_dir)
    console.print(f"[bold]{len(files)}[/bold] file(s) written to {out_dir}")
    for name in files:
        console.print(f"  {name}", style="dim")
    for check in result.failures:
        err_console.print(format_check(check), style="red", markup=False, highlight=False)
