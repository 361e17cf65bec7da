"""Process-pool sweep runner with Rich progress display.

Sweep items (seeds, noise levels, electrode counts, replicate chunks) are
independent pure computations. They run concurrently up to a worker count
and are always returned in submission order, so reductions over the
results are deterministic.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Any, TypeVar

from rich.console import Console
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    SpinnerColumn,
    TaskID,
    TextColumn,
    TimeElapsedColumn,
    TimeRemainingColumn,
)
import structlog

logger = structlog.get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class RunnerError(Exception):
    """Base exception for sweep runner errors."""


class SweepItemError(RunnerError):
    """A sweep item raised; wraps the original exception."""


class SweepProgress:
    """Progress tracking for a sweep."""

    def __init__(self, console: Console | None = None, *, enabled: bool = True) -> None:
        self.enabled = enabled
        self.console = console or Console(stderr=True)
        self.progress = Progress(
            SpinnerColumn(),
            TextColumn("[bold blue]{task.description}"),
            BarColumn(),
            MofNCompleteColumn(),
            TextColumn("•"),
            TimeElapsedColumn(),
            TextColumn("•"),
            TimeRemainingColumn(),
            console=self.console,
            disable=not enabled,
        )
        self.task: TaskID | None = None

    def __enter__(self) -> SweepProgress:
        self.progress.start()
        return self

    def __exit__(self, *exc: object) -> None:
        self.progress.stop()

    def start(self, description: str, total: int) -> TaskID:
        """Start the sweep task."""
        self.task = self.progress.add_task(description, total=total)
        return self.task

    def advance(self, step: int = 1) -> None:
        if self.task is not None:
            self.progress.update(self.task, advance=step)


def run_sweep(
    fn: Callable[[T], R],
    items: Sequence[T],
    *,
    workers: int = 1,
    description: str = "Running sweep",
    show_progress: bool = True,
) -> list[R]:
    """Apply ``fn`` to every item, in a process pool when workers > 1.

    Args:
        fn: Picklable top-level function
        items: Sweep items (picklable)
        workers: Maximum concurrent processes; 1 runs inline
        description: Progress bar label
        show_progress: Whether to show the progress bar

    Returns:
        Results in the order of ``items``

    Raises:
        SweepItemError: If any item raised
    """
    if workers < 1:
        raise RunnerError(f"worker count must be at least 1, got {workers}")
    results: list[Any] = [None] * len(items)
    logger.info("Starting sweep", description=description, items=len(items), workers=workers)

    with SweepProgress(enabled=show_progress) as progress:
        progress.start(description, total=len(items))
        if workers == 1 or len(items) <= 1:
            for i, item in enumerate(items):
                results[i] = _call(fn, item, i)
                progress.advance()
        else:
            with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
                futures = {pool.submit(fn, item): i for i, item in enumerate(items)}
                for future in as_completed(futures):
                    i = futures[future]
                    try:
                        results[i] = future.result()
                    except Exception as e:
                        logger.error("Sweep item failed", index=i, error=str(e))
                        raise SweepItemError(f"sweep item {i} failed: {e}") from e
                    progress.advance()

    logger.info("Sweep finished", description=description, items=len(items))
    return results


def _call(fn: Callable[[T], R], item: T, index: int) -> R:
    try:
        return fn(item)
    except Exception as e:
        logger.error("Sweep item failed", index=index, error=str(e))
        raise SweepItemError(f"sweep item {index} failed: {e}") from e
