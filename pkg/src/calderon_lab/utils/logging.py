"""structlog setup for interactive runs and batch sweeps.

Interactive runs render key/value events through a Rich handler on stderr.
Batch sweeps whose logs are parsed downstream get one JSON object per event,
on stderr or in ``log_file``. Events emitted inside :func:`run_context`
carry the experiment name and config hash.
"""

from __future__ import annotations

from collections.abc import Iterator
from contextlib import contextmanager
import logging
from pathlib import Path
import sys
from typing import Any, Protocol

import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
import structlog

from calderon_lab import __version__
from calderon_lab.models.config import LogFormat

EventDict = dict[str, Any]

LEVEL_STYLES = {
    "DEBUG": "dim blue",
    "INFO": "green",
    "WARNING": "yellow",
    "ERROR": "red",
    "CRITICAL": "bold red",
}

# machine-only keys, hidden on the console
CONSOLE_HIDDEN = frozenset({"app", "version", "exc_info", "stack_info"})


class LoggingSettings(Protocol):
    """The subset of ``Settings`` that logging setup reads."""

    log_format: LogFormat | str
    log_file: Path | None
    structured_logging: bool
    debug: bool

    def get_logging_level(self) -> int: ...


def _wants_json(settings: LoggingSettings) -> bool:
    return settings.structured_logging or LogFormat(settings.log_format) == LogFormat.JSON


def add_app_context(_logger: Any, _method: str, event_dict: EventDict) -> EventDict:
    event_dict["app"] = "calderon-lab"
    event_dict["version"] = __version__
    return event_dict


def numpy_to_builtin(_logger: Any, _method: str, event_dict: EventDict) -> EventDict:
    """Convert numpy scalars and small arrays so the JSON renderer accepts them."""
    for key, value in event_dict.items():
        if isinstance(value, np.generic):
            event_dict[key] = value.item()
        elif isinstance(value, np.ndarray):
            event_dict[key] = value.tolist() if value.size <= 16 else f"array{value.shape}"
        elif isinstance(value, Path):
            event_dict[key] = str(value)
    return event_dict


class ConsoleRenderer:
    """Single-line Rich markup: ``LEVEL logger event (key=value, ...)``."""

    def __init__(self, show_timestamp: bool = False) -> None:
        self.show_timestamp = show_timestamp

    @staticmethod
    def _value(value: Any) -> str:
        if isinstance(value, float):
            return f"{value:.6g}"
        return escape(str(value))

    def __call__(self, _logger: Any, _method: str, event_dict: EventDict) -> str:
        level = str(event_dict.pop("level", "info")).upper()
        timestamp = event_dict.pop("timestamp", "")
        name = event_dict.pop("logger", "")
        event = event_dict.pop("event", "")
        style = LEVEL_STYLES.get(level, "white")

        parts = [f"[dim]{timestamp}[/dim]"] if self.show_timestamp and timestamp else []
        parts.append(f"[{style}]{level:8}[/{style}]")
        if name:
            parts.append(f"[dim]{name}[/dim]")
        parts.append(f"[bold]{event}[/bold]")
        pairs = [
            f"[cyan]{key}[/cyan]=[yellow]{self._value(value)}[/yellow]"
            for key, value in event_dict.items()
            if key not in CONSOLE_HIDDEN
        ]
        if pairs:
            parts.append(f"[dim]({', '.join(pairs)})[/dim]")
        return " ".join(parts)


def _handler(settings: LoggingSettings) -> logging.Handler:
    if not _wants_json(settings):
        return RichHandler(
            console=Console(stderr=True, width=120),
            show_time=False,
            show_level=False,
            show_path=settings.debug,
            rich_tracebacks=True,
            tracebacks_show_locals=settings.debug,
            markup=True,
        )
    handler: logging.Handler
    if settings.log_file:
        settings.log_file.parent.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(settings.log_file, encoding="utf-8")
    else:
        handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    return handler


def setup_logging(settings: LoggingSettings) -> None:
    """Route structlog through the stdlib root logger with one handler.

    Args:
        settings: Object exposing the logging fields of ``Settings``
    """
    level = settings.get_logging_level()
    root = logging.getLogger()
    root.handlers.clear()
    root.addHandler(_handler(settings))
    root.setLevel(level)

    processors: list[Any] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        add_app_context,
    ]
    if _wants_json(settings):
        processors += [numpy_to_builtin, structlog.processors.JSONRenderer(sort_keys=True)]
    else:
        processors.append(ConsoleRenderer(show_timestamp=settings.debug))

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.stdlib.BoundLogger,
        logger_factory=structlog.stdlib.LoggerFactory(),
        context_class=dict,
        cache_logger_on_first_use=False,
    )


@contextmanager
def run_context(**values: Any) -> Iterator[None]:
    """Bind ``values`` to every event logged in this block."""
    with structlog.contextvars.bound_contextvars(**values):
        yield


def get_logger(name: str | None = None) -> Any:
    return structlog.get_logger(name)


def setup_development_logging() -> None:
    """Console logging at DEBUG, used by the test-suite."""

    class DevSettings:
        log_format = LogFormat.CONSOLE
        log_file = None
        structured_logging = False
        debug = True

        def get_logging_level(self) -> int:
            return logging.DEBUG

    setup_logging(DevSettings())
