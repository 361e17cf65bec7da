"""Experiment result models."""

from __future__ import annotations

from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, computed_field

from calderon_lab.models.config import ExperimentKind


class CheckResult(BaseModel):
    """Outcome of one numerical property check."""

    model_config = ConfigDict(frozen=True)

    name: str
    passed: bool
    detail: str = ""


class ExperimentResult(BaseModel):
    """Checks and files produced by one experiment run."""

    experiment: ExperimentKind
    config_hash: str
    checks: list[CheckResult] = Field(default_factory=list)
    files: list[Path] = Field(default_factory=list)

    @computed_field  # type: ignore[misc]
    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def add_check(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(CheckResult(name=name, passed=bool(passed), detail=detail))
