"""Configuration management using Pydantic Settings.

Two layers live here: process-level ``Settings`` (logging, worker count)
read from the environment, and the declarative ``ExperimentConfig`` read
from a single TOML file per run.
"""

from __future__ import annotations

from enum import Enum
import hashlib
import logging
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)
from pydantic_settings import BaseSettings, SettingsConfigDict


class ExperimentError(Exception):
    """Base exception for experiment errors."""


class ConfigError(ExperimentError):
    """Raised when an experiment config cannot be read or validated."""


class LogLevel(str, Enum):
    """Log level enumeration."""

    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class LogFormat(str, Enum):
    """Log format enumeration."""

    CONSOLE = "console"
    JSON = "json"


class ExperimentKind(str, Enum):
    """Experiments reachable from the command line."""

    RECOVER = "recover"
    STABILITY = "stability"
    LECAM = "lecam"
    KLCHECK = "klcheck"
    TRUNCATION = "truncation"


class NoiseModel(str, Enum):
    """Measurement model used to synthesize data."""

    SPECTRAL = "spectral"
    ELECTRODE = "electrode"


class TruthKind(str, Enum):
    """How the ground-truth conductivity is generated."""

    HOMOGENEOUS = "homogeneous"
    CONCENTRIC = "concentric"
    PRIOR = "prior"


class Settings(BaseSettings):
    """Process-level settings with environment variable support.

    Every field can be set through ``CALDERON_LAB_<FIELD>``; in particular
    ``CALDERON_LAB_WORKERS`` is the fallback for the ``--workers`` flag.
    """

    model_config = SettingsConfigDict(
        env_prefix="CALDERON_LAB_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        validate_assignment=True,
    )

    # Logging Configuration
    log_level: LogLevel = Field(
        default=LogLevel.INFO, description="Application log level"
    )
    log_format: LogFormat = Field(
        default=LogFormat.CONSOLE, description="Log output format"
    )
    log_file: Path | None = Field(default=None, description="Optional log file path")
    structured_logging: bool = Field(
        default=False, description="Enable structured logging for production"
    )

    # Performance Configuration
    workers: int = Field(
        default=1, ge=1, le=256, description="Concurrent runs within a sweep"
    )

    # Output Configuration
    output_dir: Path = Field(
        default=Path("results"), description="Default directory for result files"
    )

    # Development Configuration
    debug: bool = Field(default=False, description="Enable debug mode")

    @field_validator("log_file", mode="before")
    @classmethod
    def parse_log_file(cls, v: object) -> object:
        """Treat an empty string as no log file."""
        if v is None or v == "":
            return None
        return v

    def get_logging_level(self) -> int:
        """Get Python logging level from enum."""
        return int(getattr(logging, LogLevel(self.log_level).value))


def get_settings() -> Settings:
    """Get application settings with lazy initialization."""
    return Settings()


class _Table(BaseModel):
    """Base for config tables: immutable, unknown keys rejected."""

    model_config = ConfigDict(extra="forbid", frozen=True)


class GeometryConfig(_Table):
    """Nested-disk geometry and link lower asymptote."""

    r0: float = Field(default=0.5, gt=0.0, lt=1.0, description="Radius of D0")
    r1: float = Field(default=0.75, gt=0.0, lt=1.0, description="Radius of D1")
    m1: float = Field(default=0.5, gt=0.0, lt=1.0, description="Link asymptote")
    grid_n: int = Field(default=65, ge=9, le=1025, description="Grid points per axis")

    @model_validator(mode="after")
    def check_radii(self) -> GeometryConfig:
        if self.r0 >= self.r1:
            raise ValueError("geometry.r0 must be smaller than geometry.r1")
        return self


class TruthConfig(_Table):
    """Ground-truth conductivity."""

    kind: TruthKind = TruthKind.CONCENTRIC
    kappa: float = Field(default=2.0, gt=0.0, description="Inclusion conductivity")
    rho: float = Field(default=0.5, gt=0.0, lt=1.0, description="Inclusion radius")
    prior_seed: int = Field(default=0, ge=0, description="Seed of a prior-drawn truth")


class NoiseConfig(_Table):
    """Measurement model and noise levels."""

    model: NoiseModel = NoiseModel.SPECTRAL
    eps: list[float] = Field(default=[0.1, 0.01], min_length=1)
    r: float = Field(default=0.0, description="Heteroscedasticity index")
    J: int = Field(default=16, ge=1, le=256)
    K: int = Field(default=16, ge=1, le=256)
    P: int = Field(default=8, ge=2, le=512, description="Electrode count")

    @field_validator("eps")
    @classmethod
    def check_eps(cls, v: list[float]) -> list[float]:
        if any(e <= 0.0 for e in v):
            raise ValueError("noise levels must be positive")
        return v


class PriorConfig(_Table):
    """Whittle-Matern base prior."""

    alpha: int = Field(default=6, ge=6)
    ell: float = Field(default=0.4, gt=0.0)
    amplitude: float = Field(default=1.0, ge=0.0)
    n_modes: int = Field(default=32, ge=8, le=256)


class ChainConfig(_Table):
    """pCN chain controls."""

    beta: float = Field(default=0.05, gt=0.0, le=1.0)
    n_iter: int = Field(default=20000, ge=1)
    burn_in: int = Field(default=5000, ge=0)
    burn_in_mesh_h: float | None = Field(
        default=None, gt=0.0, lt=0.5, description="Coarse mesh used during burn-in"
    )
    coherence_check_every: int = Field(default=100, ge=0)

    @model_validator(mode="after")
    def check_burn_in(self) -> ChainConfig:
        if self.n_iter <= self.burn_in:
            raise ValueError("chain.n_iter must exceed chain.burn_in")
        return self


class SolverConfig(_Table):
    """Finite element discretisation."""

    mesh_h: float = Field(default=0.05, gt=0.0, lt=0.5)


class StabilityConfig(_Table):
    """One-parameter conductivity family t -> 1 + t * bump."""

    t_values: list[float] = Field(
        default=[0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16, 0.18, 0.20]
    )
    bump_radius: float = Field(default=0.5, gt=0.0, lt=1.0)
    J: int = Field(default=8, ge=1, le=128)


class LecamConfig(_Table):
    """Electrode/spectral kernel study."""

    p_grid: list[int] = Field(default=[16, 32, 64, 128], min_length=1)
    J: int = Field(default=3, ge=1, le=64)
    K: int = Field(default=3, ge=1, le=64)
    replicates: int = Field(default=10000, ge=10)
    exactness_P: int = Field(default=8, ge=2, le=256)
    eps: float = Field(default=1.0, gt=0.0)

    @field_validator("p_grid")
    @classmethod
    def check_p_grid(cls, v: list[int]) -> list[int]:
        if any(p < 2 for p in v):
            raise ValueError("electrode counts must be at least 2")
        return v


class KLCheckConfig(_Table):
    """Closed-form versus Monte Carlo KL, and the two-point bound table."""

    kappas: list[float] = Field(default=[1.5, 2.0], min_length=1)
    rho: float = Field(default=0.5, gt=0.0, lt=1.0)
    eps: list[float] = Field(default=[0.1], min_length=1)
    J: int = Field(default=4, ge=1, le=64)
    K: int = Field(default=4, ge=1, le=64)
    replicates: int = Field(default=100000, ge=100)
    mu_grid: list[float] = Field(
        default=[0.0, 0.001, 0.005, 0.01, 0.02, 0.05, 0.1], min_length=1
    )


class TruncationConfig(_Table):
    """Spectral-truncation estimator study."""

    eps: list[float] = Field(default=[0.05], min_length=1)
    alpha: int = Field(default=6, ge=1)
    replicates: int = Field(default=1000, ge=10)
    master_J: int = Field(default=32, ge=4, le=256)


class OutputConfig(_Table):
    """Where and what to write."""

    directory: Path = Path("results")
    record_runtime: bool = False


class ExperimentConfig(_Table):
    """Fully resolved configuration of one experiment run."""

    experiment: ExperimentKind
    seeds: list[int] = Field(default=[0, 1, 2, 3, 4], min_length=1)
    geometry: GeometryConfig = GeometryConfig()
    truth: TruthConfig = TruthConfig()
    noise: NoiseConfig = NoiseConfig()
    prior: PriorConfig = PriorConfig()
    chain: ChainConfig = ChainConfig()
    solver: SolverConfig = SolverConfig()
    stability: StabilityConfig = StabilityConfig()
    lecam: LecamConfig = LecamConfig()
    klcheck: KLCheckConfig = KLCheckConfig()
    truncation: TruncationConfig = TruncationConfig()
    output: OutputConfig = OutputConfig()

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON dump of the resolved config."""
        canonical = self.model_dump_json(exclude={"output"})
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_seed_offset(self, offset: int) -> ExperimentConfig:
        """Return a copy whose seeds are shifted by ``offset``."""
        if offset == 0:
            return self
        return self.model_copy(update={"seeds": [s + offset for s in self.seeds]})


def load_experiment_config(path: Path) -> ExperimentConfig:
    """Read and validate a TOML experiment config.

    Raises:
        ConfigError: If the file is missing, is not TOML, or fails validation
    """
    try:
        with path.open("rb") as f:
            raw = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"Config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Config file is not valid TOML: {path}: {e}") from e

    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}:\n{e}") from e
