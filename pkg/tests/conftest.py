"""Pytest configuration and shared fixtures.

This module provides common fixtures and configuration for all tests.
"""

from __future__ import annotations

from collections.abc import Generator
from pathlib import Path
import tempfile

from pydantic import BaseModel
import pytest

from calderon_lab.core.conductivity import make_cutoff
from calderon_lab.core.forward import build_mesh
from calderon_lab.models.chain import MaternSpec
from calderon_lab.models.conductivity import ConcentricConductivity, CutoffField
from calderon_lab.models.mesh import DiskMesh
from calderon_lab.utils.logging import setup_development_logging


@pytest.fixture(scope="session", autouse=True)
def setup_logging() -> None:
    """Set up logging for tests."""
    setup_development_logging()


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """Create a temporary directory for tests."""
    with tempfile.TemporaryDirectory() as temp_dir:
        yield Path(temp_dir)


@pytest.fixture(scope="session")
def coarse_mesh() -> DiskMesh:
    """Cheap mesh for chain and wiring tests."""
    return build_mesh(0.1)


@pytest.fixture(scope="session")
def fitted_mesh() -> DiskMesh:
    """Mesh resolving the circle |x| = 0.5 of the concentric inclusion."""
    return build_mesh(0.05, fitted_radii=(0.5,))


@pytest.fixture
def inclusion() -> ConcentricConductivity:
    """The concentric oracle kappa = 2, rho = 0.5."""
    return ConcentricConductivity(kappa=2.0, rho=0.5)


@pytest.fixture
def cutoff() -> CutoffField:
    return make_cutoff(0.5, 0.75, 33)


@pytest.fixture
def matern_spec() -> MaternSpec:
    return MaternSpec(alpha=6, ell=0.4, amplitude=1.0, n_modes=16)


@pytest.fixture
def mock_settings() -> BaseModel:
    """Settings stand-in for logging setup without reading the environment."""

    class MockSettings(BaseModel):
        log_format: str = "console"
        log_file: Path | None = None
        structured_logging: bool = False
        debug: bool = True

        def get_logging_level(self) -> int:
            return 10  # DEBUG level

    return MockSettings()
