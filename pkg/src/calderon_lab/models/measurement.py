"""Measurement data models for the spectral and electrode noise models."""

from __future__ import annotations

from enum import Enum
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator

from calderon_lab.models.base import ArrayModel, frozen_array
from calderon_lab.models.spectral import OperatorMatrix


class ElectrodeLayout(BaseModel):
    """P equal boundary arcs I_p = [2 pi (p-1)/P, 2 pi p/P), p = 1..P.

    psi_p = c_p 1_{I_p} with c_p = (2 pi / P)^{-1/2}, an orthonormal system.
    """

    model_config = ConfigDict(frozen=True)

    P: int = Field(..., ge=1, le=4096, description="Electrode count")

    @computed_field  # type: ignore[misc]
    @property
    def normalizer(self) -> float:
        return 1.0 / math.sqrt(2.0 * math.pi / self.P)

    def arc(self, p: int) -> tuple[float, float]:
        """Endpoints of arc I_p (1-based)."""
        if not 1 <= p <= self.P:
            raise ValueError(f"electrode index must lie in 1..{self.P}, got {p}")
        width = 2.0 * math.pi / self.P
        return (width * (p - 1), width * p)

    def edges(self) -> np.ndarray:
        """All P + 1 arc endpoints."""
        return 2.0 * math.pi * np.arange(self.P + 1) / self.P

    def gram(self) -> np.ndarray:
        """<psi_p, psi_q>: disjoint arcs, so c_p^2 |I_p| on the diagonal."""
        width = 2.0 * math.pi / self.P
        return np.eye(self.P) * (self.normalizer**2 * width)


class SpectralData(ArrayModel):
    """Y_jk = <Lambda phi_j^(r), phi_k^(0)> + eps g_jk, j = 1..J, k = 1..K."""

    Y: np.ndarray = Field(..., description="J x K observations")
    eps: float = Field(..., ge=0.0)
    r: float = 0.0
    seed: int | None = None

    @field_validator("Y", mode="before")
    @classmethod
    def validate_y(cls, v: object) -> np.ndarray:
        arr = frozen_array(v, ndim=2, name="Y")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("Y must be at least 1 x 1")
        return arr

    @property
    def J(self) -> int:  # noqa: N802
        return int(self.Y.shape[0])

    @property
    def K(self) -> int:  # noqa: N802
        return int(self.Y.shape[1])

    def as_operator(self) -> OperatorMatrix:
        return OperatorMatrix(entries=self.Y, r=self.r)

    def __repr__(self) -> str:
        return f"SpectralData(J={self.J}, K={self.K}, eps={self.eps}, r={self.r}, seed={self.seed})"


class ElectrodeData(ArrayModel):
    """Y_pq = <Lambda psi_p, psi_q> + eps g_pq."""

    Y: np.ndarray = Field(..., description="P x P observations")
    eps: float = Field(..., ge=0.0)
    layout: ElectrodeLayout
    seed: int | None = None
    tail_estimate: float = Field(default=0.0, ge=0.0)

    @field_validator("Y", mode="before")
    @classmethod
    def validate_y(cls, v: object) -> np.ndarray:
        return frozen_array(v, ndim=2, name="Y")

    @property
    def P(self) -> int:  # noqa: N802
        return self.layout.P

    def __repr__(self) -> str:
        return f"ElectrodeData(P={self.P}, eps={self.eps}, seed={self.seed})"


class ProjectedSpectralData(ArrayModel):
    """Spectral coefficients recovered from electrode data.

    The noise is correlated, with covariance eps^2 kron(G_J, G_K) where
    G are the Gram matrices of the projected basis functions phi_j^P.
    """

    Y: np.ndarray
    eps: float = Field(..., ge=0.0)
    P: int = Field(..., ge=1)
    gram_J: np.ndarray = Field(..., repr=False)
    gram_K: np.ndarray = Field(..., repr=False)
    covariance_deviation: float = Field(..., ge=0.0)
    correlated_noise: bool = True

    @field_validator("Y", "gram_J", "gram_K", mode="before")
    @classmethod
    def validate_matrix(cls, v: object) -> np.ndarray:
        return frozen_array(v, ndim=2, name="matrix")

    def as_spectral(self, seed: int | None = None) -> SpectralData:
        return SpectralData(Y=self.Y, eps=self.eps, r=0.0, seed=seed)


class DataModel(str, Enum):
    """Dataset kind stored in a JSON record."""

    SPECTRAL = "spectral"
    ELECTRODE = "electrode"


class DatasetRecord(BaseModel):
    """JSON form of a dataset: floats round-trip bit-exactly."""

    model_config = ConfigDict(extra="forbid")

    model: DataModel
    eps: float
    r: float = 0.0
    P: int | None = None
    J: int | None = None
    K: int | None = None
    seed: int | None = None
    matrix: list[list[float]]

    @classmethod
    def from_spectral(cls, data: SpectralData) -> DatasetRecord:
        return cls(
            model=DataModel.SPECTRAL,
            eps=data.eps,
            r=data.r,
            J=data.J,
            K=data.K,
            seed=data.seed,
            matrix=data.Y.tolist(),
        )

    @classmethod
    def from_electrode(cls, data: ElectrodeData) -> DatasetRecord:
        return cls(
            model=DataModel.ELECTRODE,
            eps=data.eps,
            P=data.P,
            seed=data.seed,
            matrix=data.Y.tolist(),
        )

    def to_data(self) -> SpectralData | ElectrodeData:
        if self.model == DataModel.SPECTRAL:
            return SpectralData(Y=self.matrix, eps=self.eps, r=self.r, seed=self.seed)
        if self.P is None:
            raise ValueError("electrode record needs P")
        return ElectrodeData(
            Y=self.matrix, eps=self.eps, layout=ElectrodeLayout(P=self.P), seed=self.seed
        )
