"""Prior, chain and posterior data models."""

from __future__ import annotations

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from calderon_lab.models.base import ArrayModel, frozen_array
from calderon_lab.models.conductivity import CutoffField, LinkFunction
from calderon_lab.models.measurement import SpectralData
from calderon_lab.models.spectral import OperatorMatrix


class MaternSpec(BaseModel):
    """Whittle-Matern base prior on the bounding square."""

    model_config = ConfigDict(frozen=True)

    alpha: int = Field(default=6, ge=6, description="RKHS Sobolev order")
    ell: float = Field(default=0.4, gt=0.0, description="Correlation length")
    amplitude: float = Field(default=1.0, ge=0.0, description="Marginal std")
    n_modes: int = Field(default=32, ge=8, description="Fourier modes per axis")

    @property
    def nu(self) -> float:
        """Matern smoothness alpha - d/2 with d = 2."""
        return float(self.alpha - 1)


class PriorDraw(ArrayModel):
    """theta = eps^{2/(alpha+2)} zeta theta'."""

    theta: np.ndarray
    eps_used: float = Field(..., gt=0.0)
    seed: int | None = None

    @field_validator("theta", mode="before")
    @classmethod
    def validate_theta(cls, v: object) -> np.ndarray:
        return frozen_array(v, ndim=2, name="theta")


class LikelihoodContext(ArrayModel):
    """Everything needed to evaluate the log-likelihood of a field theta.

    ``assembler`` is a ``DtnAssembler`` bound to the mesh and (J, K, r)
    window. ``weight`` scales the log-likelihood; 0 turns a chain into
    a prior sampler.
    """

    data: SpectralData
    assembler: Any = Field(..., repr=False)
    link: LinkFunction = LinkFunction()
    cutoff: CutoffField = Field(..., repr=False)
    weight: float = Field(default=1.0, ge=0.0)

    @model_validator(mode="after")
    def check_window(self) -> LikelihoodContext:
        a = self.assembler
        if (a.J, a.K) != (self.data.J, self.data.K):
            raise ValueError(
                f"data window {self.data.J} x {self.data.K} differs from "
                f"assembly window {a.J} x {a.K}"
            )
        if a.r != self.data.r:
            raise ValueError(f"data r={self.data.r} differs from assembly r={a.r}")
        if self.data.eps <= 0.0:
            raise ValueError("likelihood needs a positive noise level")
        return self

    @property
    def support_radius(self) -> float:
        return self.cutoff.r1


class ChainState(ArrayModel):
    """Current pCN state with its cached forward map and log-likelihood."""

    theta: np.ndarray
    dtn: OperatorMatrix
    loglik: float
    step: int = Field(default=0, ge=0)
    accepted: bool = False

    @field_validator("theta", mode="before")
    @classmethod
    def validate_theta(cls, v: object) -> np.ndarray:
        return frozen_array(v, ndim=2, name="theta")


class PosteriorSummary(ArrayModel):
    """Posterior-mean estimate and chain diagnostics."""

    mean_theta: np.ndarray = Field(..., repr=False)
    mean_gamma: np.ndarray = Field(..., repr=False)
    acceptance_rate: float = Field(..., ge=0.0, le=1.0)
    chain_length: int = Field(..., ge=1)
    burn_in: int = Field(..., ge=0)
    mc_standard_error: float = Field(default=0.0, ge=0.0)
    sup_error: float | None = None
    burn_in_mesh_h: float | None = None
    mesh_h: float | None = None
    trace: list[tuple[int, float, bool, float]] = Field(default_factory=list, repr=False)

    @field_validator("mean_theta", "mean_gamma", mode="before")
    @classmethod
    def validate_fields(cls, v: object) -> np.ndarray:
        return frozen_array(v, ndim=2, name="field")

    def with_truth(self, truth_gamma: np.ndarray, mask: np.ndarray) -> PosteriorSummary:
        """Copy with sup_error against a known conductivity on the grid."""
        err = float(np.max(np.abs(self.mean_gamma[mask] - np.asarray(truth_gamma)[mask])))
        return self.model_copy(update={"sup_error": err})
