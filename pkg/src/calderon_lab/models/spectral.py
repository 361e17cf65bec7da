"""Spectral data models on the boundary circle.

Index convention: a single flat index k interleaves the trigonometric
system, k = 0 constant, k = 2n - 1 cosine of mode n, k = 2n sine of mode n.
"""

from __future__ import annotations

from enum import Enum
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator

from calderon_lab.models.base import ArrayModel, frozen_array


class Parity(str, Enum):
    """Kind of trigonometric eigenfunction."""

    CONSTANT = "constant"
    COSINE = "cosine"
    SINE = "sine"


class BasisIndex(BaseModel):
    """Flat index into the Laplace-Beltrami eigenbasis of the circle."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(..., ge=0, description="Flat basis index")

    @computed_field  # type: ignore[misc]
    @property
    def mode(self) -> int:
        """Frequency n = ceil(k / 2)."""
        return (self.k + 1) // 2

    @computed_field  # type: ignore[misc]
    @property
    def parity(self) -> Parity:
        if self.k == 0:
            return Parity.CONSTANT
        return Parity.COSINE if self.k % 2 == 1 else Parity.SINE

    @computed_field  # type: ignore[misc]
    @property
    def eigenvalue(self) -> float:
        return float(self.mode**2)


class BoundaryFunction(ArrayModel):
    """Boundary function as coefficients against phi_k, k = 0..k_max."""

    coeffs: np.ndarray = Field(..., description="Coefficients c_0..c_Kmax")

    @field_validator("coeffs", mode="before")
    @classmethod
    def validate_coeffs(cls, v: object) -> np.ndarray:
        return frozen_array(v, ndim=1, name="coeffs")

    @computed_field  # type: ignore[misc]
    @property
    def k_max(self) -> int:
        return int(self.coeffs.shape[0]) - 1

    @property
    def is_mean_zero(self) -> bool:
        """True if the function lies in the diamond (mean-zero) subspace."""
        return bool(self.coeffs[0] == 0.0)

    @classmethod
    def basis_function(cls, k: int, k_max: int | None = None) -> BoundaryFunction:
        """The single basis function phi_k^(0)."""
        size = max(k, k_max or 0) + 1
        coeffs = np.zeros(size)
        coeffs[k] = 1.0
        return cls(coeffs=coeffs)

    def evaluate(self, angles: np.ndarray) -> np.ndarray:
        """Point values at the given angles (radians)."""
        from calderon_lab.core.spectral import basis_matrix

        return basis_matrix(self.k_max, np.asarray(angles, dtype=float)) @ self.coeffs

    def __repr__(self) -> str:
        return f"BoundaryFunction(k_max={self.k_max})"


class OperatorMatrix(ArrayModel):
    """Finite coefficient matrix of an operator between boundary spaces.

    ``entries[j-1, k-1] = <T phi_j^(r), phi_k^(0)>`` for j = 1..J, k = 1..K.
    The constant mode is excluded on both sides (quotient domain,
    mean-zero range).
    """

    entries: np.ndarray = Field(..., description="J x K coefficient matrix")
    r: float = Field(default=0.0, description="Heteroscedasticity index")

    @field_validator("entries", mode="before")
    @classmethod
    def validate_entries(cls, v: object) -> np.ndarray:
        arr = frozen_array(v, ndim=2, name="entries")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("entries must be at least 1 x 1")
        return arr

    @property
    def J(self) -> int:  # noqa: N802
        return int(self.entries.shape[0])

    @property
    def K(self) -> int:  # noqa: N802
        return int(self.entries.shape[1])

    @classmethod
    def zeros(cls, J: int, K: int, r: float = 0.0) -> OperatorMatrix:  # noqa: N803
        return cls(entries=np.zeros((J, K)), r=r)

    def with_entries(self, entries: np.ndarray) -> OperatorMatrix:
        return OperatorMatrix(entries=entries, r=self.r)

    def __sub__(self, other: OperatorMatrix) -> OperatorMatrix:
        if not math.isclose(self.r, other.r) or self.entries.shape != other.entries.shape:
            raise ValueError("operator matrices must share r and shape")
        return self.with_entries(self.entries - other.entries)

    def __repr__(self) -> str:
        return f"OperatorMatrix(J={self.J}, K={self.K}, r={self.r})"
