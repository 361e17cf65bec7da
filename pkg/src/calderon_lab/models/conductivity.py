"""Conductivity data models on the unit disk.

Fields are sampled on a uniform Cartesian grid over [-1, 1]^2, row index
along y and column index along x; only points with |x| <= 1 belong to the
disk.
"""

from __future__ import annotations

import math
from typing import Protocol, runtime_checkable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.interpolate import RegularGridInterpolator

from calderon_lab.models.base import ArrayModel, frozen_array


def grid_axis(grid_n: int) -> np.ndarray:
    """Grid coordinates along one axis."""
    return np.linspace(-1.0, 1.0, grid_n)


def grid_spacing(grid_n: int) -> float:
    return 2.0 / (grid_n - 1)


def grid_coordinates(grid_n: int) -> tuple[np.ndarray, np.ndarray]:
    """Meshgrid (X, Y) with Y varying along rows."""
    axis = grid_axis(grid_n)
    return np.meshgrid(axis, axis, indexing="xy")


def grid_radius(grid_n: int) -> np.ndarray:
    x, y = grid_coordinates(grid_n)
    return np.hypot(x, y)


def disk_mask(grid_n: int) -> np.ndarray:
    return grid_radius(grid_n) <= 1.0 + 1e-12


@runtime_checkable
class ConductivityLike(Protocol):
    """Anything the forward solver can evaluate at quadrature points."""

    def contrast_at(self, points: np.ndarray) -> np.ndarray:
        """gamma(x) - 1 at points of shape (N, 2)."""
        ...


class ConductivityField(ArrayModel):
    """Sampled conductivity with parameter-class metadata (m, D' radius)."""

    values: np.ndarray = Field(..., description="grid_n x grid_n samples")
    m: float = Field(..., gt=0.0, description="Claimed lower bound")
    support_radius: float = Field(..., gt=0.0, lt=1.0, description="Radius of D'")

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, v: object) -> np.ndarray:
        arr = frozen_array(v, ndim=2, name="values")
        if arr.shape[0] != arr.shape[1] or arr.shape[0] < 3:
            raise ValueError("values must be a square grid of at least 3 x 3")
        return arr

    @property
    def grid_n(self) -> int:
        return int(self.values.shape[0])

    @property
    def spacing(self) -> float:
        return grid_spacing(self.grid_n)

    def disk_values(self) -> np.ndarray:
        """Samples at grid points inside the closed disk."""
        return self.values[disk_mask(self.grid_n)]

    def contrast_at(self, points: np.ndarray) -> np.ndarray:
        """Bilinear interpolation of gamma - 1 at points (x, y).

        Interpolating the contrast keeps gamma = 1 regions exactly zero.
        """
        axis = grid_axis(self.grid_n)
        interp = RegularGridInterpolator(
            (axis, axis),
            self.values - 1.0,
            method="linear",
            bounds_error=False,
            fill_value=None,
        )
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return interp(pts[:, ::-1])

    def __repr__(self) -> str:
        return (
            f"ConductivityField(grid_n={self.grid_n}, m={self.m}, "
            f"support_radius={self.support_radius})"
        )


class ConcentricConductivity(BaseModel):
    """Piecewise-constant inclusion: kappa on |x| < rho, 1 elsewhere."""

    model_config = ConfigDict(frozen=True)

    kappa: float = Field(..., gt=0.0)
    rho: float = Field(..., gt=0.0, lt=1.0)

    def contrast_at(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        inside = np.hypot(pts[:, 0], pts[:, 1]) < self.rho
        return np.where(inside, self.kappa - 1.0, 0.0)

    def to_field(self, grid_n: int, support_radius: float | None = None) -> ConductivityField:
        """Grid samples of the inclusion (for sup-norm comparisons)."""
        radius = grid_radius(grid_n)
        values = np.where(radius < self.rho, self.kappa, 1.0)
        support = support_radius if support_radius is not None else min(
            0.5 * (1.0 + self.rho), 0.999
        )
        return ConductivityField(
            values=values, m=min(1.0, self.kappa), support_radius=support
        )


class LinkFunction(BaseModel):
    """Softplus link Phi(t) = m1 + (1 - m1) log(1 + e^t) / log 2.

    Smooth increasing bijection R -> (m1, inf) with Phi(0) = 1 and all
    derivatives of order >= 1 bounded.
    """

    model_config = ConfigDict(frozen=True)

    m1: float = Field(default=0.5, gt=0.0, lt=1.0, description="Lower asymptote")

    @property
    def scale(self) -> float:
        return (1.0 - self.m1) / math.log(2.0)

    def phi(self, theta: np.ndarray) -> np.ndarray:
        t = np.asarray(theta, dtype=float)
        # written around 1 so that Phi(0) == 1.0 exactly
        return 1.0 + (1.0 - self.m1) * (np.logaddexp(0.0, t) / math.log(2.0) - 1.0)

    def phi_inverse(self, gamma: np.ndarray) -> np.ndarray:
        g = np.asarray(gamma, dtype=float)
        y = (g - 1.0) / self.scale + math.log(2.0)
        # log(expm1(y)) without overflow for large y
        return y + np.log(-np.expm1(-y))

    def derivative(self, theta: np.ndarray) -> np.ndarray:
        t = np.asarray(theta, dtype=float)
        return self.scale * 0.5 * (1.0 + np.tanh(0.5 * t))

    def lipschitz_constant(self) -> float:
        """sup |Phi'| = (1 - m1) / log 2."""
        return self.scale

    def inverse_lipschitz_constant(self, m: float) -> float:
        """sup of (Phi^{-1})' over [m, inf), for m > m1."""
        if m <= self.m1:
            raise ValueError(f"m={m} must exceed the link asymptote m1={self.m1}")
        theta_m = float(self.phi_inverse(np.array(m)))
        return 1.0 / float(self.derivative(np.array(theta_m)))


class CutoffField(ArrayModel):
    """Smooth radial cutoff: 1 on |x| <= r0, 0 on |x| >= r1."""

    r0: float = Field(..., gt=0.0, lt=1.0, description="Radius of D0")
    r1: float = Field(..., gt=0.0, lt=1.0, description="Radius of D1")
    values: np.ndarray = Field(..., description="grid_n x grid_n samples")

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, v: object) -> np.ndarray:
        return frozen_array(v, ndim=2, name="values")

    @model_validator(mode="after")
    def check_order(self) -> CutoffField:
        if self.r0 >= self.r1:
            raise ValueError("cutoff needs r0 < r1")
        return self

    @property
    def grid_n(self) -> int:
        return int(self.values.shape[0])
