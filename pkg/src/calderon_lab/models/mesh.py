"""Finite element mesh and solution models."""

from __future__ import annotations

from typing import Any

import numpy as np
from pydantic import Field, field_validator

from calderon_lab.models.base import ArrayModel, frozen_array, frozen_index_array
from calderon_lab.models.spectral import BoundaryFunction


class DiskMesh(ArrayModel):
    """Triangulation of the unit disk with precomputed P1 geometry.

    ``grads[t, a]`` is the (constant) gradient of the barycentric
    coordinate of vertex ``triangles[t, a]`` on triangle t.
    """

    vertices: np.ndarray = Field(..., description="N x 2 coordinates")
    triangles: np.ndarray = Field(..., description="T x 3 vertex indices, CCW")
    boundary_vertices: np.ndarray = Field(..., description="Boundary nodes by angle")
    h: float = Field(..., gt=0.0, lt=0.5, description="Target edge length")
    fitted_radii: tuple[float, ...] = Field(default=(), description="Resolved interfaces")
    areas: np.ndarray = Field(..., repr=False)
    grads: np.ndarray = Field(..., repr=False)
    barycenters: np.ndarray = Field(..., repr=False)

    @field_validator("vertices", "barycenters", mode="before")
    @classmethod
    def validate_points(cls, v: object) -> np.ndarray:
        return frozen_array(v, ndim=2, name="points")

    @field_validator("areas", mode="before")
    @classmethod
    def validate_areas(cls, v: object) -> np.ndarray:
        return frozen_array(v, ndim=1, name="areas")

    @field_validator("grads", mode="before")
    @classmethod
    def validate_grads(cls, v: object) -> np.ndarray:
        return frozen_array(v, ndim=3, name="grads")

    @field_validator("triangles", mode="before")
    @classmethod
    def validate_triangles(cls, v: object) -> np.ndarray:
        return frozen_index_array(v, ndim=2, name="triangles")

    @field_validator("boundary_vertices", mode="before")
    @classmethod
    def validate_boundary(cls, v: object) -> np.ndarray:
        return frozen_index_array(v, ndim=1, name="boundary_vertices")

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @property
    def boundary_angles(self) -> np.ndarray:
        pts = self.vertices[self.boundary_vertices]
        return np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2.0 * np.pi)

    @property
    def max_resolved_index(self) -> int:
        """Largest flat basis index the boundary ring samples without aliasing."""
        return len(self.boundary_vertices) // 2

    @property
    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return np.flatnonzero(mask)

    def __repr__(self) -> str:
        return (
            f"DiskMesh(h={self.h}, vertices={self.n_vertices}, "
            f"triangles={self.n_triangles})"
        )


class DirichletSolution(ArrayModel):
    """Nodal P1 solution of div(gamma grad u) = 0 with u = f on the boundary."""

    values: np.ndarray = Field(..., description="Nodal values of u")
    boundary_data: BoundaryFunction
    gamma: Any = Field(..., repr=False, description="Conductivity solved for")
    mesh: DiskMesh = Field(..., repr=False)
    stiffness: Any = Field(..., repr=False, description="Assembled sparse stiffness")

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, v: object) -> np.ndarray:
        return frozen_array(v, ndim=1, name="values")

    def gradients(self) -> np.ndarray:
        """Per-triangle gradient of u, shape (T, 2)."""
        local = self.values[self.mesh.triangles]
        return np.einsum("ta,tad->td", local, self.mesh.grads)

    def energy(self) -> float:
        """Dirichlet energy  int gamma |grad u|^2."""
        return float(self.values @ (self.stiffness @ self.values))

    def boundary_flux(self) -> np.ndarray:
        """Discrete Neumann data: (K u) at boundary nodes, ordered by angle.

        The entries are the currents gamma du/dnu tested against boundary
        hat functions; their sum vanishes up to round-off.
        """
        residual = self.stiffness @ self.values
        return np.asarray(residual[self.mesh.boundary_vertices])
