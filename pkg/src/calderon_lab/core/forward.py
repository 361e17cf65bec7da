"""P1 finite element solver for the conductivity equation on the unit disk.

The difference DtN operator is assembled through the energy identity

    <(Lambda_gamma - Lambda_1) phi_j, phi_k> = int (gamma - 1) grad u_{gamma,phi_j} . grad u_{1,phi_k}

with u_{gamma,phi_j} computed by finite elements and u_{1,phi_k} the exact
harmonic extension r^n {cos, sin}(n t) / sqrt(pi).
"""

from __future__ import annotations

from collections.abc import Sequence
import math

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.linalg import splu
from scipy.spatial import Delaunay
import structlog

from calderon_lab.core.spectral import basis_eval, sobolev_weights
from calderon_lab.models.conductivity import ConductivityLike
from calderon_lab.models.mesh import DirichletSolution, DiskMesh
from calderon_lab.models.spectral import BasisIndex, BoundaryFunction, OperatorMatrix

logger = structlog.get_logger(__name__)

_SQRT_PI = math.sqrt(math.pi)
_MIN_RING_POINTS = 6


class ForwardSolverError(Exception):
    """Base exception for forward solver errors."""


class MeshParameterError(ForwardSolverError):
    """Mesh size or fitted radii out of range."""


class SingularStiffnessError(ForwardSolverError):
    """Stiffness matrix could not be factorised."""


class BoundaryResolutionError(ForwardSolverError):
    """Truncation asks for modes the boundary ring cannot represent."""


def _ring_radii(h: float, fitted_radii: Sequence[float]) -> np.ndarray:
    breaks = sorted({0.0, 1.0, *(float(r) for r in fitted_radii)})
    radii: list[float] = []
    for a, b in zip(breaks[:-1], breaks[1:], strict=True):
        n_seg = max(1, math.ceil((b - a) / h - 1e-9))
        radii.extend(a + (b - a) * i / n_seg for i in range(1, n_seg + 1))
    return np.asarray(radii)


def build_mesh(h: float, fitted_radii: Sequence[float] = ()) -> DiskMesh:
    """Triangulate the unit disk by concentric rings of spacing about h.

    Args:
        h: Target edge length, 0 < h < 0.5
        fitted_radii: Circles that must be resolved by mesh edges (for
            piecewise-constant inclusions)

    Raises:
        MeshParameterError: If h or a fitted radius is out of range
    """
    if not 0.0 < h < 0.5:
        raise MeshParameterError(f"mesh size must satisfy 0 < h < 0.5, got {h}")
    for r in fitted_radii:
        if not 0.0 < r < 1.0:
            raise MeshParameterError(f"fitted radius must lie in (0, 1), got {r}")

    radii = _ring_radii(h, fitted_radii)
    points = [np.zeros((1, 2))]
    boundary_start = 1
    for i, r in enumerate(radii):
        is_boundary = i == len(radii) - 1
        if is_boundary:
            n = math.ceil(2.0 * math.pi / h)
            offset = 0.0
            boundary_start = sum(p.shape[0] for p in points)
        else:
            n = max(_MIN_RING_POINTS, math.ceil(2.0 * math.pi * r / h))
            offset = 0.5 * (i % 2)
        angles = 2.0 * math.pi * (np.arange(n) + offset) / n
        # boundary ring sits on |x| = 1 exactly
        radius = 1.0 if is_boundary else r
        ring = np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])
        points.append(ring)
    vertices = np.vstack(points)
    boundary = np.arange(boundary_start, vertices.shape[0])

    triangles = Delaunay(vertices).simplices.astype(np.int64)
    p0, p1, p2 = (vertices[triangles[:, a]] for a in range(3))
    signed = 0.5 * (
        (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
        - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
    )
    flip = signed < 0.0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    areas = np.abs(signed)

    p0, p1, p2 = (vertices[triangles[:, a]] for a in range(3))
    two_area = (2.0 * areas)[:, None]
    grads = np.stack(
        [
            np.column_stack([p1[:, 1] - p2[:, 1], p2[:, 0] - p1[:, 0]]),
            np.column_stack([p2[:, 1] - p0[:, 1], p0[:, 0] - p2[:, 0]]),
            np.column_stack([p0[:, 1] - p1[:, 1], p1[:, 0] - p0[:, 0]]),
        ],
        axis=1,
    ) / two_area[:, None]
    barycenters = (p0 + p1 + p2) / 3.0

    mesh = DiskMesh(
        vertices=vertices,
        triangles=triangles,
        boundary_vertices=boundary,
        h=h,
        fitted_radii=tuple(float(r) for r in fitted_radii),
        areas=areas,
        grads=grads,
        barycenters=barycenters,
    )
    logger.debug(
        "Mesh built",
        h=h,
        vertices=mesh.n_vertices,
        triangles=mesh.n_triangles,
        boundary=len(boundary),
        min_area=float(areas.min()),
    )
    return mesh


def harmonic_extension(k: int, points: np.ndarray) -> np.ndarray:
    """Exact harmonic extension of phi_k at points (x, y)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if k == 0:
        return np.full(pts.shape[0], 1.0 / math.sqrt(2.0 * math.pi))
    n = (k + 1) // 2
    zn = (pts[:, 0] + 1j * pts[:, 1]) ** n
    return (zn.real if k % 2 == 1 else zn.imag) / _SQRT_PI


def harmonic_gradient(k: int, points: np.ndarray) -> np.ndarray:
    """Gradient of ``harmonic_extension(k)``, shape (N, 2)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if k == 0:
        return np.zeros_like(pts)
    n = (k + 1) // 2
    w = n * (pts[:, 0] + 1j * pts[:, 1]) ** (n - 1) / _SQRT_PI
    if k % 2 == 1:
        return np.column_stack([w.real, -w.imag])
    return np.column_stack([w.imag, w.real])


def _triangle_conductivity(gamma: ConductivityLike, mesh: DiskMesh) -> np.ndarray:
    contrast = np.asarray(gamma.contrast_at(mesh.barycenters), dtype=float)
    if not np.all(np.isfinite(contrast)) or np.any(contrast <= -1.0):
        raise SingularStiffnessError(
            "conductivity is not positive at every quadrature point"
        )
    return contrast


def assemble_stiffness(coefficient: np.ndarray, mesh: DiskMesh) -> csr_matrix:
    """Sparse P1 stiffness  K_ab = sum_T c_T |T| grad l_a . grad l_b."""
    local = np.einsum("tad,tbd->tab", mesh.grads, mesh.grads)
    local *= (np.asarray(coefficient) * mesh.areas)[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_vertices
    return coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


class StiffnessSystem:
    """Stiffness matrix of one conductivity, factorised once for many solves."""

    def __init__(
        self,
        gamma: ConductivityLike,
        mesh: DiskMesh,
        harmonic: np.ndarray | None = None,
    ) -> None:
        self.gamma = gamma
        self.mesh = mesh
        self.contrast = _triangle_conductivity(gamma, mesh)
        self.stiffness = assemble_stiffness(1.0 + self.contrast, mesh)
        self._interior = mesh.interior_vertices
        self._boundary = mesh.boundary_vertices
        self._harmonic = harmonic
        k_ii = self.stiffness[self._interior][:, self._interior].tocsc()
        self._k_ib = self.stiffness[self._interior][:, self._boundary]
        try:
            self._lu = splu(k_ii)
        except RuntimeError as e:
            raise SingularStiffnessError(f"stiffness factorisation failed: {e}") from e
        logger.debug("Stiffness factorised", unknowns=len(self._interior))

    def solve(self, boundary_values: np.ndarray) -> np.ndarray:
        """Nodal solution for the given values at boundary nodes."""
        u = np.empty(self.mesh.n_vertices)
        u[self._boundary] = boundary_values
        rhs = -(self._k_ib @ np.asarray(boundary_values, dtype=float))
        interior = self._lu.solve(rhs)
        if not np.all(np.isfinite(interior)):
            raise SingularStiffnessError("linear solve produced non-finite values")
        u[self._interior] = interior
        return u

    def gradients(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("ta,tad->td", u[self.mesh.triangles], self.mesh.grads)

    def harmonic_gradients(self, K: int) -> np.ndarray:  # noqa: N803
        """grad u_{1,phi_k} at barycenters for k = 1..K, shape (K, T, 2)."""
        if self._harmonic is None or self._harmonic.shape[0] < K:
            self._harmonic = np.stack(
                [harmonic_gradient(k, self.mesh.barycenters) for k in range(1, K + 1)]
            )
        return self._harmonic[:K]

    def dtn_row(self, j: int, K: int) -> np.ndarray:  # noqa: N803
        """<(Lambda_gamma - Lambda_1) phi_j, phi_k> for k = 1..K."""
        grad_u = self.gradients(self.solve(basis_eval(j, self.mesh.boundary_angles)))
        weighted = grad_u * (self.contrast * self.mesh.areas)[:, None]
        return np.einsum("td,ktd->k", weighted, self.harmonic_gradients(K))


def solve_dirichlet(
    gamma: ConductivityLike, f: BoundaryFunction, mesh: DiskMesh
) -> DirichletSolution:
    """Galerkin solution with nodal Dirichlet data f(angle).

    Raises:
        SingularStiffnessError: If gamma is not positive or the system is singular
    """
    system = StiffnessSystem(gamma, mesh)
    u = system.solve(f.evaluate(mesh.boundary_angles))
    return DirichletSolution(
        values=u, boundary_data=f, gamma=gamma, mesh=mesh, stiffness=system.stiffness
    )


def _flat(k: int | BasisIndex) -> int:
    return k.k if isinstance(k, BasisIndex) else int(k)


def dtn_diff_entry(
    gamma: ConductivityLike,
    j: int | BasisIndex,
    k: int | BasisIndex,
    mesh: DiskMesh,
) -> float:
    """<(Lambda_gamma - Lambda_1) phi_j^(0), phi_k^(0)> by the energy identity."""
    jj, kk = _flat(j), _flat(k)
    if jj < 1 or kk < 1:
        raise ForwardSolverError("difference DtN entries need j, k >= 1")
    return float(StiffnessSystem(gamma, mesh).dtn_row(jj, kk)[kk - 1])


class DtnAssembler:
    """Repeated assembly of Lambda_gamma - Lambda_1 on a fixed mesh and window.

    The harmonic reference gradients depend only on the mesh, so they are
    evaluated once and shared by every conductivity assembled here.
    """

    def __init__(
        self,
        mesh: DiskMesh,
        J: int,  # noqa: N803
        K: int,  # noqa: N803
        r: float = 0.0,
    ) -> None:
        if J < 1 or K < 1:
            raise ForwardSolverError(f"truncation must be at least 1 x 1, got {J} x {K}")
        if max(J, K) > mesh.max_resolved_index:
            raise BoundaryResolutionError(
                f"truncation {J} x {K} exceeds the {mesh.max_resolved_index} modes resolved by "
                f"{len(mesh.boundary_vertices)} boundary nodes; refine the mesh"
            )
        self.mesh = mesh
        self.J = J
        self.K = K
        self.r = r
        self._harmonic = np.stack(
            [harmonic_gradient(k, mesh.barycenters) for k in range(1, K + 1)]
        )
        self._row_weights = sobolev_weights(1, J + 1, -r)

    def assemble(self, gamma: ConductivityLike) -> OperatorMatrix:
        system = StiffnessSystem(gamma, self.mesh, harmonic=self._harmonic)
        entries = np.zeros((self.J, self.K))
        if np.any(system.contrast):
            for j in range(1, self.J + 1):
                entries[j - 1] = system.dtn_row(j, self.K)
            entries *= self._row_weights[:, None]
        return OperatorMatrix(entries=entries, r=self.r)


def assemble_dtn_matrix(
    gamma: ConductivityLike,
    J: int,  # noqa: N803
    K: int,  # noqa: N803
    r: float,
    mesh: DiskMesh,
) -> OperatorMatrix:
    """Matrix of Lambda_gamma - Lambda_1 against phi_j^(r), phi_k^(0).

    One factorisation, then one solve per row j.
    """
    matrix = DtnAssembler(mesh, J, K, r).assemble(gamma)
    logger.debug("DtN assembled", J=J, K=K, r=r, triangles=mesh.n_triangles)
    return matrix


def analytic_dtn_concentric(kappa: float, rho: float, n: int) -> float:
    """Eigenvalue of Lambda_gamma at mode n for the concentric inclusion.

    n (1 - mu rho^{2n}) / (1 + mu rho^{2n}) with mu = (1 - kappa) / (1 + kappa).
    """
    if kappa <= 0.0 or not 0.0 < rho < 1.0 or n < 1:
        raise ForwardSolverError(
            f"concentric oracle needs kappa > 0, 0 < rho < 1, n >= 1; got {kappa}, {rho}, {n}"
        )
    mu = (1.0 - kappa) / (1.0 + kappa)
    q = mu * rho ** (2 * n)
    return n * (1.0 - q) / (1.0 + q)


def concentric_dtn_matrix(
    kappa: float,
    rho: float,
    J: int,  # noqa: N803
    K: int,  # noqa: N803
    r: float = 0.0,
) -> OperatorMatrix:
    """Exact Lambda_gamma - Lambda_1 of the concentric inclusion (diagonal)."""
    entries = np.zeros((J, K))
    for j in range(1, min(J, K) + 1):
        n = (j + 1) // 2
        entries[j - 1, j - 1] = analytic_dtn_concentric(kappa, rho, n) - n
    entries *= sobolev_weights(1, J + 1, -r)[:, None]
    return OperatorMatrix(entries=entries, r=r)


def mesh_to_text(mesh: DiskMesh) -> str:
    """Plain-text triangle list: vertex table, then index triples."""
    lines = [f"# vertices {mesh.n_vertices}"]
    lines.extend(f"{x:.17g} {y:.17g}" for x, y in mesh.vertices)
    lines.append(f"# triangles {mesh.n_triangles}")
    lines.extend(f"{a} {b} {c}" for a, b, c in mesh.triangles)
    return "\n".join(lines) + "\n"
