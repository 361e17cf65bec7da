"""Rescaled Gaussian process prior for the conductivity parameter theta.

The base field theta' is a stationary Whittle-Matern Gaussian field on the
square [-1, 1]^2, realised as a truncated random Fourier series of period 4;
the prior draw is theta = eps^{2/(alpha+2)} zeta theta'.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations_with_replacement
import math

import numpy as np
import structlog

from calderon_lab.core.rng import PRIOR_STREAM, make_rng
from calderon_lab.models.chain import MaternSpec, PriorDraw
from calderon_lab.models.conductivity import CutoffField, disk_mask, grid_axis, grid_spacing

logger = structlog.get_logger(__name__)

PERIOD = 4.0
MAX_SEMINORM_ORDER = 4


class PriorError(Exception):
    """Base exception for prior sampling errors."""


class UnsupportedOrderError(PriorError):
    """Sobolev order outside the supported range."""


@lru_cache(maxsize=16)
def _fourier_basis(
    spec: MaternSpec, grid_n: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exponentials Ex (k1 = 0..n), Ey (k2 = -n..n) and mode weights W[k2, k1]."""
    n = spec.n_modes
    x = grid_axis(grid_n)
    k1 = np.arange(0, n + 1)
    k2 = np.arange(-n, n + 1)
    omega = 2.0 * math.pi / PERIOD
    ex = np.exp(1j * omega * np.outer(k1, x))
    ey = np.exp(1j * omega * np.outer(k2, x))

    w1, w2 = np.meshgrid(omega * k1, omega * k2, indexing="xy")
    density = (2.0 * spec.nu / spec.ell**2 + w1**2 + w2**2) ** (-float(spec.alpha))
    # half-plane: each +-omega pair once, the constant mode once
    keep = (k1[None, :] > 0) | ((k1[None, :] == 0) & (k2[:, None] >= 0))
    density = np.where(keep, density, 0.0)
    weights = np.sqrt(density / density.sum())
    return ex, ey, weights


def _base_from_rng(spec: MaternSpec, rng: np.random.Generator, grid_n: int) -> np.ndarray:
    ex, ey, weights = _fourier_basis(spec, grid_n)
    a = rng.standard_normal(weights.shape)
    b = rng.standard_normal(weights.shape)
    coeffs = spec.amplitude * weights * (a - 1j * b)
    return np.real(ey.T @ coeffs @ ex)


def sample_base(spec: MaternSpec, seed: int, grid_n: int = 65) -> np.ndarray:
    """Stationary mean-zero Matern field on the grid, marginal variance amplitude^2."""
    return _base_from_rng(spec, make_rng(seed, PRIOR_STREAM), grid_n)


def rescale_factor(eps: float, alpha: int) -> float:
    """eps^{d/(alpha+d)} with d = 2."""
    return eps ** (2.0 / (alpha + 2.0))


def rescale(
    base: np.ndarray,
    eps: float,
    alpha: int,
    zeta: CutoffField,
    seed: int | None = None,
) -> PriorDraw:
    """theta = eps^{2/(alpha+2)} zeta base."""
    if not 0.0 < eps <= 1.0:
        raise PriorError(f"noise level must lie in (0, 1], got {eps}")
    field = np.asarray(base, dtype=float)
    if field.shape != zeta.values.shape:
        raise PriorError(f"base grid {field.shape} differs from cutoff grid {zeta.values.shape}")
    theta = rescale_factor(eps, alpha) * zeta.values * field
    return PriorDraw(theta=theta, eps_used=eps, seed=seed)


def empirical_sobolev_seminorm(field: np.ndarray, order: int) -> float:
    """Finite-difference estimate of the H^order seminorm over the unit disk.

    Sums squared L2 norms of all derivatives d^a/dx^a d^b/dy^b with
    a + b = order (one term per unordered multi-index).
    """
    if not 1 <= order <= MAX_SEMINORM_ORDER:
        raise UnsupportedOrderError(
            f"order must lie in 1..{MAX_SEMINORM_ORDER}, got {order}"
        )
    f = np.asarray(field, dtype=float)
    grid_n = f.shape[0]
    h = grid_spacing(grid_n)
    mask = disk_mask(grid_n)
    total = 0.0
    for axes in combinations_with_replacement((1, 0), order):
        d = f
        for axis in axes:
            d = np.gradient(d, h, axis=axis)
        total += float(np.sum(d[mask] ** 2)) * h * h
    return math.sqrt(total)


class GaussianPrior:
    """The rescaled prior Pi for one noise level: draws theta fields."""

    def __init__(
        self, spec: MaternSpec, eps: float, cutoff: CutoffField
    ) -> None:
        if not 0.0 < eps <= 1.0:
            raise PriorError(f"noise level must lie in (0, 1], got {eps}")
        self.spec = spec
        self.eps = eps
        self.cutoff = cutoff
        self.factor = rescale_factor(eps, spec.alpha)
        self._scaled_cutoff = self.factor * cutoff.values

    @property
    def grid_n(self) -> int:
        return self.cutoff.grid_n

    def draw_theta(self, rng: np.random.Generator) -> np.ndarray:
        return self._scaled_cutoff * _base_from_rng(self.spec, rng, self.grid_n)

    def draw(self, seed: int) -> PriorDraw:
        base = sample_base(self.spec, seed, self.grid_n)
        return rescale(base, self.eps, self.spec.alpha, self.cutoff, seed=seed)
