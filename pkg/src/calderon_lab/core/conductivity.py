"""Conductivity fields, the regular link function and the smooth cutoff.

All operations are pure functions over immutable grid fields.
"""

from __future__ import annotations

import numpy as np
import structlog

from calderon_lab.models.conductivity import (
    ConductivityField,
    CutoffField,
    LinkFunction,
    disk_mask,
    grid_radius,
)

logger = structlog.get_logger(__name__)

MEMBERSHIP_TOLERANCE = 1e-12


class ConductivityError(Exception):
    """Base exception for conductivity model errors."""


class LinkDomainError(ConductivityError):
    """Value outside the range (m1, inf) of the link function."""


class GridMismatchError(ConductivityError):
    """Fields sampled on different grids."""


class CutoffOrderError(ConductivityError):
    """Cutoff radii violate 0 < r0 < r1 < 1."""


def link_apply(
    theta: np.ndarray,
    link: LinkFunction | None = None,
    *,
    support_radius: float = 0.75,
) -> ConductivityField:
    """gamma = Phi(theta) pointwise on the grid.

    Args:
        theta: Square grid of real values
        link: Link function (default m1 = 0.5)
        support_radius: Radius of D' recorded on the field

    Returns:
        Conductivity field with m set to the link asymptote
    """
    link = link or LinkFunction()
    values = link.phi(np.asarray(theta, dtype=float))
    return ConductivityField(values=values, m=link.m1, support_radius=support_radius)


def link_invert(gamma: ConductivityField, link: LinkFunction | None = None) -> np.ndarray:
    """theta = Phi^{-1}(gamma) pointwise.

    Raises:
        LinkDomainError: If any sample is at or below m1
    """
    link = link or LinkFunction()
    values = gamma.values
    low = float(values.min())
    if low <= link.m1:
        raise LinkDomainError(
            f"conductivity minimum {low:.6g} is not above the link asymptote {link.m1}"
        )
    return link.phi_inverse(values)


def sup_distance(g1: ConductivityField, g2: ConductivityField) -> float:
    """Sup-norm distance over grid points in the closed disk."""
    if g1.grid_n != g2.grid_n:
        raise GridMismatchError(f"grid sizes differ: {g1.grid_n} vs {g2.grid_n}")
    mask = disk_mask(g1.grid_n)
    return float(np.max(np.abs(g1.values[mask] - g2.values[mask])))


def check_membership(g: ConductivityField, m: float, support_radius: float) -> bool:
    """True iff g lies in the class Gamma_{m, D'} on its grid."""
    if float(g.disk_values().min()) < m:
        return False
    outside = grid_radius(g.grid_n) > support_radius
    return bool(np.all(np.abs(g.values[outside] - 1.0) <= MEMBERSHIP_TOLERANCE))


def smooth_step(t: np.ndarray) -> np.ndarray:
    """s(t) = e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)}), clipped to [0, 1]."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        a = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
        b = np.where(t < 1.0, np.exp(-1.0 / np.where(t < 1.0, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def cutoff_profile(radius: np.ndarray, r0: float, r1: float) -> np.ndarray:
    """Radial cutoff zeta(|x|): 1 inside r0, 0 outside r1."""
    return smooth_step((r1 - np.asarray(radius, dtype=float)) / (r1 - r0))


def make_cutoff(r0: float, r1: float, grid_n: int) -> CutoffField:
    """Sample the smooth cutoff on the conductivity grid.

    Raises:
        CutoffOrderError: Unless 0 < r0 < r1 < 1
    """
    if not 0.0 < r0 < r1 < 1.0:
        raise CutoffOrderError(f"cutoff needs 0 < r0 < r1 < 1, got r0={r0}, r1={r1}")
    values = cutoff_profile(grid_radius(grid_n), r0, r1)
    return CutoffField(r0=r0, r1=r1, values=values)


def bump_profile(radius: np.ndarray, bump_radius: float) -> np.ndarray:
    """C-infinity bump with peak 1 at the origin, zero for |x| >= bump_radius."""
    s = np.asarray(radius, dtype=float) / bump_radius
    inside = s < 1.0
    out = np.zeros_like(s)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def bump_conductivity(
    amplitude: float, radius: float = 0.5, grid_n: int = 65
) -> ConductivityField:
    """gamma = 1 + amplitude * bump, supported in |x| < radius.

    Raises:
        ConductivityError: If the field would not stay positive
    """
    if amplitude <= -1.0:
        raise ConductivityError(f"amplitude {amplitude} makes gamma non-positive")
    if not 0.0 < radius < 1.0:
        raise ConductivityError(f"bump radius must lie in (0, 1), got {radius}")
    values = 1.0 + amplitude * bump_profile(grid_radius(grid_n), radius)
    return ConductivityField(
        values=values, m=min(1.0, 1.0 + amplitude), support_radius=radius
    )


def homogeneous_conductivity(grid_n: int = 65, support_radius: float = 0.75) -> ConductivityField:
    """gamma = 1."""
    return ConductivityField(
        values=np.ones((grid_n, grid_n)), m=1.0, support_radius=support_radius
    )
