"""Unit tests for the rescaled Matern prior."""

from __future__ import annotations

import math

import numpy as np
import pytest

from calderon_lab.core.conductivity import check_membership, link_apply
from calderon_lab.core.prior import (
    GaussianPrior,
    PriorError,
    UnsupportedOrderError,
    empirical_sobolev_seminorm,
    rescale,
    rescale_factor,
    sample_base,
)
from calderon_lab.core.rng import make_rng
from calderon_lab.models.chain import MaternSpec
from calderon_lab.models.conductivity import CutoffField, grid_coordinates, grid_radius


class TestBaseField:
    """Test the stationary Matern base field."""

    def test_zero_amplitude(self) -> None:
        spec = MaternSpec(alpha=6, ell=0.4, amplitude=0.0, n_modes=8)
        assert np.all(sample_base(spec, seed=1, grid_n=17) == 0.0)

    def test_marginal_variance(self) -> None:
        spec = MaternSpec(alpha=6, ell=0.4, amplitude=2.0, n_modes=8)
        centers = np.array([sample_base(spec, seed=s, grid_n=9)[4, 4] for s in range(2000)])
        assert centers.var() == pytest.approx(4.0, rel=0.15)
        assert abs(centers.mean()) < 4.0 * 2.0 / math.sqrt(2000)

    def test_seeds(self, matern_spec: MaternSpec) -> None:
        a = sample_base(matern_spec, seed=3, grid_n=17)
        b = sample_base(matern_spec, seed=3, grid_n=17)
        c = sample_base(matern_spec, seed=4, grid_n=17)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)


class TestRescale:
    """Test the noise-dependent rescaling."""

    def test_factor(self) -> None:
        assert rescale_factor(1e-4, 6) == pytest.approx(0.1)
        assert rescale_factor(1.0, 6) == 1.0

    def test_constant_base(self, cutoff: CutoffField) -> None:
        base = np.full((33, 33), 3.0)
        draw = rescale(base, 1e-4, 6, cutoff, seed=7)
        np.testing.assert_allclose(draw.theta, 0.3 * cutoff.values, rtol=1e-12)
        assert draw.eps_used == 1e-4
        assert draw.seed == 7

    def test_vanishes_outside_support(self, matern_spec: MaternSpec, cutoff: CutoffField) -> None:
        draw = GaussianPrior(matern_spec, 0.01, cutoff).draw(5)
        assert np.all(draw.theta[grid_radius(33) >= cutoff.r1] == 0.0)

    @pytest.mark.parametrize("eps", [0.0, -0.5, 1.5])
    def test_noise_level_range(self, eps: float, cutoff: CutoffField) -> None:
        with pytest.raises(PriorError):
            rescale(np.zeros((33, 33)), eps, 6, cutoff)

    def test_grid_mismatch(self, cutoff: CutoffField) -> None:
        with pytest.raises(PriorError, match="grid"):
            rescale(np.zeros((17, 17)), 0.1, 6, cutoff)


class TestGaussianPrior:
    """Test the prior object used by the chain."""

    def test_draw_matches_rescale(self, matern_spec: MaternSpec, cutoff: CutoffField) -> None:
        prior = GaussianPrior(matern_spec, 0.05, cutoff)
        draw = prior.draw(11)
        expected = rescale(sample_base(matern_spec, 11, 33), 0.05, 6, cutoff)
        np.testing.assert_array_equal(draw.theta, expected.theta)
        assert prior.grid_n == 33
        assert prior.factor == rescale_factor(0.05, 6)

    def test_draw_theta_uses_rng(self, matern_spec: MaternSpec, cutoff: CutoffField) -> None:
        prior = GaussianPrior(matern_spec, 0.05, cutoff)
        a = prior.draw_theta(make_rng(1))
        b = prior.draw_theta(make_rng(1))
        np.testing.assert_array_equal(a, b)
        assert a.shape == (33, 33)

    def test_invalid_noise(self, matern_spec: MaternSpec, cutoff: CutoffField) -> None:
        with pytest.raises(PriorError):
            GaussianPrior(matern_spec, 0.0, cutoff)

    def test_linked_draws_are_admissible(
        self, matern_spec: MaternSpec, cutoff: CutoffField
    ) -> None:
        for seed in range(100):
            theta = rescale(sample_base(matern_spec, seed, 33), 0.1, 6, cutoff).theta
            gamma = link_apply(theta, support_radius=cutoff.r1)
            assert check_membership(gamma, 0.5, cutoff.r1), f"seed {seed}"


class TestSobolevSeminorm:
    """Test the finite-difference seminorm."""

    def test_constant_field(self) -> None:
        assert empirical_sobolev_seminorm(np.full((33, 33), 4.0), 1) == 0.0

    def test_linear_field(self) -> None:
        x, _ = grid_coordinates(65)
        assert empirical_sobolev_seminorm(x, 1) == pytest.approx(math.sqrt(math.pi), rel=0.03)

    def test_homogeneous_in_scale(self) -> None:
        x, y = grid_coordinates(33)
        field = np.sin(2.0 * x) * y
        assert empirical_sobolev_seminorm(3.0 * field, 2) == pytest.approx(
            3.0 * empirical_sobolev_seminorm(field, 2)
        )

    @pytest.mark.parametrize("order", [1, 2])
    def test_stable_under_grid_refinement(self, order: int) -> None:
        norms = []
        for grid_n in (65, 129):
            x, y = grid_coordinates(grid_n)
            norms.append(empirical_sobolev_seminorm(np.exp(-8.0 * (x**2 + y**2)), order))
        assert abs(norms[1] - norms[0]) < 0.05 * norms[1]

    def test_gaussian_gradient_norm(self) -> None:
        # int |grad exp(-8 r^2)|^2 over the plane is pi
        x, y = grid_coordinates(129)
        value = empirical_sobolev_seminorm(np.exp(-8.0 * (x**2 + y**2)), 1)
        assert value == pytest.approx(math.sqrt(math.pi), rel=0.02)

    @pytest.mark.parametrize("order", [0, 5])
    def test_unsupported_order(self, order: int) -> None:
        with pytest.raises(UnsupportedOrderError):
            empirical_sobolev_seminorm(np.zeros((9, 9)), order)
