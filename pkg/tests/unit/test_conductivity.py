"""Unit tests for conductivity fields, the link function and the cutoff."""

from __future__ import annotations

import math

import numpy as np
from pydantic import ValidationError
import pytest

from calderon_lab.core.conductivity import (
    CutoffOrderError,
    GridMismatchError,
    LinkDomainError,
    bump_conductivity,
    check_membership,
    cutoff_profile,
    homogeneous_conductivity,
    link_apply,
    link_invert,
    make_cutoff,
    sup_distance,
)
from calderon_lab.models.conductivity import (
    ConcentricConductivity,
    ConductivityField,
    LinkFunction,
    grid_axis,
    grid_radius,
)


class TestLinkFunction:
    """Test the softplus link."""

    def test_phi_of_zero_is_one(self) -> None:
        gamma = link_apply(np.zeros((9, 9)))
        assert np.all(gamma.values == 1.0)

    def test_lower_asymptote(self) -> None:
        link = LinkFunction(m1=0.5)
        assert float(link.phi(np.array(-60.0))) == pytest.approx(0.5, abs=1e-12)
        assert np.all(link.phi(np.linspace(-30.0, 30.0, 61)) > 0.5)

    def test_round_trip(self) -> None:
        rng = np.random.default_rng(4)
        theta = rng.normal(scale=3.0, size=(17, 17))
        back = link_invert(link_apply(theta))
        assert np.max(np.abs(back - theta)) < 1e-10

    def test_invert_homogeneous(self) -> None:
        np.testing.assert_allclose(link_invert(homogeneous_conductivity(9)), 0.0, atol=1e-14)

    def test_invert_outside_range(self) -> None:
        values = np.ones((9, 9))
        values[4, 4] = 0.5
        gamma = ConductivityField(values=values, m=0.5, support_radius=0.5)
        with pytest.raises(LinkDomainError):
            link_invert(gamma)

    def test_lipschitz_constants(self) -> None:
        link = LinkFunction(m1=0.5)
        t = np.linspace(-20.0, 20.0, 4001)
        assert np.max(link.derivative(t)) <= link.lipschitz_constant() + 1e-12
        assert link.lipschitz_constant() == pytest.approx(0.5 / math.log(2.0))
        with pytest.raises(ValueError, match="exceed"):
            link.inverse_lipschitz_constant(0.4)
        assert link.inverse_lipschitz_constant(0.9) > 1.0 / link.lipschitz_constant()

    def test_invalid_asymptote(self) -> None:
        with pytest.raises(ValidationError):
            LinkFunction(m1=1.5)

    def test_lipschitz_on_random_fields(self) -> None:
        link = LinkFunction(m1=0.5)
        rng = np.random.default_rng(8)
        for _ in range(20):
            a = rng.normal(scale=3.0, size=(17, 17))
            b = a + rng.normal(scale=0.5, size=(17, 17))
            gap = sup_distance(link_apply(a, link), link_apply(b, link))
            assert gap <= link.lipschitz_constant() * np.max(np.abs(a - b)) + 1e-12

    def test_inverse_lipschitz_above_floor(self) -> None:
        link = LinkFunction(m1=0.5)
        m = 0.8
        floor = float(link.phi_inverse(np.array(m)))
        rng = np.random.default_rng(9)
        for _ in range(20):
            a = link_apply(floor + np.abs(rng.normal(scale=2.0, size=(17, 17))), link)
            b = link_apply(floor + np.abs(rng.normal(scale=2.0, size=(17, 17))), link)
            assert a.values.min() >= m - 1e-12
            gap = np.max(np.abs(link_invert(a, link) - link_invert(b, link)))
            bound = link.inverse_lipschitz_constant(m) * np.max(np.abs(a.values - b.values))
            assert gap <= bound + 1e-10


class TestCutoff:
    """Test the smooth radial cutoff."""

    def test_profile_values(self) -> None:
        r0, r1 = 0.5, 0.75
        assert float(cutoff_profile(np.array(r0 / 2), r0, r1)) == 1.0
        assert float(cutoff_profile(np.array((1 + r1) / 2), r0, r1)) == 0.0
        assert float(cutoff_profile(np.array((r0 + r1) / 2), r0, r1)) == pytest.approx(0.5)

    def test_make_cutoff_grid(self) -> None:
        zeta = make_cutoff(0.5, 0.75, 33)
        assert zeta.grid_n == 33
        radius = grid_radius(33)
        assert np.all(zeta.values[radius <= 0.5] == 1.0)
        assert np.all(zeta.values[radius >= 0.75] == 0.0)

    @pytest.mark.parametrize(("r0", "r1"), [(0.75, 0.5), (0.5, 1.0), (0.0, 0.5)])
    def test_bad_order(self, r0: float, r1: float) -> None:
        with pytest.raises(CutoffOrderError):
            make_cutoff(r0, r1, 17)

    def test_cutoff_forces_identity_outside(self) -> None:
        zeta = make_cutoff(0.5, 0.75, 33)
        theta = 5.0 * zeta.values
        gamma = link_apply(theta)
        assert np.all(gamma.values[grid_radius(33) >= 0.75] == 1.0)


class TestDistances:
    """Test sup distance and class membership."""

    def test_sup_distance_bump(self) -> None:
        gamma = bump_conductivity(0.3, 0.5, 65)
        one = homogeneous_conductivity(65)
        assert sup_distance(one, gamma) == pytest.approx(0.3)
        assert sup_distance(gamma, one) == sup_distance(one, gamma)
        assert sup_distance(gamma, gamma) == 0.0

    def test_grid_mismatch(self) -> None:
        with pytest.raises(GridMismatchError):
            sup_distance(homogeneous_conductivity(9), homogeneous_conductivity(17))

    def test_membership(self) -> None:
        assert check_membership(homogeneous_conductivity(33), 1.0, 0.5)
        assert check_membership(homogeneous_conductivity(33), 0.2, 0.5)

        low = np.ones((33, 33))
        low[16, 16] = 0.4
        field = ConductivityField(values=low, m=0.4, support_radius=0.5)
        assert not check_membership(field, 0.5, 0.5)

        outside = np.ones((33, 33))
        x = grid_axis(33)
        j = int(np.argmin(np.abs(x - 0.95)))
        outside[16, j] = 1.2
        field = ConductivityField(values=outside, m=1.0, support_radius=0.9)
        assert not check_membership(field, 0.5, 0.9)


class TestFields:
    """Test sampled and exact conductivities."""

    def test_contrast_interpolation(self) -> None:
        gamma = bump_conductivity(0.5, 0.5, 65)
        values = gamma.contrast_at(np.array([[0.0, 0.0], [0.9, 0.0]]))
        assert values[0] == pytest.approx(0.5)
        assert values[1] == 0.0

    def test_concentric_exact_and_sampled(self) -> None:
        inclusion = ConcentricConductivity(kappa=2.0, rho=0.5)
        np.testing.assert_array_equal(
            inclusion.contrast_at(np.array([[0.1, 0.1], [0.6, 0.0]])), [1.0, 0.0]
        )
        field = inclusion.to_field(33)
        assert field.values[16, 16] == 2.0
        assert field.m == 1.0

    def test_values_must_be_square(self) -> None:
        with pytest.raises(ValidationError):
            ConductivityField(values=np.ones((4, 5)), m=1.0, support_radius=0.5)

    def test_values_are_read_only(self) -> None:
        field = homogeneous_conductivity(9)
        with pytest.raises(ValueError):
            field.values[0, 0] = 2.0
