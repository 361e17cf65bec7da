"""Unit tests for measurement models, conversion kernels and KL utilities."""

from __future__ import annotations

import math

import numpy as np
import pytest

from calderon_lab.core.conductivity import homogeneous_conductivity
from calderon_lab.core.forward import concentric_dtn_matrix
from calderon_lab.core.measurement import (
    TAIL_TOLERANCE,
    ContinuousData,
    IndexMismatchError,
    MeasurementError,
    chi_square_variance_test,
    electrode_basis_coeff,
    electrode_gram,
    electrode_matrix,
    electrode_noiseless,
    electrode_to_spectral,
    kl_divergence,
    kl_divergence_mc,
    spectral_to_electrode,
    synth_electrode,
    synth_electrode_from_matrix,
    synth_spectral,
    two_point_risk_bound,
    two_point_threshold,
)
from calderon_lab.core.rng import replicate_seed
from calderon_lab.models.conductivity import ConcentricConductivity
from calderon_lab.models.measurement import DataModel, DatasetRecord, ElectrodeLayout
from calderon_lab.models.mesh import DiskMesh
from calderon_lab.models.spectral import BasisIndex, OperatorMatrix


class TestSynthSpectral:
    """Test the spectral noise model."""

    def test_pure_noise_moments(self) -> None:
        eps = 0.5
        data = synth_spectral(OperatorMatrix.zeros(100, 100), eps, seed=1)
        n = data.Y.size
        assert abs(data.Y.mean()) < 3 * eps / math.sqrt(n)
        assert abs(data.Y.var() - eps**2) < 3 * eps**2 * math.sqrt(2.0 / n)

    def test_noiseless(self) -> None:
        S = concentric_dtn_matrix(2.0, 0.5, 4, 4)  # noqa: N806
        data = synth_spectral(S, 0.0, seed=3)
        np.testing.assert_array_equal(data.Y, S.entries)

    def test_deterministic(self) -> None:
        a = synth_spectral(OperatorMatrix.zeros(5, 5), 1.0, seed=9)
        b = synth_spectral(OperatorMatrix.zeros(5, 5), 1.0, seed=9)
        c = synth_spectral(OperatorMatrix.zeros(5, 5), 1.0, seed=10)
        np.testing.assert_array_equal(a.Y, b.Y)
        assert not np.array_equal(a.Y, c.Y)

    def test_negative_noise(self) -> None:
        with pytest.raises(MeasurementError):
            synth_spectral(OperatorMatrix.zeros(2, 2), -0.1, seed=0)

    def test_keeps_index(self) -> None:
        data = synth_spectral(OperatorMatrix.zeros(2, 3, r=1.0), 0.1, seed=0)
        assert data.r == 1.0
        assert (data.J, data.K) == (2, 3)


class TestElectrodeCoefficients:
    """Test closed-form arc coefficients."""

    def test_known_values(self) -> None:
        layout = ElectrodeLayout(P=4)
        assert electrode_basis_coeff(1, 1, layout) == pytest.approx(math.sqrt(2.0) / math.pi)
        for p in range(1, 5):
            assert electrode_basis_coeff(BasisIndex(k=0), p, layout) == pytest.approx(0.5)

    def test_matrix_matches_scalar(self) -> None:
        layout = ElectrodeLayout(P=6)
        A = electrode_matrix(layout, 5)  # noqa: N806
        for k in range(6):
            for p in range(1, 7):
                assert A[k, p - 1] == pytest.approx(electrode_basis_coeff(k, p, layout), abs=1e-15)

    def test_bessel_inequality(self) -> None:
        for P in (4, 16, 256):  # noqa: N806
            norms = np.sum(electrode_matrix(ElectrodeLayout(P=P), 3, start=1) ** 2, axis=1)
            assert np.all(norms <= 1.0 + 1e-12)
        assert np.all(norms > 0.999)

    def test_gram_near_identity(self) -> None:
        gram = electrode_gram(ElectrodeLayout(P=256), 3)
        np.testing.assert_allclose(gram, np.eye(3), atol=1e-3)
        np.testing.assert_allclose(ElectrodeLayout(P=7).gram(), np.eye(7), atol=1e-12)

    def test_arc_bounds(self) -> None:
        layout = ElectrodeLayout(P=4)
        assert layout.arc(1) == (0.0, pytest.approx(math.pi / 2))
        with pytest.raises(ValueError, match="electrode index"):
            layout.arc(5)


class TestSynthElectrode:
    """Test the electrode measurement model."""

    def test_concentric_circulant(self) -> None:
        S = concentric_dtn_matrix(2.0, 0.5, 32, 32)  # noqa: N806
        P = 8  # noqa: N806
        data = synth_electrode_from_matrix(S, 0.0, ElectrodeLayout(P=P), seed=0)
        Y = data.Y  # noqa: N806
        np.testing.assert_allclose(Y, Y.T, atol=1e-12)
        shifted = np.roll(np.roll(Y, 1, axis=0), 1, axis=1)
        np.testing.assert_allclose(Y, shifted, atol=1e-12)
        np.testing.assert_allclose(Y.sum(axis=1), 0.0, atol=1e-12)
        assert data.tail_estimate < TAIL_TOLERANCE

    def test_tail_recorded(self) -> None:
        S = concentric_dtn_matrix(2.0, 0.5, 2, 2)  # noqa: N806
        data = synth_electrode_from_matrix(S, 0.0, ElectrodeLayout(P=4), seed=0)
        assert data.tail_estimate > TAIL_TOLERANCE

    def test_homogeneous_is_pure_noise(self, coarse_mesh: DiskMesh) -> None:
        layout = ElectrodeLayout(P=4)
        data = synth_electrode(homogeneous_conductivity(33), 0.2, layout, coarse_mesh, seed=5)
        expected = synth_electrode_from_matrix(OperatorMatrix.zeros(32, 32), 0.2, layout, seed=5)
        np.testing.assert_array_equal(data.Y, expected.Y)

    def test_many_electrodes_match_oracle(
        self, fitted_mesh: DiskMesh, inclusion: ConcentricConductivity
    ) -> None:
        # 8 P = 512 modes would alias on the 126-node boundary ring
        layout = ElectrodeLayout(P=64)
        data = synth_electrode(inclusion, 0.0, layout, fitted_mesh, seed=0)
        exact = electrode_noiseless(concentric_dtn_matrix(2.0, 0.5, 128, 128), layout)
        rel = np.linalg.norm(data.Y - exact) / np.linalg.norm(exact)
        assert rel < 0.01
        assert data.tail_estimate < 1e-4

    def test_unresolved_modes_rejected(self, coarse_mesh: DiskMesh) -> None:
        gamma = homogeneous_conductivity(33)
        with pytest.raises(MeasurementError, match="boundary nodes"):
            synth_electrode(gamma, 0.1, ElectrodeLayout(P=4), coarse_mesh, seed=0, J_int=64)
        data = synth_electrode(gamma, 0.1, ElectrodeLayout(P=4), coarse_mesh, seed=0, J_int=31)
        assert data.Y.shape == (4, 4)


class TestElectrodeToSpectral:
    """Test the electrode-to-spectral kernel."""

    def test_noiseless_zero(self) -> None:
        data = synth_electrode_from_matrix(
            OperatorMatrix.zeros(8, 8), 0.0, ElectrodeLayout(P=16), 0
        )
        projected = electrode_to_spectral(data, 3, 3)
        assert np.all(projected.Y == 0.0)
        assert projected.correlated_noise
        assert projected.as_spectral(seed=0).r == 0.0

    def test_deviation_decreases_with_electrodes(self) -> None:
        deviations = []
        for P in (16, 32, 64, 128):  # noqa: N806
            data = synth_electrode_from_matrix(
                OperatorMatrix.zeros(4, 4), 1.0, ElectrodeLayout(P=P), 0
            )
            deviations.append(electrode_to_spectral(data, 3, 3).covariance_deviation)
        assert all(b < a for a, b in zip(deviations, deviations[1:], strict=False))
        assert deviations[2] < 0.1

    def test_bad_window(self) -> None:
        data = synth_electrode_from_matrix(OperatorMatrix.zeros(4, 4), 1.0, ElectrodeLayout(P=8), 0)
        with pytest.raises(MeasurementError):
            electrode_to_spectral(data, 0, 3)


class TestContinuousData:
    """Test the white-noise observation and the spectral-to-electrode kernel."""

    def test_windows_are_consistent(self) -> None:
        data = ContinuousData(OperatorMatrix.zeros(8, 8), 1.0, seed=2)
        small = data.window(3, 3).Y
        big = data.coefficients(5, 5)
        np.testing.assert_array_equal(small, big[1:4, 1:4])

        fresh = ContinuousData(OperatorMatrix.zeros(8, 8), 1.0, seed=2)
        np.testing.assert_array_equal(fresh.coefficients(5, 5), big)

    def test_signal_placement(self) -> None:
        S = concentric_dtn_matrix(2.0, 0.5, 4, 4)  # noqa: N806
        coeffs = ContinuousData(S, 0.0, seed=0).coefficients(6, 6)
        np.testing.assert_array_equal(coeffs[1:5, 1:5], S.entries)
        assert np.all(coeffs[0] == 0.0)
        assert np.all(coeffs[5:] == 0.0)

    def test_noiseless_contraction(self) -> None:
        S = concentric_dtn_matrix(2.0, 0.5, 16, 16)  # noqa: N806
        layout = ElectrodeLayout(P=8)
        out = spectral_to_electrode(ContinuousData(S, 0.0, seed=0), layout)
        np.testing.assert_allclose(out.Y, electrode_noiseless(S, layout), atol=1e-12)

    def test_needs_plain_index(self) -> None:
        data = ContinuousData(OperatorMatrix.zeros(4, 4, r=1.0), 1.0, seed=0)
        with pytest.raises(IndexMismatchError):
            spectral_to_electrode(data, ElectrodeLayout(P=4))

    def test_output_noise_is_white(self) -> None:
        P = 4  # noqa: N806
        replicates = 2000
        layout = ElectrodeLayout(P=P)
        signal = OperatorMatrix.zeros(16, 16)
        samples = np.stack(
            [
                spectral_to_electrode(
                    ContinuousData(signal, 1.0, replicate_seed(7, i)), layout
                ).Y.ravel()
                for i in range(replicates)
            ]
        )
        cov = samples.T @ samples / replicates
        assert np.max(np.abs(cov - np.eye(P * P))) < 5.0 * math.sqrt(2.0 / replicates)
        passed, _ = chi_square_variance_test(samples, 1.0)
        assert passed


class TestKullbackLeibler:
    """Test KL divergence between spectral models."""

    def test_identical(self) -> None:
        S = concentric_dtn_matrix(2.0, 0.5, 4, 4)  # noqa: N806
        assert kl_divergence(S, S, 0.1) == 0.0

    def test_closed_form(self) -> None:
        L1 = OperatorMatrix(entries=[[0.2, 0.0], [0.0, 0.0]])  # noqa: N806
        assert kl_divergence(L1, OperatorMatrix.zeros(2, 2), 0.1) == pytest.approx(2.0)

    def test_monte_carlo_agrees(self) -> None:
        L1 = concentric_dtn_matrix(2.0, 0.5, 4, 4)  # noqa: N806
        L0 = OperatorMatrix.zeros(4, 4)  # noqa: N806
        closed = kl_divergence(L1, L0, 0.1)
        mean, stderr = kl_divergence_mc(L1, L0, 0.1, 100_000, seed=0)
        assert abs(mean - closed) <= 3.0 * stderr

    def test_mismatch(self) -> None:
        with pytest.raises(IndexMismatchError):
            kl_divergence(OperatorMatrix.zeros(2, 2), OperatorMatrix.zeros(2, 2, r=1.0), 0.1)
        with pytest.raises(IndexMismatchError):
            kl_divergence(OperatorMatrix.zeros(2, 2), OperatorMatrix.zeros(3, 2), 0.1)
        with pytest.raises(MeasurementError):
            kl_divergence(OperatorMatrix.zeros(2, 2), OperatorMatrix.zeros(2, 2), 0.0)


class TestTwoPointBound:
    """Test the two-point minimax risk bound."""

    def test_values(self) -> None:
        assert two_point_risk_bound(0.0) == 1.0 / 3.0
        assert two_point_risk_bound(0.01) == pytest.approx(0.260514, abs=1e-6)

    def test_threshold(self) -> None:
        mu = two_point_threshold(0.25)
        assert 0.01 < mu < 0.05
        assert two_point_risk_bound(mu) == pytest.approx(0.25, abs=1e-12)
        assert two_point_threshold(0.5) == 0.0

    def test_negative(self) -> None:
        with pytest.raises(MeasurementError):
            two_point_risk_bound(-0.1)


class TestChiSquare:
    """Test the variance test and dataset records."""

    def test_variance_test(self) -> None:
        rng = np.random.default_rng(1)
        x = 0.3 * rng.standard_normal(10_000)
        assert chi_square_variance_test(x, 0.3)[0]
        assert not chi_square_variance_test(1.5 * x, 0.3)[0]

    def test_dataset_record_round_trip(self) -> None:
        data = synth_spectral(OperatorMatrix.zeros(3, 4, r=0.5), 0.1, seed=4)
        record = DatasetRecord.from_spectral(data)
        assert record.model == DataModel.SPECTRAL
        back = record.to_data()
        np.testing.assert_array_equal(back.Y, data.Y)
        assert back.r == 0.5
