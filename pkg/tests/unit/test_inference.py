"""Unit tests for the pCN sampler and the truncation estimator."""

from __future__ import annotations

import math

import numpy as np
from pydantic import ValidationError
import pytest

from calderon_lab.core import inference
from calderon_lab.core.conductivity import bump_conductivity
from calderon_lab.core.forward import DtnAssembler, concentric_dtn_matrix
from calderon_lab.core.inference import (
    CacheCoherenceError,
    InferenceError,
    acceptance_probability,
    check_coherence,
    contraction_rate,
    gaussian_log_likelihood,
    initial_state,
    log_likelihood,
    optimal_truncation,
    pcn_step,
    run_chain,
    truncation_estimator,
)
from calderon_lab.core.measurement import kl_divergence, synth_spectral
from calderon_lab.core.prior import GaussianPrior
from calderon_lab.core.rng import make_rng
from calderon_lab.core.spectral import hs_norm
from calderon_lab.models.chain import ChainState, LikelihoodContext, MaternSpec
from calderon_lab.models.conductivity import CutoffField
from calderon_lab.models.measurement import SpectralData
from calderon_lab.models.mesh import DiskMesh
from calderon_lab.models.spectral import OperatorMatrix


@pytest.fixture
def context(coarse_mesh: DiskMesh, cutoff: CutoffField) -> LikelihoodContext:
    data = synth_spectral(OperatorMatrix.zeros(2, 2), 0.1, seed=1)
    return LikelihoodContext(data=data, assembler=DtnAssembler(coarse_mesh, 2, 2), cutoff=cutoff)


@pytest.fixture
def prior(matern_spec: MaternSpec, cutoff: CutoffField) -> GaussianPrior:
    return GaussianPrior(matern_spec, 0.1, cutoff)


class TestLikelihood:
    """Test the Gaussian log-likelihood."""

    def test_worked_example(self) -> None:
        data = SpectralData(Y=[[1.0]], eps=0.5)
        dtn = OperatorMatrix(entries=[[1.0]])
        assert gaussian_log_likelihood(data, dtn) == pytest.approx(2.0)

    def test_maximised_at_data(self) -> None:
        data = SpectralData(Y=[[0.3, -0.1]], eps=0.2)
        at_data = gaussian_log_likelihood(data, OperatorMatrix(entries=[[0.3, -0.1]]))
        elsewhere = gaussian_log_likelihood(data, OperatorMatrix(entries=[[0.2, 0.0]]))
        assert at_data > elsewhere

    def test_shape_and_noise_checks(self) -> None:
        with pytest.raises(InferenceError):
            gaussian_log_likelihood(SpectralData(Y=[[1.0]], eps=0.5), OperatorMatrix.zeros(2, 2))
        with pytest.raises(InferenceError):
            gaussian_log_likelihood(SpectralData(Y=[[1.0]], eps=0.0), OperatorMatrix.zeros(1, 1))

    def test_homogeneous_field(self, context: LikelihoodContext) -> None:
        assert log_likelihood(np.zeros((33, 33)), context) == 0.0

    def test_zero_weight(self, context: LikelihoodContext) -> None:
        flat = context.model_copy(update={"weight": 0.0})
        assert log_likelihood(np.ones((33, 33)), flat) == 0.0

    def test_context_window_checked(self, coarse_mesh: DiskMesh, cutoff: CutoffField) -> None:
        data = synth_spectral(OperatorMatrix.zeros(3, 3), 0.1, seed=1)
        with pytest.raises(ValidationError, match="window"):
            LikelihoodContext(data=data, assembler=DtnAssembler(coarse_mesh, 2, 2), cutoff=cutoff)
        with pytest.raises(ValidationError, match="r="):
            LikelihoodContext(
                data=synth_spectral(OperatorMatrix.zeros(2, 2), 0.1, seed=1),
                assembler=DtnAssembler(coarse_mesh, 2, 2, r=1.0),
                cutoff=cutoff,
            )

    @pytest.mark.slow
    def test_log_likelihood_ratio_matches_kl(
        self, context: LikelihoodContext, prior: GaussianPrior
    ) -> None:
        """Under Y ~ P_0 the ratio l_0 - l_1 has mean KL and variance 2 KL."""
        theta0 = np.zeros((33, 33))
        theta1 = prior.draw_theta(make_rng(7))
        dtn1 = inference.forward_map(theta1, context)
        dtn0 = OperatorMatrix.zeros(2, 2)
        assert hs_norm(dtn1) > 0.0
        eps = hs_norm(dtn1) / math.sqrt(2.0)
        kl = kl_divergence(dtn1, dtn0, eps)
        assert kl == pytest.approx(1.0)

        n = 400
        ratios = np.empty(n)
        for seed in range(n):
            ctx = context.model_copy(update={"data": synth_spectral(dtn0, eps, seed=seed)})
            l1 = log_likelihood(theta1, ctx)
            if seed < 3:
                assert l1 == pytest.approx(gaussian_log_likelihood(ctx.data, dtn1), rel=1e-12)
            ratios[seed] = log_likelihood(theta0, ctx) - l1
        assert abs(ratios.mean() - kl) <= 3.0 * math.sqrt(2.0 * kl / n)
        assert abs(ratios.var(ddof=1) / (2.0 * kl) - 1.0) <= 3.0 * math.sqrt(2.0 / (n - 1))


class TestAcceptance:
    """Test the Metropolis acceptance rule."""

    def test_values(self) -> None:
        assert acceptance_probability(0.5) == 1.0
        assert acceptance_probability(0.0) == 1.0
        assert acceptance_probability(-1.0) == pytest.approx(math.exp(-1.0))
        assert acceptance_probability(float("nan")) == 0.0
        assert acceptance_probability(float("-inf")) == 0.0


class TestPcnStep:
    """Test single pCN moves and cache coherence."""

    def test_step_counts(self, context: LikelihoodContext, prior: GaussianPrior) -> None:
        state = initial_state(np.zeros((33, 33)), context)
        rng = make_rng(4)
        for expected in (1, 2, 3):
            state = pcn_step(state, 0.3, context, prior, rng)
            assert state.step == expected
            check_coherence(state, context)

    def test_bad_step_size(self, context: LikelihoodContext, prior: GaussianPrior) -> None:
        state = initial_state(np.zeros((33, 33)), context)
        for beta in (0.0, 1.5):
            with pytest.raises(InferenceError):
                pcn_step(state, beta, context, prior, make_rng(0))

    def test_stale_cache_detected(self, context: LikelihoodContext) -> None:
        stale = ChainState(theta=np.zeros((33, 33)), dtn=OperatorMatrix.zeros(2, 2), loglik=5.0)
        with pytest.raises(CacheCoherenceError):
            check_coherence(stale, context)


class TestRunChain:
    """Test full chains on a coarse mesh."""

    def test_prior_chain_accepts_everything(
        self, context: LikelihoodContext, prior: GaussianPrior
    ) -> None:
        flat = context.model_copy(update={"weight": 0.0})
        summary = run_chain(flat, prior, 0.5, n_iter=40, burn_in=10, seed=2)
        assert summary.acceptance_rate == 1.0
        assert summary.mean_theta.shape == (33, 33)

    def test_short_chain(self, context: LikelihoodContext, prior: GaussianPrior) -> None:
        truth = bump_conductivity(0.0, 0.5, 33)
        summary = run_chain(
            context, prior, 0.2, n_iter=6, burn_in=2, seed=3,
            coherence_check_every=2, truth=truth,
        )
        assert summary.chain_length == 6
        assert summary.burn_in == 2
        assert len(summary.trace) == 6
        assert [row[0] for row in summary.trace] == [1, 2, 3, 4, 5, 6]
        assert summary.sup_error is not None
        assert summary.mesh_h == context.assembler.mesh.h
        assert summary.burn_in_mesh_h is None
        assert np.all(summary.mean_gamma > 0.0)

    def test_reproducible(self, context: LikelihoodContext, prior: GaussianPrior) -> None:
        a = run_chain(context, prior, 0.2, n_iter=4, burn_in=1, seed=9, keep_trace=False)
        b = run_chain(context, prior, 0.2, n_iter=4, burn_in=1, seed=9, keep_trace=False)
        np.testing.assert_array_equal(a.mean_theta, b.mean_theta)
        assert a.trace == []

    def test_coarse_burn_in(
        self, context: LikelihoodContext, prior: GaussianPrior, coarse_mesh: DiskMesh
    ) -> None:
        summary = run_chain(
            context, prior, 0.2, n_iter=4, burn_in=2, seed=1, coarse_ctx=context
        )
        assert summary.burn_in_mesh_h == coarse_mesh.h

    def test_burn_in_must_be_shorter(
        self, context: LikelihoodContext, prior: GaussianPrior
    ) -> None:
        with pytest.raises(InferenceError):
            run_chain(context, prior, 0.2, n_iter=5, burn_in=5, seed=0)


class TestTruncation:
    """Test the truncation estimator, the test statistic and the rates."""

    def test_estimator_block(self) -> None:
        data = synth_spectral(concentric_dtn_matrix(2.0, 0.5, 4, 4), 0.0, seed=0)
        estimate = truncation_estimator(data, 2)
        np.testing.assert_array_equal(estimate.entries, data.Y[:2, :2])
        for J in (0, 5):  # noqa: N806
            with pytest.raises(InferenceError):
                truncation_estimator(data, J)

    def test_statistic(self) -> None:
        signal = concentric_dtn_matrix(2.0, 0.5, 4, 4)
        data = synth_spectral(signal, 0.0, seed=0)
        null = OperatorMatrix.zeros(4, 4)
        assert inference.test_statistic(data, null, 2, 0.01) == 1
        assert inference.test_statistic(data, null, 2, 10.0) == 0
        assert inference.test_statistic(data, signal, 2, 1e-12) == 0

    def test_optimal_truncation(self) -> None:
        assert optimal_truncation(0.05, 6) == 2
        assert optimal_truncation(0.9, 6) == 1
        with pytest.raises(InferenceError):
            optimal_truncation(0.0, 6)

    def test_contraction_rate(self) -> None:
        assert contraction_rate(math.exp(-4.0), 0.5) == pytest.approx(0.5)
        assert contraction_rate(1e-6, 1.0) < contraction_rate(1e-3, 1.0)
        for eps in (0.0, 1.0):
            with pytest.raises(InferenceError):
                contraction_rate(eps, 1.0)
