"""Noisy measurement models, Le Cam conversion kernels and KL utilities.

Three observation schemes are supported: the spectral matrix model, the
electrode model with P equal arcs, and the continuous white-noise model,
represented operationally by ``ContinuousData``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats
from scipy.optimize import brentq
import structlog

from calderon_lab.core.forward import assemble_dtn_matrix
from calderon_lab.core.rng import NOISE_STREAM, REMAINDER_STREAM, make_rng
from calderon_lab.core.spectral import bare_coefficients, hs_norm
from calderon_lab.models.conductivity import ConductivityLike
from calderon_lab.models.measurement import (
    ElectrodeData,
    ElectrodeLayout,
    ProjectedSpectralData,
    SpectralData,
)
from calderon_lab.models.mesh import DiskMesh
from calderon_lab.models.spectral import BasisIndex, OperatorMatrix

logger = structlog.get_logger(__name__)

_SQRT_PI = math.sqrt(math.pi)
TAIL_TOLERANCE = 1e-6
ELECTRODE_MODES_PER_ARC = 8


class MeasurementError(Exception):
    """Base exception for measurement errors."""


class IndexMismatchError(MeasurementError):
    """Operators or data refer to different index r or truncations."""


def synth_spectral(Lambda: OperatorMatrix, eps: float, seed: int) -> SpectralData:  # noqa: N803
    """Y = entries + eps * iid N(0, 1), deterministic given seed."""
    if eps < 0.0:
        raise MeasurementError(f"noise level must be nonnegative, got {eps}")
    rng = make_rng(seed, NOISE_STREAM)
    noise = rng.standard_normal(Lambda.entries.shape)
    return SpectralData(Y=Lambda.entries + eps * noise, eps=eps, r=Lambda.r, seed=seed)


def electrode_basis_coeff(j: int | BasisIndex, p: int, layout: ElectrodeLayout) -> float:
    """a_jp = <phi_j^(0), psi_p> in closed form (p is 1-based)."""
    k = j.k if isinstance(j, BasisIndex) else int(j)
    if k < 0:
        raise MeasurementError(f"basis index must be nonnegative, got {k}")
    a, b = layout.arc(p)
    c = layout.normalizer
    if k == 0:
        return c * (b - a) / math.sqrt(2.0 * math.pi)
    n = (k + 1) // 2
    if k % 2 == 1:
        return c * (math.sin(n * b) - math.sin(n * a)) / (n * _SQRT_PI)
    return c * (math.cos(n * a) - math.cos(n * b)) / (n * _SQRT_PI)


def electrode_matrix(layout: ElectrodeLayout, k_max: int, start: int = 0) -> np.ndarray:
    """A[i, p-1] = a_{start+i, p} for basis indices start..k_max."""
    edges = layout.edges()
    a, b = edges[:-1], edges[1:]
    c = layout.normalizer
    out = np.empty((k_max - start + 1, layout.P))
    for row, k in enumerate(range(start, k_max + 1)):
        if k == 0:
            out[row] = c * (b - a) / math.sqrt(2.0 * math.pi)
            continue
        n = (k + 1) // 2
        if k % 2 == 1:
            out[row] = c * (np.sin(n * b) - np.sin(n * a)) / (n * _SQRT_PI)
        else:
            out[row] = c * (np.cos(n * a) - np.cos(n * b)) / (n * _SQRT_PI)
    return out


def electrode_gram(layout: ElectrodeLayout, J: int) -> np.ndarray:  # noqa: N803
    """<phi_j^P, phi_l^P> for j, l = 1..J, where phi^P is the L2 projection
    onto span(psi_p)."""
    a = electrode_matrix(layout, J, start=1)
    return a @ a.T


def electrode_noiseless(S: OperatorMatrix, layout: ElectrodeLayout) -> np.ndarray:  # noqa: N803
    """<Lambda psi_p, psi_q> = sum_jk a_jp a_kq s_jk from an r = 0 matrix."""
    s = bare_coefficients(S)
    a_j = electrode_matrix(layout, S.J, start=1)
    a_k = electrode_matrix(layout, S.K, start=1)
    return a_j.T @ s @ a_k


def tail_estimate(S: OperatorMatrix) -> float:  # noqa: N803
    """Size of the outermost mode block of S, a proxy for the truncation tail."""
    s = bare_coefficients(S)
    edge = max(1, min(2, S.J, S.K))
    block = np.concatenate([s[-edge:, :].ravel(), s[:, -edge:].ravel()])
    return float(np.linalg.norm(block))


def synth_electrode(
    gamma: ConductivityLike,
    eps: float,
    layout: ElectrodeLayout,
    mesh: DiskMesh,
    seed: int,
    *,
    J_int: int | None = None,  # noqa: N803
) -> ElectrodeData:
    """Electrode observations of gamma with iid N(0, eps^2) noise.

    The noiseless part contracts the assembled DtN matrix (J_int modes)
    with the closed-form arc coefficients a_jp. J_int defaults to 8 P,
    capped at the modes the mesh boundary resolves; an explicit J_int
    beyond that limit is rejected since the aliased rows would bias Y.
    """
    limit = mesh.max_resolved_index
    if J_int is None:
        J_int = min(ELECTRODE_MODES_PER_ARC * layout.P, limit)  # noqa: N806
        if J_int < ELECTRODE_MODES_PER_ARC * layout.P:
            logger.info(
                "Electrode modes capped at boundary resolution",
                P=layout.P,
                J_int=J_int,
                boundary_nodes=len(mesh.boundary_vertices),
            )
    elif not 1 <= J_int <= limit:
        raise MeasurementError(
            f"J_int={J_int} outside 1..{limit}, the modes resolved by "
            f"{len(mesh.boundary_vertices)} boundary nodes"
        )
    S = assemble_dtn_matrix(gamma, J_int, J_int, 0.0, mesh)  # noqa: N806
    return synth_electrode_from_matrix(S, eps, layout, seed)


def synth_electrode_from_matrix(
    S: OperatorMatrix,  # noqa: N803
    eps: float,
    layout: ElectrodeLayout,
    seed: int,
) -> ElectrodeData:
    """Electrode observations from an already assembled DtN matrix."""
    if eps < 0.0:
        raise MeasurementError(f"noise level must be nonnegative, got {eps}")
    tail = tail_estimate(S)
    if tail > TAIL_TOLERANCE:
        logger.warning(
            "Electrode truncation tail above tolerance",
            tail=tail,
            tolerance=TAIL_TOLERANCE,
            J_int=S.J,
            P=layout.P,
        )
    rng = make_rng(seed, NOISE_STREAM)
    noise = rng.standard_normal((layout.P, layout.P))
    return ElectrodeData(
        Y=electrode_noiseless(S, layout) + eps * noise,
        eps=eps,
        layout=layout,
        seed=seed,
        tail_estimate=tail,
    )


def electrode_to_spectral(
    data: ElectrodeData,
    J: int,  # noqa: N803
    K: int,  # noqa: N803
) -> ProjectedSpectralData:
    """Kernel F: Y'_jk = sum_pq a_jp a_kq Y_pq.

    The noise covariance eps^2 kron(G_J, G_K) is reported through its
    maximal entrywise deviation from the identity.
    """
    if J < 1 or K < 1:
        raise MeasurementError(f"truncation must be at least 1 x 1, got {J} x {K}")
    a_j = electrode_matrix(data.layout, J, start=1)
    a_k = electrode_matrix(data.layout, K, start=1)
    gram_j = a_j @ a_j.T
    gram_k = a_k @ a_k.T
    deviation = float(np.max(np.abs(np.kron(gram_j, gram_k) - np.eye(J * K))))
    return ProjectedSpectralData(
        Y=a_j @ data.Y @ a_k.T,
        eps=data.eps,
        P=data.P,
        gram_J=gram_j,
        gram_K=gram_k,
        covariance_deviation=deviation,
    )


class ContinuousData:
    """White-noise observation Y = Lambda + eps W of an r = 0 operator.

    Coefficients Y_jk = s_jk + eps g_jk are indexed over the full basis
    j, k >= 0. The signal is known up to the master truncation of
    ``signal`` (and vanishes whenever j = 0 or k = 0). Noise rows are
    drawn lazily from the stream (seed, j) and memoised, so any finite
    set of queries sees one consistent Gaussian sample.
    """

    def __init__(self, signal: OperatorMatrix, eps: float, seed: int) -> None:
        if eps < 0.0:
            raise MeasurementError(f"noise level must be nonnegative, got {eps}")
        self.signal = signal
        self.eps = eps
        self.seed = seed
        self._s = bare_coefficients(signal)
        self._rows: dict[int, np.ndarray] = {}
        self._row_rngs: dict[int, np.random.Generator] = {}

    @property
    def r(self) -> float:
        return self.signal.r

    def _noise_row(self, j: int, length: int) -> np.ndarray:
        row = self._rows.get(j, np.empty(0))
        if row.shape[0] < length:
            rng = self._row_rngs.setdefault(j, make_rng(self.seed, NOISE_STREAM, j))
            row = np.concatenate([row, rng.standard_normal(length - row.shape[0])])
            self._rows[j] = row
        return row[:length]

    def coefficients(self, J: int, K: int) -> np.ndarray:  # noqa: N803
        """Y_jk for j = 0..J, k = 0..K."""
        noise = np.stack([self._noise_row(j, K + 1) for j in range(J + 1)])
        signal = np.zeros((J + 1, K + 1))
        jj = min(J, self.signal.J)
        kk = min(K, self.signal.K)
        signal[1 : jj + 1, 1 : kk + 1] = self._s[:jj, :kk]
        return signal + self.eps * noise

    def window(self, J: int, K: int) -> SpectralData:  # noqa: N803
        """The spectral-model observation Y_jk, j = 1..J, k = 1..K."""
        return SpectralData(
            Y=self.coefficients(J, K)[1:, 1:], eps=self.eps, r=0.0, seed=self.seed
        )

    def evaluate(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        """Y(u (x) v) for coefficient columns of u and v (rows k = 0..).

        Only the rows present in ``left`` and ``right`` are contracted;
        callers account for what lies beyond.
        """
        J = left.shape[0] - 1  # noqa: N806
        K = right.shape[0] - 1  # noqa: N806
        return left.T @ self.coefficients(J, K) @ right


def spectral_to_electrode(data: ContinuousData, layout: ElectrodeLayout) -> ElectrodeData:
    """Kernel T_pq = psi_p (x) psi_q applied to white-noise data.

    Coefficients up to the master truncation are contracted exactly; the
    Gaussian remainder from modes beyond it has covariance
    eps^2 (I (x) I - Q_J (x) Q_K), Q = A^T A, and is sampled in closed form.
    The output noise is therefore exactly iid N(0, eps^2).
    """
    if data.r != 0.0:
        raise IndexMismatchError(f"electrode kernel needs r = 0 data, got r = {data.r}")
    J, K = data.signal.J, data.signal.K  # noqa: N806
    a_j = electrode_matrix(layout, J)
    a_k = electrode_matrix(layout, K)
    inside = data.evaluate(a_j, a_k)

    a_eig, u = np.linalg.eigh(a_j.T @ a_j)
    b_eig, v = np.linalg.eigh(a_k.T @ a_k)
    scale = np.sqrt(np.clip(1.0 - np.outer(a_eig, b_eig), 0.0, None))
    rng = make_rng(data.seed, REMAINDER_STREAM, layout.P)
    remainder = u @ (scale * rng.standard_normal((layout.P, layout.P))) @ v.T
    return ElectrodeData(
        Y=inside + data.eps * remainder, eps=data.eps, layout=layout, seed=data.seed
    )


def kl_divergence(L1: OperatorMatrix, L0: OperatorMatrix, eps: float) -> float:  # noqa: N803
    """K(p_1, p_0) = (1/2) eps^{-2} ||L1 - L0||_{H_r}^2."""
    _check_pair(L1, L0)
    if eps <= 0.0:
        raise MeasurementError(f"noise level must be positive, got {eps}")
    return 0.5 * hs_norm(L1 - L0) ** 2 / eps**2


def kl_divergence_mc(
    L1: OperatorMatrix,  # noqa: N803
    L0: OperatorMatrix,  # noqa: N803
    eps: float,
    replicates: int,
    seed: int,
    *,
    chunk: int = 10000,
) -> tuple[float, float]:
    """Monte Carlo KL: sample mean and standard error of log(p_1/p_0)(Y), Y ~ p_1.

    With D = L1 - L0 the log-ratio is (||D||^2 + 2 eps <g, D>) / (2 eps^2).
    """
    _check_pair(L1, L0)
    if eps <= 0.0:
        raise MeasurementError(f"noise level must be positive, got {eps}")
    d = (L1 - L0).entries.ravel()
    d2 = float(d @ d)
    rng = make_rng(seed, NOISE_STREAM)
    ratios = np.empty(replicates)
    for start in range(0, replicates, chunk):
        stop = min(start + chunk, replicates)
        g = rng.standard_normal((stop - start, d.shape[0]))
        ratios[start:stop] = (d2 + 2.0 * eps * (g @ d)) / (2.0 * eps**2)
    stderr = float(ratios.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    return float(ratios.mean()), stderr


def _check_pair(L1: OperatorMatrix, L0: OperatorMatrix) -> None:  # noqa: N803
    if not math.isclose(L1.r, L0.r):
        raise IndexMismatchError(f"index mismatch: r={L1.r} vs r={L0.r}")
    if L1.entries.shape != L0.entries.shape:
        raise IndexMismatchError(
            f"truncation mismatch: {L1.entries.shape} vs {L0.entries.shape}"
        )


def two_point_risk_bound(mu: float) -> float:
    """(1/3)(1 - (mu + sqrt(2 mu)) / log 2): minimax risk bound for KL <= mu."""
    if mu < 0.0:
        raise MeasurementError(f"KL bound must be nonnegative, got {mu}")
    return (1.0 - (mu + math.sqrt(2.0 * mu)) / math.log(2.0)) / 3.0


def two_point_threshold(target: float = 0.25) -> float:
    """Smallest mu with two_point_risk_bound(mu) <= target."""
    if target >= two_point_risk_bound(0.0):
        return 0.0
    upper = 1e-3
    while two_point_risk_bound(upper) > target:
        upper *= 2.0
    return float(brentq(lambda m: two_point_risk_bound(m) - target, 0.0, upper, xtol=1e-14))


def chi_square_variance_test(
    samples: np.ndarray, sigma: float, alpha: float = 0.001
) -> tuple[bool, float]:
    """Two-sided chi-square test of Var = sigma^2 for mean-zero samples.

    Returns:
        (passed, p_value)
    """
    x = np.asarray(samples, dtype=float).ravel()
    if sigma <= 0.0:
        raise MeasurementError(f"sigma must be positive, got {sigma}")
    statistic = float(np.sum(x**2)) / sigma**2
    dof = x.shape[0]
    lower = float(stats.chi2.cdf(statistic, dof))
    upper = float(stats.chi2.sf(statistic, dof))
    p_value = min(1.0, 2.0 * min(lower, upper))
    return p_value > alpha, p_value
