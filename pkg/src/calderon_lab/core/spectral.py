"""Exact spectral algebra on the boundary circle.

Eigenpairs of the Laplace-Beltrami operator on S^1 are known in closed
form, so Sobolev norms, Hilbert-Schmidt norms between Sobolev scales and
the H^{1/2} -> H^{-1/2} operator norm reduce to weighted matrix algebra.
"""

from __future__ import annotations

import math

import numpy as np
import structlog

from calderon_lab.models.spectral import BasisIndex, BoundaryFunction, OperatorMatrix

logger = structlog.get_logger(__name__)

_SQRT_PI = math.sqrt(math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


class SpectralError(Exception):
    """Base exception for spectral algebra errors."""


class TruncationError(SpectralError):
    """Requested truncation exceeds the stored one."""


def _index(k: int | BasisIndex) -> int:
    if isinstance(k, BasisIndex):
        return k.k
    if k < 0:
        raise SpectralError(f"basis index must be nonnegative, got {k}")
    return int(k)


def eigenvalue(k: int | BasisIndex) -> float:
    """Laplace-Beltrami eigenvalue lambda_k = ceil(k/2)^2."""
    n = (_index(k) + 1) // 2
    return float(n * n)


def eigenvalues(indices: np.ndarray) -> np.ndarray:
    """Vectorised ``eigenvalue`` over an integer array of indices."""
    n = (np.asarray(indices, dtype=np.int64) + 1) // 2
    return (n * n).astype(np.float64)


def sobolev_weights(start: int, stop: int, r: float) -> np.ndarray:
    """(1 + lambda_k)^{r/2} for k = start..stop-1."""
    return (1.0 + eigenvalues(np.arange(start, stop))) ** (r / 2.0)


def basis_eval(k: int | BasisIndex, angle: float | np.ndarray) -> float | np.ndarray:
    """Orthonormal eigenfunction phi_k at the given angle(s).

    phi_0 = 1/sqrt(2 pi), phi_{2n-1} = cos(n t)/sqrt(pi), phi_{2n} = sin(n t)/sqrt(pi).
    """
    idx = _index(k)
    theta = np.asarray(angle, dtype=float)
    if idx == 0:
        value = np.full_like(theta, 1.0 / _SQRT_2PI)
    else:
        n = (idx + 1) // 2
        trig = np.cos if idx % 2 == 1 else np.sin
        value = trig(n * theta) / _SQRT_PI
    return float(value) if value.ndim == 0 else value


def basis_matrix(k_max: int, angles: np.ndarray) -> np.ndarray:
    """Matrix B[i, k] = phi_k(angles[i]) for k = 0..k_max."""
    theta = np.asarray(angles, dtype=float).reshape(-1)
    out = np.empty((theta.shape[0], k_max + 1))
    out[:, 0] = 1.0 / _SQRT_2PI
    for k in range(1, k_max + 1):
        out[:, k] = basis_eval(k, theta)
    return out


def sobolev_norm(f: BoundaryFunction, r: float, *, quotient: bool = False) -> float:
    """H^r(dD) norm: (sum_k (1 + lambda_k)^r c_k^2)^{1/2}.

    With ``quotient=True`` the k = 0 term is dropped, giving the norm of
    H^r(dD)/C (equivalently of the mean-zero representative).
    """
    c = f.coeffs
    weights = sobolev_weights(0, c.shape[0], 2.0 * r)
    terms = weights * c**2
    if quotient:
        terms = terms[1:]
    return float(math.sqrt(float(np.sum(terms))))


def hs_norm(T: OperatorMatrix) -> float:  # noqa: N803
    """H_r Hilbert-Schmidt norm: the Frobenius norm of the coefficients."""
    return float(np.linalg.norm(T.entries))


def hs_inner(S: OperatorMatrix, T: OperatorMatrix) -> float:  # noqa: N803
    """<S, T>_{H_r} = sum_jk s_jk t_jk (common r and shape required)."""
    if S.entries.shape != T.entries.shape or not math.isclose(S.r, T.r):
        raise SpectralError("inner product needs matching shape and index r")
    return float(np.sum(S.entries * T.entries))


def hs_distance(S: OperatorMatrix, T: OperatorMatrix) -> float:  # noqa: N803
    """H_r distance, zero-padding the smaller truncation."""
    if not math.isclose(S.r, T.r):
        raise SpectralError(f"index mismatch: r={S.r} vs r={T.r}")
    J = max(S.J, T.J)
    K = max(S.K, T.K)
    diff = np.zeros((J, K))
    diff[: S.J, : S.K] += S.entries
    diff[: T.J, : T.K] -= T.entries
    return float(np.linalg.norm(diff))


def project(T: OperatorMatrix, J: int, K: int) -> OperatorMatrix:  # noqa: N803
    """pi_JK: zero every coefficient with j > J or k > K (shape kept)."""
    if J > T.J or K > T.K:
        raise TruncationError(
            f"projection ({J}, {K}) exceeds stored truncation ({T.J}, {T.K})"
        )
    entries = np.zeros_like(T.entries)
    entries[:J, :K] = T.entries[:J, :K]
    return T.with_entries(entries)


def truncate(T: OperatorMatrix, J: int, K: int) -> OperatorMatrix:  # noqa: N803
    """Leading J x K block of T as a smaller matrix."""
    if J > T.J or K > T.K:
        raise TruncationError(
            f"truncation ({J}, {K}) exceeds stored truncation ({T.J}, {T.K})"
        )
    return T.with_entries(T.entries[:J, :K])


def rescale_index(T: OperatorMatrix, r_new: float) -> OperatorMatrix:  # noqa: N803
    """Row reweighting t'_jk = (1 + lambda_j)^{(r_new - r)/2} t_jk, tagged r_new.

    Invertible (r -> r' -> r is the identity). To change the basis that
    assembled entries refer to, use ``reweight`` instead.
    """
    if r_new == T.r:
        return T
    row_weights = sobolev_weights(1, T.J + 1, r_new - T.r)
    return OperatorMatrix(entries=row_weights[:, None] * T.entries, r=r_new)


def bare_coefficients(T: OperatorMatrix) -> np.ndarray:  # noqa: N803
    """s_jk = <T phi_j^(0), phi_k^(0)> = (1 + lambda_j)^{r/2} t_jk."""
    if T.r == 0.0:
        return T.entries
    return sobolev_weights(1, T.J + 1, T.r)[:, None] * T.entries


def reweight(S: OperatorMatrix, r: float) -> OperatorMatrix:  # noqa: N803
    """Express an r = 0 matrix against phi_j^(r): t_jk = (1 + lambda_j)^{-r/2} s_jk."""
    s = bare_coefficients(S)
    return OperatorMatrix(entries=sobolev_weights(1, S.J + 1, -r)[:, None] * s, r=r)


def hs_norm_between(T: OperatorMatrix, p: float, q: float) -> float:  # noqa: N803
    """Hilbert-Schmidt norm of T as a map H^p(dD)/C -> H^q(dD).

    Coefficients against the orthonormal bases are
    (1 + lambda_j)^{-p/2} (1 + lambda_k)^{q/2} s_jk.
    """
    s = bare_coefficients(T)
    a = sobolev_weights(1, T.J + 1, -p)[:, None] * s * sobolev_weights(1, T.K + 1, q)
    return float(np.linalg.norm(a))


def op_norm_star(T: OperatorMatrix) -> float:  # noqa: N803
    """Operator norm H^{1/2}(dD)/C -> H^{-1/2}(dD) of the represented operator.

    Largest singular value of A_kj = (1 + lambda_k)^{-1/4} s_jk (1 + lambda_j)^{-1/4}.
    """
    s = bare_coefficients(T)
    if not np.any(s):
        return 0.0
    a = sobolev_weights(1, T.J + 1, -0.5)[:, None] * s * sobolev_weights(1, T.K + 1, -0.5)
    return float(np.linalg.norm(a.T, ord=2))
