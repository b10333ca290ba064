"""Recovery matrices R with Q = RS and the recovered answers y = Rz."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Workload, dominated_ints, popcount, workload_matrix
from .mechanism import NoisyAnswer
from .strategy import StrategyMatrix, assign_centroids, compressed_index
from .transform import fourier_marginal_matrix

RECONSTRUCTION_TOL = 1e-6
# relative cutoff on eigenvalues of S^T Sigma^-1 S (singular values squared)
EIG_CUTOFF = 1e-10


class NotReconstructible(ValueError):
    """The workload is not in the row space of the (unsuppressed) strategy."""


@dataclass(frozen=True)
class RecoveryMatrix:
    R: np.ndarray
    source: str


def _as_dense(S) -> np.ndarray:
    return S.dense() if isinstance(S, StrategyMatrix) else np.asarray(S, dtype=float)


def gls_recovery(Q, S, sigma_diag) -> RecoveryMatrix:
    """Minimum-variance unbiased recovery R = Q (S^T W S)^+ S^T W, W = Sigma^-1.

    Rows with infinite variance (suppressed) get zero weight in R. The
    pseudoinverse is taken through an SVD of W^{1/2} S, which never forms the
    N x N normal matrix.
    """
    Q = np.asarray(Q, dtype=float)
    Sd = _as_dense(S)
    sigma = np.asarray(sigma_diag, dtype=float)
    if sigma.shape != (Sd.shape[0],):
        raise ValueError(f"{sigma.size} variances for {Sd.shape[0]} strategy rows")
    keep = np.isfinite(sigma)
    if np.any(sigma[keep] <= 0):
        raise ValueError("noise variances must be positive")
    w_half = 1.0 / np.sqrt(sigma[keep])
    U, sv, Vt = np.linalg.svd(w_half[:, None] * Sd[keep], full_matrices=False)
    rank = int(np.sum(sv ** 2 > EIG_CUTOFF * sv[0] ** 2)) if sv.size else 0
    U, sv, Vt = U[:, :rank], sv[:rank], Vt[:rank]
    # G = V diag(1/sv) U^T W^{1/2}
    R_keep = ((Q @ Vt.T) / sv) @ U.T * w_half[None, :]
    R = np.zeros((Q.shape[0], Sd.shape[0]))
    R[:, keep] = R_keep
    resid = np.abs(Q - R @ Sd).max() if Q.size else 0.0
    if resid > RECONSTRUCTION_TOL * max(1.0, np.abs(Q).max()):
        raise NotReconstructible(f"workload is not in the strategy's row space (residual {resid:.3g})")
    return RecoveryMatrix(R, "gls")


def _aggregation_block(alpha: int, centroid: int) -> np.ndarray:
    """Rows of marginal alpha as sums of the cells of a dominating marginal."""
    cells = np.array(dominated_ints(centroid))
    pos = compressed_index(cells, alpha)
    blk = np.zeros((1 << popcount(alpha), cells.size))
    blk[pos, np.arange(cells.size)] = 1.0
    return blk


def natural_recovery(workload: Workload, S: StrategyMatrix) -> RecoveryMatrix:
    """The recovery each strategy comes with before any re-weighting.

    Identity aggregates cells, S = Q is read back directly, marginal
    collections aggregate the covering strategy marginal, and Fourier uses
    R = Q S^T computed entrywise.
    """
    if S.d != workload.d:
        raise ValueError("strategy and workload dimensions differ")
    if S.kind == "identity":
        return RecoveryMatrix(workload_matrix(workload), "aggregate")
    if S.kind == "workload" and workload.is_marginal:
        return RecoveryMatrix(np.eye(workload.q), "direct")
    if S.kind == "fourier":
        if not workload.is_marginal:
            raise ValueError("Fourier recovery needs a marginal workload")
        return RecoveryMatrix(fourier_marginal_matrix(workload.marginals, S.masks, S.d), "fourier")
    if S.is_marginal_kind and workload.is_marginal:
        mapping = dict(S.assignment) or assign_centroids(workload.marginals, S.masks)
        col = {c: sl for c, sl in zip(S.masks, S.row_slices())}
        R = np.zeros((workload.q, S.m))
        for a, rows in zip(workload.marginals, workload.marginal_slices()):
            c = mapping[a]
            R[rows, col[c]] = _aggregation_block(a, c)
        return RecoveryMatrix(R, "aggregate")
    if S.kind == "dense" and workload.matrix is not None and S.matrix.shape == workload.matrix.shape \
            and np.array_equal(S.matrix, workload.matrix):
        return RecoveryMatrix(np.eye(workload.q), "direct")
    raise ValueError(f"no natural recovery for strategy kind {S.kind!r}; use GLS")


def predicted_variance(R, sigma_diag, a=None) -> tuple[np.ndarray, float]:
    """Per-entry Var(y_i) = sum_j R_ij^2 sigma_j and the a-weighted total."""
    R = R.R if isinstance(R, RecoveryMatrix) else np.asarray(R, dtype=float)
    sigma = np.asarray(sigma_diag, dtype=float)
    used = R != 0
    if np.any(used & ~np.isfinite(sigma)[None, :]):
        raise ValueError("recovery uses a row with unbounded noise")
    var = (R ** 2) @ np.where(np.isfinite(sigma), sigma, 0.0)
    a = np.ones(R.shape[0]) if a is None else np.asarray(a, dtype=float)
    return var, float(a @ var)


@dataclass
class ReleaseBundle:
    noisy: NoisyAnswer
    recovery: RecoveryMatrix
    y: np.ndarray
    variance: np.ndarray
    total_variance: float
    consistent_y: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)


def answer(R: RecoveryMatrix, z: NoisyAnswer, a=None) -> ReleaseBundle:
    """y = R z, refusing to touch suppressed strategy rows."""
    M = R.R
    if M.shape[1] != z.z.size:
        raise ValueError(f"recovery expects {M.shape[1]} strategy answers, got {z.z.size}")
    if np.any(M[:, z.suppressed] != 0):
        raise ValueError("recovery references a suppressed strategy row")
    live = ~z.suppressed
    y = M[:, live] @ z.z[live]
    var, total = predicted_variance(M, np.where(z.suppressed, np.inf, z.variance), a)
    return ReleaseBundle(noisy=z, recovery=R, y=y, variance=var, total_variance=total)
