"""Least-squares consistency for released answers.

Marginal workloads are made consistent by fitting the Fourier coefficients
they depend on; general workloads go through a row-basis decomposition Q = C Q'.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .core import Workload, popcount
from .strategy import fourier_masks
from .transform import fourier_marginal_matrix

DIRECT_LIMIT = 10_000
CG_TOL = 1e-10


@dataclass(frozen=True)
class FourierRecoverySystem:
    d: int
    marginals: tuple[int, ...]
    masks: tuple[int, ...]
    R: np.ndarray

    @property
    def K(self) -> int:
        return self.R.shape[0]

    @property
    def m(self) -> int:
        return len(self.masks)


def build_fourier_system(workload: Workload | list[int], d: int | None = None) -> FourierRecoverySystem:
    if isinstance(workload, Workload):
        if not workload.is_marginal:
            raise ValueError("Fourier consistency needs a marginal workload")
        marginals, d = tuple(workload.marginals), workload.d
    else:
        marginals = tuple(int(a) for a in workload)
        if d is None:
            raise ValueError("d is required with a bare marginal list")
    if not marginals:
        raise ValueError("empty workload")
    masks = fourier_masks(marginals)
    return FourierRecoverySystem(d, marginals, masks, fourier_marginal_matrix(marginals, masks, d))


def ls_consistent(system: FourierRecoverySystem, noisy) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients minimizing ||R f - noisy||_2, and the consistent answers R f."""
    noisy = np.asarray(noisy, dtype=float)
    if noisy.shape != (system.K,):
        raise ValueError(f"expected {system.K} noisy answers, got shape {noisy.shape}")
    R = system.R
    if max(R.shape) <= DIRECT_LIMIT:
        coeffs = np.linalg.lstsq(R, noisy, rcond=None)[0]
    else:
        normal = scipy.sparse.linalg.LinearOperator((system.m, system.m), matvec=lambda v: R.T @ (R @ v))
        coeffs, info = scipy.sparse.linalg.cg(normal, R.T @ noisy, rtol=CG_TOL, maxiter=10 * system.m)
        if info != 0:
            raise RuntimeError(f"conjugate gradient did not converge (info={info})")
    return coeffs, R @ coeffs


def fourier_projection(system: FourierRecoverySystem) -> np.ndarray:
    """The K x K orthogonal projector onto the consistent answers."""
    return system.R @ np.linalg.pinv(system.R)


def consistent_marginals(system: FourierRecoverySystem, noisy) -> list[np.ndarray]:
    _, ybar = ls_consistent(system, noisy)
    sizes = np.cumsum([1 << popcount(a) for a in system.marginals])[:-1]
    return np.split(ybar, sizes)


def independent_rows(Q, tol: float | None = None) -> np.ndarray:
    """Indices of a maximal linearly independent set of rows (pivoted QR)."""
    Q = np.asarray(Q, dtype=float)
    _, r, piv = scipy.linalg.qr(Q.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0:
        return np.array([], dtype=int)
    if tol is None:
        tol = max(Q.shape) * np.finfo(float).eps * diag[0]
    return np.sort(piv[: int(np.sum(diag > tol))])


def rank_consistent(Q, y0) -> np.ndarray:
    """Closest consistent answer in L2 using only rank(Q) variables."""
    Q = np.asarray(Q, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    rows = independent_rows(Q)
    if rows.size == Q.shape[0]:
        return y0.copy()
    Qp = Q[rows]
    # Q = C Q'
    C = np.linalg.lstsq(Qp.T, Q.T, rcond=None)[0].T
    y = np.linalg.lstsq(C, y0, rcond=None)[0]
    return C @ y
