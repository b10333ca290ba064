"""Sensitivity, noise calibration and the noisy strategy release z = Sx + nu."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .strategy import StrategyMatrix

log = logging.getLogger(__name__)

PRIVACY_SLACK = 1e-12


class PrivacyViolation(ValueError):
    """Per-row budgets exceed the total privacy budget on some column."""


@dataclass(frozen=True)
class PrivacySpec:
    epsilon: float
    delta: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    @property
    def mode(self) -> str:
        return "pure" if self.delta is None else "approx"

    @property
    def p(self) -> int:
        """Norm the privacy constraint is taken in: L1 for Laplace, L2 for Gaussian."""
        return 1 if self.delta is None else 2


def noise_variance(eps_i, spec: PrivacySpec) -> np.ndarray:
    """Per-row noise variance for per-row budgets eps_i (inf where eps_i == 0).

    Laplace: 2 / eps_i^2. Gaussian: 2 log(2/delta) / eps_i^2.
    """
    e = np.asarray(eps_i, dtype=float)
    const = 2.0 if spec.delta is None else 2.0 * math.log(2.0 / spec.delta)
    with np.errstate(divide="ignore"):
        return np.where(e > 0, const / np.where(e > 0, e, 1.0) ** 2, np.inf)


def _column_norms(M, p: int) -> np.ndarray:
    if isinstance(M, StrategyMatrix):
        return M.column_load(np.ones(M.m), p) ** (1.0 / p)
    M = np.asarray(M, dtype=float)
    return (np.abs(M) ** p).sum(axis=0) ** (1.0 / p)


def l1_sensitivity(M) -> float:
    """Max column L1 norm."""
    if isinstance(M, StrategyMatrix):
        if M.kind == "identity":
            return 1.0
        if M.is_marginal_kind:
            return float(len(M.masks))
        if M.kind == "fourier":
            return len(M.masks) * 2.0 ** (-M.d / 2)
    return float(_column_norms(M, 1).max())


def l2_sensitivity(M) -> float:
    """Max column L2 norm."""
    if isinstance(M, StrategyMatrix):
        if M.kind == "identity":
            return 1.0
        if M.is_marginal_kind:
            return math.sqrt(len(M.masks))
        if M.kind == "fourier":
            return math.sqrt(len(M.masks) * 2.0 ** (-M.d))
    return float(_column_norms(M, 2).max())


def privacy_cost(S: StrategyMatrix, eps_i, spec: PrivacySpec) -> float:
    """max_j (sum_i |S_ij|^p eps_i^p)^(1/p), to be compared with epsilon."""
    return float(S.column_load(eps_i, spec.p).max() ** (1.0 / spec.p))


def check_privacy(S: StrategyMatrix, eps_i, spec: PrivacySpec) -> float:
    e = np.asarray(eps_i, dtype=float)
    if np.any(e < 0) or not np.all(np.isfinite(e)):
        raise PrivacyViolation("per-row budgets must be finite and non-negative")
    cost = privacy_cost(S, e, spec)
    if cost > spec.epsilon + PRIVACY_SLACK * max(1.0, spec.epsilon):
        raise PrivacyViolation(f"budgets spend {cost!r} > epsilon {spec.epsilon!r}")
    return cost


def sample_laplace(rng: np.random.Generator, scale: np.ndarray, size) -> np.ndarray:
    """Inverse-CDF Laplace draws with the given scale (std = scale * sqrt 2)."""
    u = rng.random(size) - 0.5
    # 1 - 2|u| lies in (0, 1]; rng.random() never returns exactly 1
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def sample_noise(rng: np.random.Generator, variance: np.ndarray, spec: PrivacySpec, size) -> np.ndarray:
    var = np.asarray(variance, dtype=float)
    if spec.delta is None:
        return sample_laplace(rng, np.sqrt(var / 2.0), size)
    return rng.standard_normal(size) * np.sqrt(var)


@dataclass(frozen=True)
class NoisyAnswer:
    z: np.ndarray
    variance: np.ndarray
    suppressed: np.ndarray
    seed: int | None
    spec: PrivacySpec

    @property
    def per_row_scale(self) -> np.ndarray:
        """Noise standard deviation per row; 0 for suppressed rows."""
        return np.where(self.suppressed, 0.0, np.sqrt(np.where(self.suppressed, 0.0, self.variance)))


def release(S: StrategyMatrix, x, budgets, spec: PrivacySpec, seed: int | None,
            noiseless: bool = False) -> NoisyAnswer:
    """Answer every unsuppressed row of S with calibrated noise.

    Rows with a zero budget are suppressed: their answer is NaN and they must
    not be used downstream. ``noiseless`` is a test hook returning Sx exactly.
    """
    eps_i = np.asarray(budgets, dtype=float)
    check_privacy(S, eps_i, spec)
    suppressed = eps_i == 0
    var = noise_variance(eps_i, spec)
    exact = S.apply(x)
    if noiseless:
        z = exact
    else:
        log.info("sampling %s noise for %d rows with seed %s", spec.mode, S.m, seed)
        rng = np.random.default_rng(seed)
        noise = sample_noise(rng, np.where(suppressed, 0.0, var), spec, S.m)
        z = exact + noise
    z = np.where(suppressed, np.nan, z)
    return NoisyAnswer(z, var, suppressed, seed, spec)
