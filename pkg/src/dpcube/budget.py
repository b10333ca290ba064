"""Noise budgeting over a grouped strategy.

Given per-row weights b_i = 2 sum_j a_j R_ji^2 and a grouping with constants
C_r, choose one budget eta_r per group. Pure DP spends sum_r C_r eta_r = eps
and minimizes sum_r s_r / eta_r^2; approximate DP spends
sum_r C_r^2 eta_r^2 = eps^2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .mechanism import PrivacySpec, noise_variance
from .strategy import Grouping, recovery_consistent_with_grouping

log = logging.getLogger(__name__)


class NothingToRelease(ValueError):
    """Every group has s_r = 0, so no row is used by the recovery."""


def compute_b(R, a=None) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    a = np.ones(R.shape[0]) if a is None else np.asarray(a, dtype=float)
    if a.shape != (R.shape[0],):
        raise ValueError(f"weights have shape {a.shape}, recovery has {R.shape[0]} rows")
    if np.any(a < 0):
        raise ValueError("weights must be non-negative")
    return 2.0 * (a @ R ** 2)


@dataclass(frozen=True)
class BudgetProblem:
    b: np.ndarray
    grouping: Grouping
    spec: PrivacySpec

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        if b.shape != (self.grouping.m,):
            raise ValueError(f"b has {b.size} entries, grouping covers {self.grouping.m} rows")
        if np.any(b < 0) or not np.all(np.isfinite(b)):
            raise ValueError("b must be finite and non-negative")
        object.__setattr__(self, "b", b)

    @property
    def s(self) -> np.ndarray:
        return self.grouping.group_sums(self.b)

    @property
    def consistent(self) -> bool:
        return recovery_consistent_with_grouping(self.b, self.grouping)


@dataclass(frozen=True)
class BudgetSolution:
    eta: np.ndarray
    eps: np.ndarray
    sigma_diag: np.ndarray
    objective: float
    optimal: bool
    method: str

    @property
    def suppressed(self) -> np.ndarray:
        return self.eps == 0


def _objective(s, eta, spec: PrivacySpec) -> float:
    """a^T Var(y) for group budgets eta; groups with s_r = 0 contribute nothing."""
    used = s > 0
    if np.any(eta[used] <= 0):
        return math.inf
    const = 1.0 if spec.delta is None else math.log(2.0 / spec.delta)
    return float(const * np.sum(s[used] / eta[used] ** 2))


def _finish(p: BudgetProblem, eta: np.ndarray, method: str, optimal: bool) -> BudgetSolution:
    eps = eta[p.grouping.group_of]
    return BudgetSolution(eta=eta, eps=eps, sigma_diag=noise_variance(eps, p.spec),
                          objective=_objective(p.s, eta, p.spec), optimal=optimal, method=method)


def _checked_s(p: BudgetProblem) -> tuple[np.ndarray, np.ndarray]:
    s = p.s
    if not np.any(s > 0):
        raise NothingToRelease("all group weights are zero; nothing to release")
    return s, p.grouping.constants


def solve_pure(p: BudgetProblem) -> BudgetSolution:
    """Closed-form Lagrange solution: eta_r proportional to (s_r / C_r)^(1/3)."""
    if p.spec.delta is not None:
        raise ValueError("solve_pure needs a pure-DP spec")
    s, C = _checked_s(p)
    eps = p.spec.epsilon
    w = np.cbrt(s / C)
    eta = w * eps / np.dot(C, w)
    consistent = p.consistent
    if not consistent:
        log.warning("recovery is not consistent with the grouping; budgets are feasible but "
                    "optimality is not guaranteed")
    return _finish(p, eta, "optimal", consistent)


def solve_approx(p: BudgetProblem) -> BudgetSolution:
    """eta_r^2 = (eps^2 / C_r) sqrt(s_r) / sum_t C_t sqrt(s_t)."""
    if p.spec.delta is None:
        raise ValueError("solve_approx needs an (epsilon, delta) spec")
    s, C = _checked_s(p)
    eps = p.spec.epsilon
    root = np.sqrt(s)
    eta = np.sqrt(eps ** 2 / C * root / np.dot(C, root))
    consistent = p.consistent
    if not consistent:
        log.warning("recovery is not consistent with the grouping; optimality not guaranteed")
    return _finish(p, eta, "optimal", consistent)


def solve(p: BudgetProblem) -> BudgetSolution:
    return solve_pure(p) if p.spec.delta is None else solve_approx(p)


def uniform_budget(p: BudgetProblem) -> BudgetSolution:
    """Same budget for every group, spending the whole privacy budget.

    Groups with s_r = 0 still receive their share, as a uniform mechanism would.
    """
    C = p.grouping.constants
    eps = p.spec.epsilon
    if p.spec.delta is None:
        eta = np.full(C.size, eps / C.sum())
    else:
        eta = np.full(C.size, eps / math.sqrt(np.dot(C, C)))
    return _finish(p, eta, "uniform", p.grouping.g == 1)


def kway_b_closed_form(d: int, k: int) -> np.ndarray:
    """b for the Fourier strategy on all k-way marginals, indexed by coefficient weight 0..k."""
    if not 0 <= k <= d:
        raise ValueError(f"need 0 <= k <= d, got k={k}, d={d}")
    return np.array([2.0 ** (d - k + 1) * comb(d - t, k - t) for t in range(k + 1)])
