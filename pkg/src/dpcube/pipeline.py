"""One pass of the strategy -> budget -> recovery -> consistency framework."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import budget as budgeting
from .consistency import (build_fourier_system, fourier_projection, independent_rows,
                          ls_consistent, rank_consistent)
from .core import Workload, workload_matrix
from .mechanism import PrivacySpec, release
from .recovery import (ReleaseBundle, RecoveryMatrix, answer, gls_recovery, natural_recovery,
                       predicted_variance)
from .strategy import Grouping, StrategyMatrix, build_strategy


@dataclass(frozen=True)
class PipelineConfig:
    """How to answer a workload.

    ``recovery`` is ``natural`` (the strategy's own aggregation, falling back to
    GLS when there is none) or ``gls``.
    """

    strategy: str = "workload"
    budget: str = "optimal"
    recovery: str = "natural"
    consistency: bool = False
    centroids: tuple[int, ...] | None = None
    assign: dict = field(default_factory=dict)
    matrix: np.ndarray | None = None
    label: str | None = None

    def __post_init__(self):
        if self.budget not in ("uniform", "optimal"):
            raise ValueError(f"budget must be 'uniform' or 'optimal', not {self.budget!r}")
        if self.recovery not in ("natural", "gls"):
            raise ValueError(f"recovery must be 'natural' or 'gls', not {self.recovery!r}")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        base = {"identity": "I", "workload": "Q", "fourier": "F", "marginals": "C",
                "hierarchical": "H", "dense": "S"}.get(self.strategy, self.strategy)
        return base + ("+" if self.budget == "optimal" else "") + ("/gls" if self.recovery == "gls" else "")


@dataclass
class Plan:
    config: PipelineConfig
    workload: Workload
    spec: PrivacySpec
    strategy: StrategyMatrix
    grouping: Grouping
    b: np.ndarray
    budget: budgeting.BudgetSolution
    recovery: RecoveryMatrix
    variance: np.ndarray
    total_variance: float
    projector: np.ndarray | None = None
    consistent_variance: np.ndarray | None = None

    @property
    def eps(self) -> np.ndarray:
        return self.budget.eps


def _projector(workload: Workload) -> np.ndarray:
    if workload.is_marginal:
        return fourier_projection(build_fourier_system(workload))
    Q = workload.matrix
    rows = independent_rows(Q)
    if rows.size == Q.shape[0]:
        return np.eye(Q.shape[0])
    C = np.linalg.lstsq(Q[rows].T, Q.T, rcond=None)[0].T
    return C @ np.linalg.pinv(C)


def make_plan(config: PipelineConfig, workload: Workload, spec: PrivacySpec) -> Plan:
    """Everything that does not depend on the data: S, budgets, R, predicted variance."""
    S, G = build_strategy(config.strategy, workload, centroids=config.centroids,
                          assign=config.assign, matrix=config.matrix)
    try:
        R0 = natural_recovery(workload, S)
    except ValueError:
        R0 = None
    if R0 is None:
        # no natural recovery: budget against the GLS recovery under uniform noise
        uni = budgeting.uniform_budget(budgeting.BudgetProblem(np.ones(S.m), G, spec))
        R0 = gls_recovery(workload_matrix(workload), S, uni.sigma_diag)
    b = budgeting.compute_b(R0.R, workload.weights)
    problem = budgeting.BudgetProblem(b, G, spec)
    sol = budgeting.solve(problem) if config.budget == "optimal" else budgeting.uniform_budget(problem)
    sigma = np.where(sol.suppressed, np.inf, sol.sigma_diag)
    if config.recovery == "gls" or R0.source == "gls":
        R = gls_recovery(workload_matrix(workload), S, sigma)
    else:
        R = R0
    var, total = predicted_variance(R, sigma, workload.weights)
    plan = Plan(config, workload, spec, S, G, b, sol, R, var, total)
    if config.consistency:
        P = _projector(workload)
        PR = P @ R.R
        plan.projector = P
        plan.consistent_variance = (PR ** 2) @ np.where(np.isfinite(sigma), sigma, 0.0)
    return plan


def run_release(plan: Plan, x, seed: int | None, noiseless: bool = False) -> ReleaseBundle:
    z = release(plan.strategy, x, plan.eps, plan.spec, seed, noiseless=noiseless)
    bundle = answer(plan.recovery, z, plan.workload.weights)
    if plan.config.consistency:
        if plan.workload.is_marginal:
            bundle.consistent_y = ls_consistent(build_fourier_system(plan.workload), bundle.y)[1]
        else:
            bundle.consistent_y = rank_consistent(plan.workload.matrix, bundle.y)
    bundle.metadata.update(strategy=plan.strategy.kind, budget=plan.config.budget,
                           recovery=plan.recovery.source, seed=seed,
                           epsilon=plan.spec.epsilon, delta=plan.spec.delta)
    return bundle
