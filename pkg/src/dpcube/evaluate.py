"""Error measurement, analytic bounds and strategy comparisons."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass
from math import comb

import numpy as np

from .core import Workload, all_kway, workload_matrix
from .mechanism import PrivacySpec, sample_noise
from .pipeline import PipelineConfig, Plan, make_plan
from .transform import compute_marginal

CHUNK = 20_000


@dataclass
class ErrorReport:
    label: str
    per_marginal_abs: list[float]
    per_marginal_rel: list[float]
    mean_abs: float
    total_variance_predicted: float
    total_variance_empirical: float
    trials: int
    seed: int | None
    runtime: float = 0.0


def _fsum_rows(chunks: list[np.ndarray]) -> np.ndarray:
    # column-wise compensated sum so the result does not depend on chunking
    stacked = np.stack(chunks)
    return np.array([math.fsum(col) for col in stacked.T])


def measure(plan: Plan | PipelineConfig, x, workload: Workload | None = None,
            spec: PrivacySpec | None = None, trials: int = 1000, seed: int | None = 0,
            noiseless: bool = False) -> ErrorReport:
    """Repeat the release ``trials`` times and report per-marginal errors.

    Noise is pushed through the (linear) recovery and consistency maps in
    batches; y = Qx + R nu because Q = RS.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    started = time.perf_counter()
    if isinstance(plan, PipelineConfig):
        if workload is None or spec is None:
            raise ValueError("workload and spec are required with a bare config")
        plan = make_plan(plan, workload, spec)
    w = plan.workload
    x = np.asarray(x, dtype=float)
    if w.is_marginal:
        truth = np.concatenate([compute_marginal(a, x) for a in w.marginals])
    else:
        truth = workload_matrix(w) @ x
    live = ~plan.budget.suppressed
    M = plan.recovery.R[:, live]
    if plan.projector is not None:
        M = plan.projector @ M
    var_live = plan.budget.sigma_diag[live]
    rng = np.random.default_rng(seed)
    abs_sum, sq_sum, lin_sum = [], [], []
    done = 0
    while done < trials:
        n = min(CHUNK, trials - done)
        if noiseless:
            err = np.zeros((n, w.q))
        else:
            err = sample_noise(rng, var_live, plan.spec, (n, var_live.size)) @ M.T
        abs_sum.append(np.abs(err).sum(axis=0))
        lin_sum.append(err.sum(axis=0))
        sq_sum.append((err ** 2).sum(axis=0))
        done += n
    mean_abs = _fsum_rows(abs_sum) / trials
    mean_err = _fsum_rows(lin_sum) / trials
    if trials > 1:
        emp_var = (_fsum_rows(sq_sum) - trials * mean_err ** 2) / (trials - 1)
    else:
        emp_var = np.zeros(w.q)
    per_abs, per_rel = [], []
    for sl in w.marginal_slices():
        per_abs.append(float(mean_abs[sl].mean()))
        scale = float(truth[sl].mean())
        per_rel.append(per_abs[-1] / scale if scale != 0 else math.nan)
    predicted = plan.consistent_variance if plan.projector is not None else plan.variance
    return ErrorReport(
        label=plan.config.name,
        per_marginal_abs=per_abs,
        per_marginal_rel=per_rel,
        mean_abs=float(mean_abs.mean()),
        total_variance_predicted=float(w.weights @ predicted),
        total_variance_empirical=float(w.weights @ emp_var),
        trials=trials,
        seed=seed,
        runtime=time.perf_counter() - started,
    )


def compare(configs: list[PipelineConfig], x, workload: Workload, spec: PrivacySpec,
            trials: int = 1000, seed: int = 0) -> list[ErrorReport]:
    """One report per config; config i draws from the seed stream (seed, i)."""
    if not configs:
        raise ValueError("need at least one pipeline config")
    reports = []
    for i, cfg in enumerate(configs):
        sub = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        rep = measure(make_plan(cfg, workload, spec), x, trials=trials, seed=sub)
        rep.seed = sub
        reports.append(rep)
    return reports


TABLE_COLUMNS = ("config", "trials", "seed", "mean_abs_error", "mean_rel_error",
                 "predicted_total_variance", "empirical_total_variance")


def report_rows(reports: list[ErrorReport]) -> list[list[str]]:
    rows = []
    for r in reports:
        rel = [v for v in r.per_marginal_rel if not math.isnan(v)]
        rows.append([r.label, str(r.trials), str(r.seed), repr(r.mean_abs),
                     repr(float(np.mean(rel))) if rel else "nan",
                     repr(r.total_variance_predicted), repr(r.total_variance_empirical)])
    return rows


def to_csv(reports: list[ErrorReport]) -> str:
    """Deterministic table; timings are reported separately."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_COLUMNS)
    writer.writerows(report_rows(reports))
    return buf.getvalue()


def to_text(reports: list[ErrorReport], with_time: bool = True) -> str:
    head = ["config", "abs err", "rel err", "pred var", "emp var"] + (["time s"] if with_time else [])
    lines = []
    for r, row in zip(reports, report_rows(reports)):
        cells = [row[0]] + [f"{float(v):.4g}" for v in row[3:7]]
        if with_time:
            cells.append(f"{r.runtime:.3f}")
        lines.append(cells)
    widths = [max(len(h), *(len(c[i]) for c in lines)) for i, h in enumerate(head)]
    fmt = "  ".join(f"{{:>{w}}}" for w in widths)
    return "\n".join([fmt.format(*head)] + [fmt.format(*c) for c in lines]) + "\n"


# --------------------------------------------------------------------------
# analytic error


def expected_abs_error(variance) -> np.ndarray:
    """Jensen upper estimate E|err| <= sqrt(Var) per entry."""
    return np.sqrt(np.asarray(variance, dtype=float))


def per_marginal_expected_error(plan: Plan) -> np.ndarray:
    """Sum over each marginal's cells of sqrt(Var), an upper bound on E||error||_1."""
    est = expected_abs_error(plan.variance)
    return np.array([est[sl].sum() for sl in plan.workload.marginal_slices()])


def error_reduction(uniform: Plan, optimal: Plan) -> float:
    """Relative drop in average expected absolute error per entry."""
    return 1.0 - expected_abs_error(optimal.variance).mean() / expected_abs_error(uniform.variance).mean()


def _check_kd(d: int, k: int) -> None:
    if k < 0 or 2 * k > d:
        raise ValueError(f"bound needs 0 <= k <= d/2, got k={k}, d={d}")


def bound_kway_pure(d: int, k: int, eps: float) -> float:
    """Expected L1 noise per k-way marginal, Fourier strategy with optimal Laplace budgets.

    Total variance over all q = 2^k C(d,k) cells is at most
    3 (k+1)^2 C(d+k,k) C(d,k)^2 / (2^{k-1} eps^2); spread evenly over cells and
    summed over the 2^k cells of one marginal with Jensen this gives
    (k+1) sqrt(6 C(d,k) C(d+k,k)) / eps.
    """
    _check_kd(d, k)
    return (k + 1) * math.sqrt(6 * comb(d, k) * comb(d + k, k)) / eps


def bound_kway_approx(d: int, k: int, eps: float, delta: float) -> float:
    """Gaussian analogue: sqrt(8 (k+1) log(2/delta) C(d+k,k)) / eps per marginal."""
    _check_kd(d, k)
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return math.sqrt(8 * (k + 1) * math.log(2 / delta) * comb(d + k, k)) / eps


def bound_fourier_uniform(alpha_weight: int, B_size: int, eps: float) -> float:
    """E||C^alpha x - noisy||_1 <= |B| sqrt(2^{3+|alpha|}) / eps under uniform Fourier noise."""
    if alpha_weight < 0 or B_size < 1 or eps <= 0:
        raise ValueError("need |alpha| >= 0, |B| >= 1, eps > 0")
    return B_size * math.sqrt(2.0 ** (3 + alpha_weight)) / eps


# --------------------------------------------------------------------------
# workloads and data used in experiments


def kway_workload(d: int, k: int) -> Workload:
    return Workload(d=d, marginals=tuple(all_kway(d, k)))


def kway_star(d: int, k: int) -> Workload:
    """All k-way marginals plus the first half (ascending mask order) of the (k+1)-way ones."""
    upper = all_kway(d, k + 1)
    return Workload(d=d, marginals=tuple(all_kway(d, k) + upper[: len(upper) // 2]))


def kway_anchor(d: int, k: int, attribute_bit: int = 0) -> Workload:
    """All k-way marginals plus every (k+1)-way marginal containing one fixed attribute bit."""
    upper = [a for a in all_kway(d, k + 1) if a >> attribute_bit & 1]
    return Workload(d=d, marginals=tuple(all_kway(d, k) + upper))


def synthetic_counts(d: int, n: int, seed: int, concentration: float = 1.0) -> np.ndarray:
    """Multinomial counts over 2^d cells with Dirichlet(concentration) cell probabilities."""
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.full(1 << d, concentration))
    return rng.multinomial(n, p).astype(float)


def product_binary(d: int, n: int, seed: int, probs=None) -> np.ndarray:
    """Counts from n records of d independent binary attributes."""
    rng = np.random.default_rng(seed)
    probs = rng.uniform(0.1, 0.5, d) if probs is None else np.asarray(probs, dtype=float)
    bits = rng.random((n, d)) < probs
    cells = (bits * (1 << np.arange(d - 1, -1, -1))).sum(axis=1)
    return np.bincount(cells, minlength=1 << d).astype(float)
