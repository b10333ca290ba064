"""Strategy matrices, their row groupings, and grouping checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .core import DimensionError, Workload, check_dim, dominated_ints, marginal_rows, popcount
from .transform import compute_marginal, fwht

KINDS = ("identity", "workload", "fourier", "hierarchical", "marginals", "dense")
DEFAULT_TOL = 1e-12
MAX_DENSE_DIM = 16


class NotGroupable(ValueError):
    """A row mixes non-zero magnitudes, so no grouping can contain it."""


@dataclass(frozen=True)
class Grouping:
    group_of: np.ndarray
    constants: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "group_of", np.asarray(self.group_of, dtype=int))
        object.__setattr__(self, "constants", np.asarray(self.constants, dtype=float))
        if self.group_of.size and (self.group_of.min() < 0 or self.group_of.max() >= self.g):
            raise ValueError("group ids out of range")

    @property
    def g(self) -> int:
        return self.constants.size

    @property
    def m(self) -> int:
        return self.group_of.size

    def members(self, r: int) -> np.ndarray:
        return np.flatnonzero(self.group_of == r)

    def group_sums(self, b) -> np.ndarray:
        """s_r = sum of b_i over the rows of group r."""
        return np.bincount(self.group_of, weights=np.asarray(b, dtype=float), minlength=self.g)


def compressed_index(cols: np.ndarray, alpha: int) -> np.ndarray:
    """Position of ``cols & alpha`` within ``dominated_ints(alpha)``."""
    pos = np.zeros_like(cols)
    for bit in range(alpha.bit_length() - 1, -1, -1):
        if alpha >> bit & 1:
            pos = (pos << 1) | ((cols >> bit) & 1)
    return pos


@dataclass(frozen=True)
class StrategyMatrix:
    """The m x N strategy S, stored by rule where possible.

    ``masks`` holds the marginal masks for marginal kinds and the Fourier
    coefficient masks for the Fourier kind. ``assignment`` maps each workload
    marginal to the strategy marginal it is aggregated from.
    """

    kind: str
    d: int
    masks: tuple[int, ...] = ()
    matrix: np.ndarray | None = None
    assignment: Mapping[int, int] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return 1 << self.d

    @property
    def is_marginal_kind(self) -> bool:
        return self.kind in ("workload", "hierarchical", "marginals")

    @property
    def m(self) -> int:
        if self.kind == "identity":
            return self.n
        if self.kind == "fourier":
            return len(self.masks)
        if self.is_marginal_kind:
            return sum(1 << popcount(a) for a in self.masks)
        return self.matrix.shape[0]

    def row_slices(self) -> list[slice]:
        out, start = [], 0
        for a in self.masks:
            out.append(slice(start, start + (1 << popcount(a))))
            start += 1 << popcount(a)
        return out

    def dense(self) -> np.ndarray:
        if self.kind == "dense":
            return self.matrix
        if self.d > MAX_DENSE_DIM:
            raise DimensionError(f"refusing to materialize S densely at d={self.d}")
        if self.kind == "identity":
            return np.eye(self.n)
        if self.kind == "fourier":
            cols = np.arange(self.n)
            rows = np.array(self.masks)
            par = np.bitwise_count(rows[:, None] & cols[None, :]) & 1
            return np.where(par, -1.0, 1.0) * 2.0 ** (-self.d / 2)
        return np.vstack([marginal_rows(a, self.d) for a in self.masks])

    def apply(self, x) -> np.ndarray:
        """S x without materializing S."""
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.n:
            raise DimensionError(f"x has {x.size} cells, strategy expects {self.n}")
        if self.kind == "identity":
            return x.copy()
        if self.kind == "fourier":
            return fwht(x)[list(self.masks)]
        if self.is_marginal_kind:
            return np.concatenate([compute_marginal(a, x) for a in self.masks])
        return self.matrix @ x

    def column_load(self, eps, p: int = 1) -> np.ndarray:
        """Per column j, sum_i |S_ij|^p eps_i^p."""
        e = np.asarray(eps, dtype=float) ** p
        if e.shape != (self.m,):
            raise ValueError(f"need {self.m} per-row budgets, got shape {e.shape}")
        if self.kind == "identity":
            return e.copy()
        if self.kind == "fourier":
            return np.full(self.n, 2.0 ** (-self.d * p / 2) * e.sum())
        if self.is_marginal_kind:
            cols = np.arange(self.n)
            load = np.zeros(self.n)
            for a, sl in zip(self.masks, self.row_slices()):
                load += e[sl][compressed_index(cols, a)]
            return load
        return (np.abs(self.matrix) ** p).T @ e

    def row_labels(self) -> list[str]:
        fmt = f"0{self.d}b"
        if self.kind == "identity":
            return [format(j, fmt) for j in range(self.n)]
        if self.kind == "fourier":
            return ["f" + format(b, fmt) for b in self.masks]
        if self.is_marginal_kind:
            return [f"{a:{fmt}}:{g:{fmt}}" for a in self.masks for g in dominated_ints(a)]
        return [str(i) for i in range(self.m)]


def fourier_masks(marginals: Iterable[int]) -> tuple[int, ...]:
    """Coefficients needed by a marginal set: every beta below some alpha_i, ascending."""
    out: set[int] = set()
    for a in marginals:
        out.update(dominated_ints(a))
    return tuple(sorted(out))


def _marginal_grouping(masks) -> Grouping:
    group_of = np.concatenate([np.full(1 << popcount(a), r) for r, a in enumerate(masks)])
    return Grouping(group_of, np.ones(len(masks)))


def assign_centroids(workload_masks, centroids, assign: Mapping[int, int] | None = None) -> dict[int, int]:
    """Map each workload marginal to a centroid that dominates it.

    Explicit entries in ``assign`` win; otherwise the first dominating centroid
    in the given order is used.
    """
    assign = dict(assign or {})
    out = {}
    for a in workload_masks:
        if a in assign:
            c = assign[a]
            if c not in centroids:
                raise ValueError(f"assigned centroid {c:b} is not in the strategy")
            if a & c != a:
                raise ValueError(f"centroid {c:b} does not cover marginal {a:b}")
        else:
            c = next((c for c in centroids if a & c == a), None)
            if c is None:
                raise ValueError(f"no strategy marginal covers workload marginal {a:b}")
        out[a] = c
    return out


def build_strategy(kind: str, workload: Workload, d: int | None = None, *,
                   centroids: Iterable[int] | None = None,
                   assign: Mapping[int, int] | None = None,
                   matrix=None, tol: float = DEFAULT_TOL) -> tuple[StrategyMatrix, Grouping]:
    """Construct S for ``kind`` together with its canonical grouping."""
    d = check_dim(workload.d if d is None else d)
    if d != workload.d:
        raise DimensionError(f"workload is over d={workload.d}, strategy asked for d={d}")
    kind = kind.lower()
    if kind == "identity":
        return StrategyMatrix("identity", d), Grouping(np.zeros(1 << d, dtype=int), [1.0])
    if kind == "hierarchical":
        masks = tuple(((1 << l) - 1) << (d - l) for l in range(d + 1))
        return StrategyMatrix("hierarchical", d, masks), _marginal_grouping(masks)
    if kind == "workload":
        if workload.is_marginal:
            masks = workload.marginals
            return StrategyMatrix("workload", d, masks), _marginal_grouping(masks)
        S = StrategyMatrix("dense", d, matrix=workload.matrix)
        return S, greedy_grouping(S.matrix, tol)
    if kind == "fourier":
        if not workload.is_marginal:
            raise ValueError("the Fourier strategy needs a marginal workload")
        masks = fourier_masks(workload.marginals)
        return (StrategyMatrix("fourier", d, masks),
                Grouping(np.arange(len(masks)), np.full(len(masks), 2.0 ** (-d / 2))))
    if kind == "marginals":
        if centroids is None:
            raise ValueError("the marginals strategy needs user-supplied marginals")
        cents = tuple(dict.fromkeys(int(c) for c in centroids))
        for c in cents:
            if c < 0 or c >> d:
                raise DimensionError(f"strategy marginal {c} invalid for d={d}")
        mapping = assign_centroids(workload.marginals, cents, assign) if workload.is_marginal else {}
        return StrategyMatrix("marginals", d, cents, assignment=mapping), _marginal_grouping(cents)
    if kind == "dense":
        if matrix is None:
            raise ValueError("the dense strategy needs an explicit matrix")
        M = np.asarray(matrix, dtype=float)
        if M.ndim != 2 or M.shape[1] != 1 << d or not np.all(np.isfinite(M)):
            raise ValueError(f"dense strategy must be a finite m x {1 << d} matrix")
        if np.any(~M.any(axis=1)):
            raise ValueError("strategy has an all-zero row")
        return StrategyMatrix("dense", d, matrix=M), greedy_grouping(M, tol)
    raise ValueError(f"unknown strategy kind {kind!r}; expected one of {KINDS}")


def _row_magnitude(row: np.ndarray, tol: float, i: int) -> tuple[np.ndarray, float]:
    support = np.abs(row) > 0
    if not support.any():
        raise NotGroupable(f"row {i} is all zero")
    mags = np.abs(row[support])
    c = mags.max()
    if mags.min() < c * (1 - tol):
        raise NotGroupable(f"row {i} has non-zero entries of differing magnitude")
    return support, float(c)


def greedy_grouping(S, tol: float = DEFAULT_TOL) -> Grouping:
    """Rows in ascending order join the lowest-id group they are compatible with."""
    S = np.asarray(S, dtype=float)
    covered: list[np.ndarray] = []
    consts: list[float] = []
    group_of = np.empty(S.shape[0], dtype=int)
    for i, row in enumerate(S):
        support, c = _row_magnitude(row, tol, i)
        for r, (cov, cr) in enumerate(zip(covered, consts)):
            if abs(cr - c) <= tol * max(cr, c) and not (cov & support).any():
                cov |= support
                group_of[i] = r
                break
        else:
            group_of[i] = len(consts)
            covered.append(support.copy())
            consts.append(c)
    return Grouping(group_of, consts)


def verify_grouping(S, G: Grouping, tol: float = DEFAULT_TOL) -> bool:
    """Row-wise disjointness plus one uniform magnitude C_r per group."""
    S = np.asarray(S, dtype=float)
    if S.shape[0] != G.m:
        return False
    for r in range(G.g):
        rows = S[G.members(r)]
        if rows.size == 0:
            continue
        nz = np.abs(rows) > 0
        if (nz.sum(axis=0) > 1).any():
            return False
        mags = np.abs(rows[nz])
        c = G.constants[r]
        if mags.size and np.abs(mags - c).max() > tol * c:
            return False
    return True


def recovery_consistent_with_grouping(b, G: Grouping, tol: float = 1e-9) -> bool:
    """True iff b is constant (relative tol) inside every group."""
    b = np.asarray(b, dtype=float)
    for r in range(G.g):
        vals = b[G.members(r)]
        if vals.size and vals.max() - vals.min() > tol * max(abs(vals.max()), abs(vals.min()), 1e-300):
            return False
    return True
