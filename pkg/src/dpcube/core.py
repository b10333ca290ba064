"""Bit-mask algebra over {0,1}^d, attribute schemas and query workloads.

Cells of the contingency vector are indexed by integers whose binary
expansion lists attribute bits most-significant-first in schema order, so
for three binary attributes A, B, C the cell ``0b110`` is (A=1, B=1, C=0).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAX_DIM = 30


class DimensionError(ValueError):
    """Raised when masks of different dimension are combined or d is out of range."""


def check_dim(d: int) -> int:
    if not isinstance(d, (int, np.integer)) or d < 0 or d > MAX_DIM:
        raise DimensionError(f"dimension must be an integer in [0, {MAX_DIM}], got {d!r}")
    return int(d)


def popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True, order=True)
class BitMask:
    """An attribute subset / cell index alpha in {0,1}^d."""

    bits: int
    d: int

    def __post_init__(self):
        check_dim(self.d)
        if self.bits < 0 or self.bits >= (1 << self.d):
            raise DimensionError(f"mask {self.bits} does not fit in d={self.d} bits")

    @classmethod
    def parse(cls, text: str) -> "BitMask":
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"not a binary mask string: {text!r}")
        return cls(int(text, 2), len(text))

    @property
    def weight(self) -> int:
        return popcount(self.bits)

    def __and__(self, other: "BitMask") -> "BitMask":
        return meet(self, other)

    def __str__(self) -> str:
        return format(self.bits, f"0{self.d}b") if self.d else ""


def _same_dim(alpha: BitMask, beta: BitMask) -> None:
    if alpha.d != beta.d:
        raise DimensionError(f"dimension mismatch: {alpha.d} vs {beta.d}")


def meet(alpha: BitMask, beta: BitMask) -> BitMask:
    _same_dim(alpha, beta)
    return BitMask(alpha.bits & beta.bits, alpha.d)


def dominates(alpha: BitMask, beta: BitMask) -> bool:
    """True iff alpha is dominated by beta (every set bit of alpha is set in beta)."""
    _same_dim(alpha, beta)
    return alpha.bits & beta.bits == alpha.bits


def inner(alpha: BitMask, beta: BitMask) -> int:
    _same_dim(alpha, beta)
    return popcount(alpha.bits & beta.bits)


def dominated_ints(alpha: int) -> list[int]:
    """All sub-masks of ``alpha`` in increasing integer order."""
    out = []
    sub = 0
    # standard successor trick: next sub-mask in increasing order
    while True:
        out.append(sub)
        if sub == alpha:
            return out
        sub = (sub - alpha) & alpha


def enumerate_dominated(alpha: BitMask) -> list[BitMask]:
    return [BitMask(b, alpha.d) for b in dominated_ints(alpha.bits)]


def set_bit_positions(alpha: int) -> list[int]:
    """Bit positions of ``alpha``, most significant first."""
    return [i for i in range(alpha.bit_length() - 1, -1, -1) if alpha >> i & 1]


# --------------------------------------------------------------------------
# schema


@dataclass(frozen=True)
class Attribute:
    name: str
    cardinality: int
    values: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.cardinality < 2:
            raise ValueError(f"attribute {self.name!r}: cardinality must be >= 2, got {self.cardinality}")
        if self.values is not None:
            if len(self.values) != self.cardinality:
                raise ValueError(f"attribute {self.name!r}: {len(self.values)} pinned values "
                                 f"for cardinality {self.cardinality}")
            if len(set(self.values)) != len(self.values):
                raise ValueError(f"attribute {self.name!r}: duplicate pinned values")

    @property
    def bit_width(self) -> int:
        return math.ceil(math.log2(self.cardinality))


@dataclass(frozen=True)
class AttributeSchema:
    attributes: tuple[Attribute, ...]
    offsets: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be unique")
        if not names:
            raise ValueError("schema has no attributes")
        d = sum(a.bit_width for a in self.attributes)
        if d > MAX_DIM:
            raise DimensionError(f"schema needs d={d} bits, more than the supported {MAX_DIM}")
        # offset = position of the attribute's least significant bit
        offsets, pos = [], d
        for a in self.attributes:
            pos -= a.bit_width
            offsets.append(pos)
        object.__setattr__(self, "offsets", tuple(offsets))

    @property
    def d(self) -> int:
        return sum(a.bit_width for a in self.attributes)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown attribute {name!r}") from None

    def attribute_mask(self, name: str) -> int:
        i = self.index(name)
        return ((1 << self.attributes[i].bit_width) - 1) << self.offsets[i]

    def mask_for(self, names: Iterable[str]) -> BitMask:
        bits = 0
        for n in names:
            bits |= self.attribute_mask(n)
        return BitMask(bits, self.d)

    def cell_index(self, codes: Sequence[int]) -> int:
        cell = 0
        for code, off in zip(codes, self.offsets):
            cell |= int(code) << off
        return cell


@dataclass(frozen=True)
class ContingencyVector:
    """Cell counts x in R^N, N = 2^d; usable anywhere an array is expected."""

    cells: np.ndarray
    d: int = field(init=False)

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=float).ravel()
        n = cells.size
        d = n.bit_length() - 1
        if n == 0 or 1 << d != n:
            raise DimensionError(f"contingency vector length {n} is not a power of two")
        check_dim(d)
        if not np.all(np.isfinite(cells)):
            raise ValueError("contingency vector has non-finite entries")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "d", d)

    def __array__(self, dtype=None, copy=None):
        return self.cells if dtype is None else self.cells.astype(dtype)

    def __len__(self):
        return self.cells.size

    @property
    def total(self) -> float:
        return float(self.cells.sum())


# --------------------------------------------------------------------------
# workloads


@dataclass(frozen=True)
class Workload:
    """A query workload: either a set of marginals or an explicit q x N matrix.

    ``weights`` is the vector a >= 0 in the objective a^T Var(y); it defaults
    to all ones.
    """

    d: int
    marginals: tuple[int, ...] | None = None
    matrix: np.ndarray | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        check_dim(self.d)
        if (self.marginals is None) == (self.matrix is None):
            raise ValueError("workload needs exactly one of marginals or matrix")
        if self.marginals is not None:
            if len(set(self.marginals)) != len(self.marginals):
                raise ValueError("duplicate marginals in workload")
            if not self.marginals:
                raise ValueError("empty marginal workload")
            for a in self.marginals:
                if a < 0 or a >= 1 << self.d:
                    raise DimensionError(f"marginal mask {a} invalid for d={self.d}")
        else:
            m = np.asarray(self.matrix, dtype=float)
            if m.ndim != 2 or m.shape[1] != 1 << self.d or not np.all(np.isfinite(m)):
                raise ValueError("dense workload must be a finite q x 2^d matrix")
            object.__setattr__(self, "matrix", m)
        if self.weights is None:
            object.__setattr__(self, "weights", np.ones(self.q))
        else:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (self.q,) or not np.all(np.isfinite(w)) or np.any(w < 0):
                raise ValueError(f"weights must be {self.q} finite non-negative values")
            object.__setattr__(self, "weights", w)

    @classmethod
    def from_marginals(cls, masks: Iterable[BitMask | int | str], d: int | None = None,
                       weights=None) -> "Workload":
        ints = []
        for m in masks:
            if isinstance(m, str):
                m = BitMask.parse(m)
            if isinstance(m, BitMask):
                if d is None:
                    d = m.d
                elif m.d != d:
                    raise DimensionError("marginal masks of different dimension")
                ints.append(m.bits)
            else:
                ints.append(int(m))
        if d is None:
            raise ValueError("dimension required for integer masks")
        return cls(d=d, marginals=tuple(ints), weights=weights)

    @classmethod
    def dense(cls, matrix, weights=None) -> "Workload":
        matrix = np.asarray(matrix, dtype=float)
        n = matrix.shape[1]
        d = n.bit_length() - 1
        if 1 << d != n:
            raise ValueError("dense workload column count must be a power of two")
        return cls(d=d, matrix=matrix, weights=weights)

    @property
    def is_marginal(self) -> bool:
        return self.marginals is not None

    @property
    def q(self) -> int:
        if self.marginals is not None:
            return sum(1 << popcount(a) for a in self.marginals)
        return self.matrix.shape[0]

    def row_labels(self) -> list[tuple[str, str]]:
        """(marginal, cell) label per row; dense workloads use the row number."""
        if self.marginals is None:
            return [("Q", str(i)) for i in range(self.q)]
        fmt = f"0{self.d}b"
        return [(format(a, fmt), format(g, fmt))
                for a in self.marginals for g in dominated_ints(a)]

    def marginal_slices(self) -> list[slice]:
        if self.marginals is None:
            return [slice(0, self.q)]
        out, start = [], 0
        for a in self.marginals:
            n = 1 << popcount(a)
            out.append(slice(start, start + n))
            start += n
        return out


def all_kway(d: int, k: int) -> list[int]:
    """Masks of all k-way marginals in increasing integer order."""
    return [a for a in range(1 << d) if popcount(a) == k]


def marginal_rows(alpha: int, d: int) -> np.ndarray:
    """The 2^|alpha| x 2^d 0/1 matrix computing marginal alpha."""
    cols = np.arange(1 << d)
    subs = np.array(dominated_ints(alpha))
    return (cols[None, :] & alpha == subs[:, None]).astype(float)


def workload_matrix(w: Workload, schema_d: int | None = None) -> np.ndarray:
    """Dense q x N query matrix; row (i, gamma) has a 1 at column j iff j & alpha_i == gamma."""
    d = w.d if schema_d is None else check_dim(schema_d)
    if d != w.d:
        raise DimensionError(f"workload built for d={w.d}, asked for d={d}")
    if w.matrix is not None:
        return w.matrix
    if d > 24:
        raise DimensionError(f"refusing to materialize a dense workload over 2^{d} cells")
    return np.vstack([marginal_rows(a, d) for a in w.marginals])


# --------------------------------------------------------------------------
# workload / strategy spec files

_SPLIT = re.compile(r"[,\s]+")


def parse_marginal_line(line: str, schema: AttributeSchema | None, d: int | None) -> int:
    line = line.strip()
    if line in ("{}", "()", "-", "total"):
        return 0
    if re.fullmatch(r"[01]+", line) and (d is None or len(line) == d):
        return int(line, 2)
    if schema is None:
        raise ValueError(f"attribute names {line!r} need a schema to resolve")
    return schema.mask_for(t for t in _SPLIT.split(line) if t).bits


@dataclass
class SpecFile:
    """Parsed contents of a workload/strategy text file."""

    marginals: list[int]
    weights: list[float] | None = None
    kind: str | None = None
    assign: dict[int, int] = field(default_factory=dict)


def read_spec_file(path: str | Path, schema: AttributeSchema | None = None,
                   d: int | None = None) -> SpecFile:
    """Read a workload or strategy file.

    One marginal per line, given either as attribute names separated by
    commas/spaces or as a d-character binary mask. ``#`` starts a comment.
    Directive lines: ``kind: <tag>``, ``weights: w1 w2 ...`` (one weight per
    query row) and ``assign: <marginal> -> <centroid>``.
    """
    if schema is not None:
        d = schema.d
    out = SpecFile(marginals=[])
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            key, _, rest = line.partition(":")
            key = key.strip().lower()
            if _ and key == "kind":
                out.kind = rest.strip().lower()
            elif _ and key == "weights":
                out.weights = [float(t) for t in _SPLIT.split(rest.strip()) if t]
            elif _ and key == "assign":
                lhs, sep, rhs = rest.partition("->")
                if not sep:
                    raise ValueError("assign needs '<marginal> -> <centroid>'")
                out.assign[parse_marginal_line(lhs, schema, d)] = parse_marginal_line(rhs, schema, d)
            else:
                out.marginals.append(parse_marginal_line(line, schema, d))
        except (ValueError, KeyError) as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out


def load_workload(path: str | Path, schema: AttributeSchema | None = None,
                  d: int | None = None) -> Workload:
    spec = read_spec_file(path, schema, d)
    dim = schema.d if schema is not None else d
    if dim is None:
        raise ValueError("workload file needs a schema or an explicit dimension")
    return Workload(d=dim, marginals=tuple(spec.marginals), weights=spec.weights)
