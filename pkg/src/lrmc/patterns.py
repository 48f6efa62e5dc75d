"""Observation patterns and their combinatorial diagnostics.

An observation pattern is the set of matrix positions whose values are
known. This module owns the pattern representation plus everything that
can be decided from the pattern alone: per-row/column counts, the
reducibility decomposition, and the generic rank bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix

__all__ = [
    "ObservationPattern",
    "ObservedMatrix",
    "GenericBounds",
    "ReducibilityReport",
    "row_col_counts",
    "min_count_check",
    "is_reducible",
    "generic_bound",
    "generic_bound_dims",
    "estimated_bound",
    "mrfa_bound",
]


class ObservationPattern:
    """Set of observed (row, col) positions of an n1 x n2 matrix.

    Indices are 0-based. Entries are stored deduplicated and sorted in
    row-major order; the complement and the boolean mask are derived.
    """

    def __init__(self, n1: int, n2: int, entries):
        if n1 < 2 or n2 < 2:
            raise ValueError("pattern dimensions must be at least 2x2")
        idx = np.asarray(sorted(set((int(i), int(j)) for i, j in entries)), dtype=int)
        if idx.size == 0:
            raise ValueError("pattern must contain at least one entry")
        idx = idx.reshape(-1, 2)
        if idx[:, 0].min() < 0 or idx[:, 0].max() >= n1 or idx[:, 1].min() < 0 or idx[:, 1].max() >= n2:
            raise ValueError("pattern entry out of bounds")
        self.n1 = int(n1)
        self.n2 = int(n2)
        self.indices = idx
        self.indices.setflags(write=False)

    @classmethod
    def full(cls, n1: int, n2: int) -> "ObservationPattern":
        return cls(n1, n2, [(i, j) for i in range(n1) for j in range(n2)])

    @classmethod
    def from_mask(cls, mask) -> "ObservationPattern":
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim != 2:
            raise ValueError("mask must be 2-D")
        ii, jj = np.nonzero(mask)
        return cls(mask.shape[0], mask.shape[1], zip(ii.tolist(), jj.tolist()))

    @property
    def m(self) -> int:
        return self.indices.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n1, self.n2)

    @property
    def mask(self) -> np.ndarray:
        mask = np.zeros((self.n1, self.n2), dtype=bool)
        mask[self.indices[:, 0], self.indices[:, 1]] = True
        return mask

    def complement_indices(self) -> np.ndarray:
        """Unobserved positions, ordered column-major to match vec()."""
        mask = self.mask
        out = [(i, j) for j in range(self.n2) for i in range(self.n1) if not mask[i, j]]
        return np.asarray(out, dtype=int).reshape(-1, 2)

    def contains(self, other: "ObservationPattern") -> bool:
        """True if every entry of `other` is observed here too."""
        if other.shape != self.shape:
            return False
        mine = set(map(tuple, self.indices))
        return all(tuple(e) in mine for e in other.indices)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ObservationPattern)
            and self.shape == other.shape
            and self.indices.shape == other.indices.shape
            and bool((self.indices == other.indices).all())
        )

    def __hash__(self):
        return hash((self.n1, self.n2, self.indices.tobytes()))

    def __repr__(self) -> str:
        return f"ObservationPattern({self.n1}x{self.n2}, m={self.m})"


class ObservedMatrix:
    """A pattern together with one observed value per pattern entry."""

    def __init__(self, pattern: ObservationPattern, values):
        values = np.asarray(values, dtype=float).ravel()
        if values.shape[0] != pattern.m:
            raise ValueError(f"expected {pattern.m} values, got {values.shape[0]}")
        if not np.isfinite(values).all():
            raise ValueError("observed values must be finite")
        self.pattern = pattern
        self.values = values
        self.values.setflags(write=False)

    @classmethod
    def from_dense(cls, a, mask=None) -> "ObservedMatrix":
        """Build from a dense array; NaN cells are unobserved unless a mask is given."""
        a = np.asarray(a, dtype=float)
        if mask is None:
            mask = ~np.isnan(a)
        pattern = ObservationPattern.from_mask(mask)
        return cls(pattern, a[pattern.indices[:, 0], pattern.indices[:, 1]])

    def to_dense(self, fill: float = np.nan) -> np.ndarray:
        out = np.full(self.pattern.shape, fill, dtype=float)
        out[self.pattern.indices[:, 0], self.pattern.indices[:, 1]] = self.values
        return out

    def residual_on_pattern(self, y) -> np.ndarray:
        """Vector of Y_ij - M_ij over the observed entries."""
        y = as_matrix(y, "completion")
        if y.shape != self.pattern.shape:
            raise ValueError("completion shape does not match pattern")
        return y[self.pattern.indices[:, 0], self.pattern.indices[:, 1]] - self.values

    def __repr__(self) -> str:
        return f"ObservedMatrix({self.pattern.n1}x{self.pattern.n2}, m={self.pattern.m})"


def row_col_counts(p: ObservationPattern):
    """Observation counts per row and per column."""
    rows = np.bincount(p.indices[:, 0], minlength=p.n1)
    cols = np.bincount(p.indices[:, 1], minlength=p.n2)
    return rows, cols


def min_count_check(p: ObservationPattern, r: int) -> bool:
    """True iff every row and column holds at least r observations.

    This is necessary (not sufficient) for well-posedness at rank r.
    """
    if not 1 <= r <= min(p.n1, p.n2):
        raise ValueError(f"r must be in [1, {min(p.n1, p.n2)}]")
    rows, cols = row_col_counts(p)
    return bool(rows.min() >= r and cols.min() >= r)


@dataclass
class ReducibilityReport:
    """Connected-component decomposition of the pattern graph.

    Two observed entries are adjacent when they share a row or a column.
    More than one component means the pattern splits into independent
    completion subproblems, which destroys uniqueness. Rows and columns
    with no observations at all are reported separately: they make every
    completion non-unique regardless of reducibility.
    """

    reducible: bool
    components: list = field(repr=False)
    row_groups: list
    col_groups: list
    empty_rows: list
    empty_cols: list

    @property
    def n_components(self) -> int:
        return len(self.components)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def is_reducible(p: ObservationPattern) -> ReducibilityReport:
    """Decompose the pattern into connected components.

    Runs union-find over row and column nodes (an entry links its row to
    its column), so the cost is O(m + n1 + n2) rather than O(m^2).
    """
    uf = _UnionFind(p.n1 + p.n2)
    for i, j in p.indices:
        uf.union(int(i), p.n1 + int(j))

    groups: dict[int, list] = {}
    for e, (i, j) in enumerate(map(tuple, p.indices)):
        groups.setdefault(uf.find(i), []).append((i, j))
    components = sorted(groups.values(), key=lambda c: c[0])

    row_groups = [sorted({i for i, _ in comp}) for comp in components]
    col_groups = [sorted({j for _, j in comp}) for comp in components]
    rows, cols = row_col_counts(p)
    return ReducibilityReport(
        reducible=len(components) > 1,
        components=components,
        row_groups=row_groups,
        col_groups=col_groups,
        empty_rows=np.flatnonzero(rows == 0).tolist(),
        empty_cols=np.flatnonzero(cols == 0).tolist(),
    )


@dataclass(frozen=True)
class GenericBounds:
    """The generic rank bound R(n1, n2, m) and the related dimension counts."""

    n1: int
    n2: int
    m: int
    R_value: float
    R_ceil: int

    def manifold_dim(self, r: int) -> int:
        """Dimension r(n1+n2-r) of the rank-r manifold."""
        return r * (self.n1 + self.n2 - r)

    def f_rm(self, r: int) -> int:
        """Parameter count r(n1+n2-r) + n1*n2 - m of the completion map."""
        return self.manifold_dim(r) + self.n1 * self.n2 - self.m


def generic_bound_dims(n1: int, n2: int, m: int) -> GenericBounds:
    """Generic rank bound from dimensions and observation count alone."""
    if not 1 <= m <= n1 * n2:
        raise ValueError("m out of range")
    half = (n1 + n2) / 2.0
    disc = half * half - m
    r_val = half - math.sqrt(max(disc, 0.0))
    # snap to the nearest integer when the root is one analytically,
    # so ceil() cannot bump an exact integer bound by a rounding bit
    nearest = round(r_val)
    if abs(r_val - nearest) < 1e-9 and nearest * (n1 + n2 - nearest) == m:
        r_val = float(nearest)
    return GenericBounds(n1, n2, m, r_val, math.ceil(r_val - 1e-12))


def generic_bound(p: ObservationPattern) -> GenericBounds:
    return generic_bound_dims(p.n1, p.n2, p.m)


def estimated_bound(n1: int, n2: int, sampling_prob: float) -> float:
    """Expected-count version of the generic bound at observation rate p."""
    if not 0 < sampling_prob <= 1:
        raise ValueError("sampling probability must be in (0, 1]")
    half = (n1 + n2) / 2.0
    return half - math.sqrt(max(half * half - n1 * n2 * sampling_prob, 0.0))


def mrfa_bound(p_dim: int) -> float:
    """Generic rank bound (2p + 1 - sqrt(8p + 1)) / 2 for factor analysis."""
    if p_dim < 1:
        raise ValueError("p_dim must be >= 1")
    return (2 * p_dim + 1 - math.sqrt(8 * p_dim + 1)) / 2.0
