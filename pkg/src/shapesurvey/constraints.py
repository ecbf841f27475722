"""Constraint matrices for shape-restricted domain means.

A constraint matrix ``A`` has one row per inequality and one column per
domain; the feasible set is ``{theta : A @ theta >= 0}``.  Domain indices
are 0-based throughout the Python API.

Domains built from a cross-classification are flattened row-major, with
the last factor varying fastest (``numpy.ravel_multi_index`` order).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "ConstraintError",
    "ConstraintMatrix",
    "DomainGrid",
    "IrreducibilityCertificate",
    "PolarEdgeSet",
    "build_monotone",
    "build_partial_order",
    "build_tree_order",
    "check_irreducible",
    "transform_by_weights",
]

# relative residual below which a row counts as a nonnegative combination
IRREDUCIBLE_TOL = 1e-8


class ConstraintError(ValueError):
    """Raised for malformed constraint specifications."""


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


class ConstraintMatrix:
    """An ``m x D`` matrix of linear inequality constraints ``A theta >= 0``.

    Parameters
    ----------
    entries : array_like, shape (m, D)
        Constraint rows.  ``m >= 1``, ``D >= 2`` and no row may be zero.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries):
        a = np.atleast_2d(np.asarray(entries, dtype=float))
        if a.ndim != 2:
            raise ConstraintError("constraint matrix must be two-dimensional")
        m, D = a.shape
        if m < 1:
            raise ConstraintError("constraint matrix needs at least one row")
        if D < 2:
            raise ConstraintError("constraint matrix needs at least two domains")
        if not np.all(np.isfinite(a)):
            raise ConstraintError("constraint matrix has non-finite entries")
        zero = np.flatnonzero(~np.any(a != 0, axis=1))
        if zero.size:
            raise ConstraintError(f"row {int(zero[0])} is the zero vector")
        self._entries = _frozen(a)

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def m(self) -> int:
        return self._entries.shape[0]

    @property
    def D(self) -> int:
        return self._entries.shape[1]

    @property
    def shape(self):
        return self._entries.shape

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._entries
        return self._entries.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, ConstraintMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.all(self._entries == other._entries))

    def __hash__(self):
        return hash((self.shape, self._entries.tobytes()))

    def __repr__(self):
        return f"ConstraintMatrix(m={self.m}, D={self.D})"

    @property
    def rows_sum_to_zero(self) -> bool:
        """True when every row sums to zero (weighted means are then preserved)."""
        scale = 1.0 + np.abs(self._entries).sum(axis=1)
        return bool(np.all(np.abs(self._entries.sum(axis=1)) <= 1e-12 * scale))

    @property
    def is_order(self) -> bool:
        """True when each row is ``e_upper - e_lower`` (a partial order)."""
        a = self._entries
        return bool(
            np.all((a == 0) | (a == 1) | (a == -1))
            and np.all((a == 1).sum(axis=1) == 1)
            and np.all((a == -1).sum(axis=1) == 1)
        )

    def order_pairs(self) -> list[tuple[int, int]]:
        """``(lower, upper)`` pairs for an order matrix."""
        if not self.is_order:
            raise ConstraintError("matrix is not a partial-order matrix")
        lo = np.argmax(self._entries == -1, axis=1)
        hi = np.argmax(self._entries == 1, axis=1)
        return [(int(a), int(b)) for a, b in zip(lo, hi)]


@dataclass(frozen=True)
class DomainGrid:
    """Cross-classification of ``p`` factors with ``sizes[i]`` levels each.

    Levels are 0-based.  ``index`` and ``levels`` implement the row-major
    flattening (last factor fastest).
    """

    sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise ConstraintError("grid factor sizes must be positive integers")
        object.__setattr__(self, "sizes", sizes)

    @property
    def D(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def p(self) -> int:
        return len(self.sizes)

    def index(self, levels: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(levels), self.sizes))

    def levels(self, index: int) -> tuple:
        return tuple(int(i) for i in np.unravel_index(index, self.sizes))

    def all_levels(self):
        """Level tuples in flattening order."""
        return product(*(range(s) for s in self.sizes))


@dataclass(frozen=True)
class PolarEdgeSet:
    """Generators of the polar cone: the rows of ``-A_s``."""

    edges: np.ndarray = field(repr=False)

    def __post_init__(self):
        e = np.atleast_2d(np.asarray(self.edges, dtype=float))
        if e.ndim != 2 or e.shape[0] < 1:
            raise ConstraintError("edge set must be a nonempty 2-D array")
        if np.any(~np.any(e != 0, axis=1)):
            raise ConstraintError("polar edges must be nonzero")
        object.__setattr__(self, "edges", _frozen(e))

    @property
    def m(self) -> int:
        return self.edges.shape[0]

    @property
    def D(self) -> int:
        return self.edges.shape[1]

    @classmethod
    def from_matrix(cls, A) -> "PolarEdgeSet":
        return cls(-np.asarray(A, dtype=float))


def build_monotone(grid: DomainGrid, axes, directions=None) -> ConstraintMatrix:
    """Monotonicity along one or more factors of ``grid``.

    One row is produced for every pair of adjacent levels along each
    selected axis, holding the remaining factors fixed.  Rows are grouped by
    axis (in the order given), then by the flattened position of the lower
    cell.

    Parameters
    ----------
    grid : DomainGrid
    axes : int or iterable of int
        0-based factor indices.
    directions : str or sequence of str, optional
        ``"increasing"``/``"inc"`` or ``"decreasing"``/``"dec"`` per axis.
        Defaults to increasing.
    """
    if isinstance(axes, (int, np.integer)):
        axes = [int(axes)]
    axes = [int(a) for a in axes]
    if not axes:
        raise ConstraintError("no constraints requested")
    if len(set(axes)) != len(axes):
        raise ConstraintError("axis listed more than once")
    if directions is None:
        directions = ["increasing"] * len(axes)
    elif isinstance(directions, str):
        directions = [directions] * len(axes)
    if len(directions) != len(axes):
        raise ConstraintError("one direction per axis is required")

    rows = []
    for axis, direction in zip(axes, directions):
        if not 0 <= axis < grid.p:
            raise ConstraintError(f"axis {axis} out of range for a {grid.p}-factor grid")
        if grid.sizes[axis] < 2:
            raise ConstraintError(f"axis {axis} has a single level")
        sign = _direction_sign(direction)
        for levels in grid.all_levels():
            if levels[axis] == grid.sizes[axis] - 1:
                continue
            upper = list(levels)
            upper[axis] += 1
            row = np.zeros(grid.D)
            row[grid.index(levels)] = -sign
            row[grid.index(upper)] = sign
            rows.append(row)
    return ConstraintMatrix(np.array(rows))


def _direction_sign(direction: str) -> float:
    d = str(direction).lower()
    if d in ("increasing", "inc", "+"):
        return 1.0
    if d in ("decreasing", "dec", "-"):
        return -1.0
    raise ConstraintError(f"unknown direction {direction!r}")


def build_tree_order(D: int, root: int, direction: str = "root_smallest") -> ConstraintMatrix:
    """Tree ordering: domain ``root`` is below (or above) every other domain."""
    D = int(D)
    if D < 2:
        raise ConstraintError("tree ordering needs at least two domains")
    if not 0 <= root < D:
        raise ConstraintError(f"root {root} out of range")
    if direction in ("root_smallest", "smallest"):
        sign = 1.0
    elif direction in ("root_largest", "largest"):
        sign = -1.0
    else:
        raise ConstraintError(f"unknown tree direction {direction!r}")
    rows = []
    for d in range(D):
        if d == root:
            continue
        row = np.zeros(D)
        row[root] = -sign
        row[d] = sign
        rows.append(row)
    return ConstraintMatrix(np.array(rows))


def build_partial_order(pairs: Iterable[tuple[int, int]], D: int) -> ConstraintMatrix:
    """One row ``e_upper - e_lower`` per ``(lower, upper)`` pair.

    Duplicate and self pairs are rejected.  Pairs implied by transitivity are
    accepted here but will fail :func:`check_irreducible`.
    """
    pairs = [(int(lo), int(hi)) for lo, hi in pairs]
    if not pairs:
        raise ConstraintError("no constraints requested")
    seen = set()
    rows = []
    for lo, hi in pairs:
        if lo == hi:
            raise ConstraintError(f"self pair ({lo}, {hi})")
        if not (0 <= lo < D and 0 <= hi < D):
            raise ConstraintError(f"pair ({lo}, {hi}) out of range for D={D}")
        if (lo, hi) in seen:
            raise ConstraintError(f"duplicate pair ({lo}, {hi})")
        seen.add((lo, hi))
        row = np.zeros(D)
        row[lo] = -1.0
        row[hi] = 1.0
        rows.append(row)
    return ConstraintMatrix(np.array(rows))


@dataclass(frozen=True)
class IrreducibilityCertificate:
    """Outcome of :func:`check_irreducible`.

    When reducible, ``witness_row`` is the row expressed by the others
    (``None`` when the witness is a positive combination equal to the
    origin) and ``coefficients`` holds the nonnegative multipliers, one per
    row.
    """

    irreducible: bool
    witness_row: Optional[int] = None
    coefficients: Optional[np.ndarray] = field(default=None, repr=False)
    residual: float = 0.0

    def __bool__(self):
        return self.irreducible

    def describe(self) -> str:
        if self.irreducible:
            return "irreducible"
        c = self.coefficients
        terms = ", ".join(f"{c[j]:.6g}*row{j}" for j in np.flatnonzero(c > 1e-12))
        if self.witness_row is None:
            return f"reducible: origin = {terms}"
        return f"reducible: row{self.witness_row} = {terms}"


def nonneg_lstsq(M, b):
    """``min |M x - b|`` over ``x >= 0``; returns ``(x, residual norm)``.

    Uses the bounded-variable active-set solver of ``scipy.optimize.lsq_linear``
    and recomputes the residual from the returned ``x`` rather than trusting
    the solver's report.
    """
    from scipy.optimize import lsq_linear  # deferred: scipy.optimize is slow to import

    M = np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float)
    x = lsq_linear(M, b, bounds=(0.0, np.inf), method="bvls").x
    x = np.maximum(x, 0.0)
    return x, float(np.linalg.norm(M @ x - b))


def check_irreducible(A) -> IrreducibilityCertificate:
    """Test whether ``A`` has no redundant rows.

    Row ``i`` is redundant when it equals a nonnegative combination of the
    other rows; the origin test looks for a nonnegative combination summing
    to one that vanishes.  Both are nonnegative least-squares problems,
    accepted at residual ``< 1e-8 * (1 + |row|)``.
    """
    a = np.asarray(A, dtype=float)
    m = a.shape[0]
    for i in range(m):
        others = np.delete(np.arange(m), i)
        row = a[i]
        if others.size == 0:
            break
        coef, res = nonneg_lstsq(a[others].T, row)
        if res < IRREDUCIBLE_TOL * (1.0 + np.linalg.norm(row)):
            full = np.zeros(m)
            full[others] = coef
            return IrreducibilityCertificate(False, i, full, float(res))

    # origin: a >= 0, sum(a) = 1, a @ A = 0
    M = np.vstack([a.T, np.ones((1, m))])
    rhs = np.zeros(a.shape[1] + 1)
    rhs[-1] = 1.0
    coef, res = nonneg_lstsq(M, rhs)
    if res < IRREDUCIBLE_TOL:
        return IrreducibilityCertificate(False, None, coef, float(res))
    return IrreducibilityCertificate(True)


def transform_by_weights(A, weights) -> tuple[ConstraintMatrix, PolarEdgeSet]:
    """Rescale columns: ``A_s = A diag(weights)^(-1/2)`` and its polar edges."""
    a = np.asarray(A, dtype=float)
    w = np.asarray(weights, dtype=float)
    if w.shape != (a.shape[1],):
        raise ConstraintError("one weight per domain is required")
    if np.any(~(w > 0)):
        raise ConstraintError("weights must be strictly positive")
    a_s = a / np.sqrt(w)
    return ConstraintMatrix(a_s), PolarEdgeSet(-a_s)
