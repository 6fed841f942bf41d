"""Distance spaces, weighted repair instances, and solutions.

Squared distances are the canonical representation throughout: every stored
entry is rho(i, j)**2. Symmetry, nonnegativity, and a zero diagonal are
required; the triangle inequality is not. Entries may be ints, Fractions, or
floats. Spaces whose entries are all int/Fraction support exact predicates
downstream (floats are treated as inexact even though every float is a
rational number).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import TYPE_CHECKING, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

if TYPE_CHECKING:
    from .geometry import Realization

Scalar = Union[int, float, Fraction]
Pair = tuple[int, int]


def as_pair(i: int, j: int) -> Pair:
    """Canonical (low, high) form of an unordered pair of distinct points."""
    if i == j:
        raise ValueError(f"pair ({i}, {j}) must join two distinct points")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class DistanceSpace:
    """A finite distance space stored as a squared-distance matrix."""

    labels: tuple[str, ...]
    sqdist: tuple[tuple[Scalar, ...], ...]

    @classmethod
    def from_matrix(
        cls,
        matrix: Sequence[Sequence[Scalar]],
        labels: Optional[Sequence[str]] = None,
    ) -> "DistanceSpace":
        """Build a space from a square matrix, raising on invalid input."""
        rows = tuple(tuple(row) for row in matrix)
        if labels is None:
            labels = tuple(str(i + 1) for i in range(len(rows)))
        space = cls(tuple(str(s) for s in labels), rows)
        issue = validate(space)
        if issue is not None:
            raise ValueError(issue)
        return space

    @property
    def n(self) -> int:
        return len(self.labels)

    def points(self) -> range:
        return range(self.n)

    def pair_sq(self, i: int, j: int) -> Scalar:
        return self.sqdist[i][j]

    @cached_property
    def as_array(self) -> np.ndarray:
        arr = np.array([[float(v) for v in row] for row in self.sqdist])
        arr.setflags(write=False)
        return arr

    @cached_property
    def max_sq(self) -> float:
        if self.n == 0:
            return 0.0
        return float(self.as_array.max())

    @cached_property
    def is_rational(self) -> bool:
        """True when every entry is an int or Fraction (exact backend valid)."""
        return all(
            isinstance(v, (int, Fraction)) and not isinstance(v, bool)
            for row in self.sqdist
            for v in row
        )

    @cached_property
    def _caches(self) -> dict:
        # shared memoization slot for geometry analyses; cached_property writes
        # straight into __dict__, which works on frozen dataclasses
        return {}

    def __hash__(self) -> int:
        return hash((self.labels, self.sqdist))


def validate(space: DistanceSpace) -> Optional[str]:
    """Return None when the space is valid, else the first violation found.

    Checks run in order: squareness, asymmetry, negative entries, nonzero
    diagonal.
    """
    n = space.n
    if len(space.sqdist) != n or any(len(row) != n for row in space.sqdist):
        return "matrix is not square or does not match the label count"
    for i in range(n):
        for j in range(i + 1, n):
            if space.sqdist[i][j] != space.sqdist[j][i]:
                return f"asymmetric at ({i}, {j})"
    for i in range(n):
        for j in range(n):
            if space.sqdist[i][j] < 0:
                return f"negative entry at ({i}, {j})"
    for i in range(n):
        if space.sqdist[i][i] != 0:
            return f"nonzero diagonal at {i}"
    return None


def restrict(space: DistanceSpace, delete: Iterable[int]) -> DistanceSpace:
    """Delete the given points and reindex the rest, keeping label order."""
    dels = set(delete)
    for i in dels:
        if not (0 <= i < space.n):
            raise ValueError(f"unknown point index {i}")
    keep = [i for i in space.points() if i not in dels]
    labels = tuple(space.labels[i] for i in keep)
    rows = tuple(tuple(space.sqdist[i][j] for j in keep) for i in keep)
    return DistanceSpace(labels, rows)


def apply_modifications(
    space: DistanceSpace, mods: Mapping[Pair, Scalar]
) -> DistanceSpace:
    """Return a new space with the given pairs set to new squared values."""
    canon: dict[Pair, Scalar] = {}
    for (i, j), value in mods.items():
        p = as_pair(i, j)
        if not (0 <= p[0] and p[1] < space.n):
            raise ValueError(f"unknown point index in pair ({i}, {j})")
        if value < 0:
            raise ValueError(f"negative squared distance {value!r} for pair {p}")
        canon[p] = value
    rows = [list(row) for row in space.sqdist]
    for (i, j), value in canon.items():
        rows[i][j] = value
        rows[j][i] = value
    return DistanceSpace(space.labels, tuple(tuple(r) for r in rows))


def _unit_weights(n: int) -> tuple[int, ...]:
    return tuple(1 for _ in range(n))


@dataclass(frozen=True, eq=True)
class WeightedInstance:
    """A repair instance: space, target dimension, budgets, and weights.

    w_mod is sparse: pairs absent from the mapping have weight 1. W defaults
    to the sum of all weights, which makes the weight budget vacuous.
    """

    space: DistanceSpace
    d: int
    k_out: int = 0
    k_mod: int = 0
    W: int = 0
    w_out: tuple[int, ...] = ()
    w_mod: Mapping[Pair, int] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        space: DistanceSpace,
        d: int,
        k_out: int = 0,
        k_mod: int = 0,
        W: Optional[int] = None,
        w_out: Optional[Sequence[int]] = None,
        w_mod: Optional[Mapping[Pair, int]] = None,
    ) -> "WeightedInstance":
        if d < 1:
            raise ValueError(f"dimension must be at least 1, got {d}")
        if k_out < 0 or k_mod < 0:
            raise ValueError("budgets must be nonnegative")
        wo = tuple(w_out) if w_out is not None else _unit_weights(space.n)
        if len(wo) != space.n:
            raise ValueError("w_out length must match the number of points")
        wm = {as_pair(i, j): w for (i, j), w in (w_mod or {}).items()}
        if any(w < 0 for w in wo) or any(w < 0 for w in wm.values()):
            raise ValueError("weights must be nonnegative")
        if W is None:
            n = space.n
            W = sum(wo) + sum(wm.values()) + (n * (n - 1)) // 2 - len(wm)
        if W < 0:
            raise ValueError("weight budget must be nonnegative")
        return cls(space, d, k_out, k_mod, W, wo, dict(wm))

    def out_weight(self, i: int) -> int:
        return self.w_out[i]

    def mod_weight(self, i: int, j: int) -> int:
        return self.w_mod.get(as_pair(i, j), 1)


@dataclass(frozen=True)
class Solution:
    """A repair: deleted points, modified pairs (new squared values), cost."""

    outliers: frozenset[int] = frozenset()
    modifications: Mapping[Pair, Scalar] = field(default_factory=dict)
    realization: Optional["Realization"] = None
    cost: int = 0

    @classmethod
    def empty(cls, realization: Optional["Realization"] = None) -> "Solution":
        return cls(frozenset(), {}, realization, 0)


def solution_cost(instance: WeightedInstance, solution: Solution) -> int:
    """Total weight of a solution under the instance's weights."""
    total = sum(instance.out_weight(i) for i in solution.outliers)
    total += sum(instance.mod_weight(i, j) for (i, j) in solution.modifications)
    return total


def repaired_space(instance: WeightedInstance, solution: Solution) -> DistanceSpace:
    """Apply a solution to the instance's space: modify pairs, then delete.

    Point indices in the result are reindexed; modification pairs refer to the
    original indexing.
    """
    modified = apply_modifications(instance.space, solution.modifications)
    return restrict(modified, solution.outliers)
