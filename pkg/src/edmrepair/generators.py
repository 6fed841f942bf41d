"""Instance generators with known ground truth.

Planted instances sample integer coordinates, so their squared distances
are exact and the attached witness realization is checkable to machine
precision. The three reduction builders map vertex cover, max cut, and
column-deletion rank reduction onto repair instances; each is a yes
instance exactly when the source problem is. paper_example returns the
nine-point worked example used as a golden fixture throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterator, Optional, Sequence

import numpy as np

from . import oracle
from .core import (
    DistanceSpace,
    Pair,
    Scalar,
    Solution,
    WeightedInstance,
    solution_cost,
)
from .geometry import Realization

__all__ = [
    "Graph",
    "PlantedSpec",
    "PlantedInstance",
    "planted_instance",
    "vc_reduction",
    "maxcut_reduction",
    "rank_reduction",
    "paper_example",
]

_NOISE_KINDS = ("random-inconsistent", "perturbed")
_MAX_RESAMPLE = 50


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices 0..n-1."""

    n: int
    edges: frozenset[Pair]

    @classmethod
    def build(cls, n: int, edges: Sequence[tuple[int, int]] = ()) -> "Graph":
        if n < 0:
            raise ValueError(f"vertex count must be nonnegative, got {n}")
        canon: set[Pair] = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range")
            canon.add((min(u, v), max(u, v)))
        return cls(n, frozenset(canon))

    def adjacency(self) -> dict[int, frozenset[int]]:
        nbrs: dict[int, set[int]] = {v: set() for v in range(self.n)}
        for u, v in self.edges:
            nbrs[u].add(v)
            nbrs[v].add(u)
        return {v: frozenset(s) for v, s in nbrs.items()}


@dataclass(frozen=True)
class PlantedSpec:
    """Parameters for a random instance with a planted repair."""

    n: int
    d: int
    k_out_planted: int = 0
    k_mod_planted: int = 0
    box: int = 10
    noise_kind: str = "random-inconsistent"
    seed: int = 0

    @classmethod
    def build(
        cls,
        n: int,
        d: int,
        k_out_planted: int = 0,
        k_mod_planted: int = 0,
        box: int = 10,
        noise_kind: str = "random-inconsistent",
        seed: int = 0,
    ) -> "PlantedSpec":
        if d < 1:
            raise ValueError(f"dimension must be at least 1, got {d}")
        if not (n > k_out_planted >= 0):
            raise ValueError("need n > k_out_planted >= 0")
        if k_mod_planted < 0:
            raise ValueError("k_mod_planted must be nonnegative")
        base = n - k_out_planted
        if k_mod_planted > base * (base - 1) // 2:
            raise ValueError("more scrambled pairs requested than base pairs exist")
        if box < 1:
            raise ValueError("box must be at least 1")
        if noise_kind not in _NOISE_KINDS:
            raise ValueError(f"unknown noise kind {noise_kind!r}")
        if seed < 0:
            raise ValueError("seed must be nonnegative")
        return cls(n, d, k_out_planted, k_mod_planted, box, noise_kind, seed)


@dataclass(frozen=True)
class PlantedInstance:
    """Generator output: the instance, the planted repair, and whether
    brute force confirmed that repair is optimal (else it is only an
    upper bound on Opt)."""

    instance: WeightedInstance
    truth: Solution
    opt_confirmed: bool

    def __iter__(self) -> Iterator:
        # allows  inst, truth = planted_instance(spec)
        yield self.instance
        yield self.truth


def _sqdist_int(a: Sequence[int], b: Sequence[int]) -> int:
    return sum((int(x) - int(y)) ** 2 for x, y in zip(a, b))


def _sample(spec: PlantedSpec, attempt: int) -> tuple[WeightedInstance, Solution]:
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, attempt]))
    n, m = spec.n, spec.n - spec.k_out_planted
    high = 4 * spec.d * spec.box * spec.box
    coords = rng.integers(-spec.box, spec.box + 1, size=(m, spec.d))
    sq: list[list[Scalar]] = [[0] * n for _ in range(n)]
    for a in range(m):
        for b in range(a + 1, m):
            v = _sqdist_int(coords[a], coords[b])
            sq[a][b] = sq[b][a] = v

    # outlier rows come after the base block; each row only fills entries
    # to earlier points so later rows never overwrite it
    positions = [tuple(int(c) for c in coords[i]) for i in range(m)]
    for o in range(m, n):
        if spec.noise_kind == "perturbed":
            pos = tuple(int(c) for c in rng.integers(-spec.box, spec.box + 1, size=spec.d))
            positions.append(pos)
            for t in range(o):
                true = _sqdist_int(pos, positions[t])
                delta = int(rng.integers(-spec.box**2, spec.box**2 + 1))
                val = max(0, true + delta)
                sq[o][t] = sq[t][o] = val
        else:
            for t in range(o):
                val = int(rng.integers(1, high + 1))
                sq[o][t] = sq[t][o] = val

    mods: dict[Pair, Scalar] = {}
    if spec.k_mod_planted:
        pairs = list(combinations(range(m), 2))
        picks = rng.choice(len(pairs), size=spec.k_mod_planted, replace=False)
        for p in sorted(int(x) for x in picks):
            a, b = pairs[p]
            orig = sq[a][b]
            while True:
                val = int(rng.integers(0, high + 1))
                if val != orig:
                    break
            sq[a][b] = sq[b][a] = val
            mods[(a, b)] = orig

    space = DistanceSpace.from_matrix(sq)
    inst = WeightedInstance.build(
        space, spec.d, k_out=spec.k_out_planted, k_mod=spec.k_mod_planted
    )
    witness = Realization(
        dim=spec.d, coords={i: tuple(map(float, coords[i])) for i in range(m)}
    )
    truth = Solution(frozenset(range(m, n)), mods, witness, cost=0)
    truth = Solution(truth.outliers, mods, witness, solution_cost(inst, truth))
    return inst, truth


def planted_instance(spec: PlantedSpec) -> PlantedInstance:
    """Sample an instance whose planted repair is known.

    The base points live on an integer grid, outlier rows get distances
    from the configured noise model, and k_mod_planted base pairs are
    overwritten with wrong values. When the instance is small enough for
    the brute-force oracle, sampling repeats (up to 50 draws) until the
    oracle agrees the planted cost is optimal; if no draw is confirmed
    the last one is returned with opt_confirmed False, meaning the truth
    is only an upper bound.
    """
    confirmable = spec.n <= oracle.DEFAULT_BUDGET.max_points
    last: Optional[PlantedInstance] = None
    for attempt in range(_MAX_RESAMPLE):
        inst, truth = _sample(spec, attempt)
        if not confirmable:
            return PlantedInstance(inst, truth, False)
        best = (
            oracle.brute_force_eeo(inst)
            if inst.k_mod == 0
            else oracle.brute_force_weeo(inst)
        )
        if best is not None and best.cost == truth.cost:
            return PlantedInstance(inst, truth, True)
        last = PlantedInstance(inst, truth, False)
    assert last is not None
    return last


def vc_reduction(graph: Graph, k: int) -> WeightedInstance:
    """Vertex-cover instance (G, k) as a line repair problem.

    Builds k+2 anchor points in arithmetic progression plus one point per
    vertex. Anchor-to-vertex distances pin every surviving vertex point
    to a forced line position, and two adjacent vertices clash because
    their distance is 0 while their positions differ. Deleting at most k
    outliers fixes the space exactly when G has a vertex cover of size
    at most k.
    """
    n = graph.n
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= vertex count, got k={k}")
    p = k + 2
    total = p + n
    sq: list[list[Scalar]] = [[0] * total for _ in range(total)]
    for a in range(p):
        for b in range(a + 1, p):
            sq[a][b] = sq[b][a] = (a - b) ** 2
    for a in range(p):
        for b in range(n):
            # 1-based anchor index plus 1-based vertex index
            val = (a + 1 + b + 1) ** 2
            sq[a][p + b] = sq[p + b][a] = val
    for a in range(n):
        for b in range(a + 1, n):
            val = 0 if (a, b) in graph.edges else (a - b) ** 2
            sq[p + a][p + b] = sq[p + b][p + a] = val
    labels = [f"p{i + 1}" for i in range(p)] + [f"x{j + 1}" for j in range(n)]
    space = DistanceSpace.from_matrix(sq, labels)
    return WeightedInstance.build(space, 1, k_out=k)


def maxcut_reduction(graph: Graph, ell: int) -> WeightedInstance:
    """Max-cut instance (G, ell) as a line repair problem.

    C(n,2) - ell pairs may be modified. All anchor points coincide and
    every vertex point sits at distance 1 from them, so vertex points
    land on {-1, +1}: a bipartition. Edges want distance 2 (opposite
    sides), and each pair that disagrees with the partition costs one
    modification, so the budget suffices exactly when some cut has at
    least ell edges.
    """
    n = graph.n
    npairs = n * (n - 1) // 2
    if not 1 <= ell <= npairs:
        raise ValueError(f"need 1 <= ell <= C(n,2)={npairs}, got ell={ell}")
    k = npairs - ell
    p = k + 1
    total = p + n
    sq: list[list[Scalar]] = [[0] * total for _ in range(total)]
    for a in range(p):
        for b in range(n):
            sq[a][p + b] = sq[p + b][a] = 1
    for a in range(n):
        for b in range(a + 1, n):
            val = 4 if (a, b) in graph.edges else 1
            sq[p + a][p + b] = sq[p + b][p + a] = val
    labels = [f"p{i}" for i in range(p)] + [f"x{j + 1}" for j in range(n)]
    space = DistanceSpace.from_matrix(sq, labels)
    return WeightedInstance.build(space, 1, k_mod=k)


def _exact_rank(rows: list[list[Fraction]]) -> int:
    m = [row[:] for row in rows]
    rank = 0
    for c in range(len(m[0]) if m else 0):
        piv = next((r for r in range(rank, len(m)) if m[r][c] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        prow = m[rank]
        for r in range(len(m)):
            if r != rank and m[r][c] != 0:
                f = m[r][c] / prow[c]
                m[r] = [a - f * b for a, b in zip(m[r], prow)]
        rank += 1
        if rank == len(m):
            break
    return rank


def _entry(v) -> Scalar:
    if isinstance(v, bool):
        raise ValueError("boolean matrix entries are not supported")
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, (int, float, Fraction)):
        return v
    raise ValueError(f"unsupported matrix entry {v!r}")


def rank_reduction(matrix, h: int, k: int) -> WeightedInstance:
    """Column-deletion rank reduction as an outlier problem.

    Points are the columns of the matrix plus k+1 coincident anchors at
    the origin; distances are Euclidean between columns, stored squared
    and exact for integer or Fraction input. The target dimension is
    rank(M) - h: deleting at most k column points leaves the rest inside
    a (rank-h)-dimensional subspace exactly when deleting those columns
    drops the rank by at least h.
    """
    rows = [[_entry(v) for v in row] for row in matrix]
    if not rows or not rows[0]:
        raise ValueError("matrix must be nonempty")
    ncols = len(rows[0])
    if any(len(r) != ncols for r in rows):
        raise ValueError("matrix rows must have equal length")
    cols = [[row[c] for row in rows] for c in range(ncols)]
    for j, col in enumerate(cols):
        if all(v == 0 for v in col):
            raise ValueError(f"zero column at index {j}")
    if h < 1:
        raise ValueError(f"h must be positive, got {h}")
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    exact = all(isinstance(v, (int, Fraction)) for row in rows for v in row)
    if exact:
        rank = _exact_rank([[Fraction(v) for v in row] for row in rows])
    else:
        rank = int(np.linalg.matrix_rank(np.array(rows, dtype=float)))
    if h > rank:
        raise ValueError(f"h={h} exceeds the matrix rank {rank}")
    d = rank - h
    if d < 1:
        raise ValueError(
            f"target dimension rank-h = {d} is below 1; reduce h or use a higher-rank matrix"
        )

    def dot(u, v):
        return sum(a * b for a, b in zip(u, v))

    p = k + 1
    total = p + ncols
    sq: list[list[Scalar]] = [[0] * total for _ in range(total)]
    for a in range(p):
        for b in range(ncols):
            sq[a][p + b] = sq[p + b][a] = dot(cols[b], cols[b])
    for a in range(ncols):
        for b in range(a + 1, ncols):
            diff = [x - y for x, y in zip(cols[a], cols[b])]
            sq[p + a][p + b] = sq[p + b][p + a] = dot(diff, diff)
    labels = [f"p{i}" for i in range(p)] + [f"x{j + 1}" for j in range(ncols)]
    space = DistanceSpace.from_matrix(sq, labels)
    return WeightedInstance.build(space, d, k_out=k)


_EXAMPLE_SQ = (
    (0, 7, 1, 2, 4, 5, 1, 4, 5),
    (7, 0, 2, 1, 1, 2, 10, 5, 4),
    (1, 2, 0, 1, 11, 4, 4, 1, 2),
    (2, 1, 1, 0, 2, 1, 8, 2, 1),
    (4, 1, 11, 2, 0, 1, 12, 8, 5),
    (5, 2, 4, 1, 1, 0, 7, 5, 2),
    (1, 10, 4, 8, 12, 7, 0, 8, 9),
    (4, 5, 1, 2, 8, 5, 8, 0, 1),
    (5, 4, 2, 1, 5, 2, 9, 1, 0),
)


def paper_example() -> WeightedInstance:
    """The nine-point worked example: delete one point and rewrite two
    pair values, total weight at most 3, to reach a planar space."""
    space = DistanceSpace.from_matrix(
        _EXAMPLE_SQ, [f"x{i + 1}" for i in range(9)]
    )
    return WeightedInstance.build(space, 2, k_out=1, k_mod=2, W=3)
