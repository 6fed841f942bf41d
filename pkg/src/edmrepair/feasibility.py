"""Realizability when a designated set of pairs is free.

feasible_with_free_pairs decides, numerically, whether the points can be
placed in R^r so that every pair outside `free_pairs` gets its prescribed
squared distance; free pairs may take any nonnegative value. A yes answer
always comes with a realization and the induced free-pair values, and is
checked by verify_witness before being returned. A no answer is one-sided:
the search can miss a witness, except on the layered fast paths below which
decide exactly:

* no free pairs: the rank engine decides;
* every endpoint cover of the free pairs leaves a fixed subspace that must
  embed as-is, so a failing cover proves infeasibility;
* a single free pair {a,b} is feasible iff both X minus a and X minus b
  embed (glue the two realizations along their common points);
* on a line, embeddings are sign assignments over a spanning forest of the
  fixed-pair graph and can be enumerated.

Everything else goes to damped Gauss-Newton least squares from a
deterministic warm start plus seeded random restarts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from .core import DistanceSpace, Pair, as_pair
from .geometry import (
    Realization,
    cm_det_with_overrides,
    is_embeddable,
    realize,
)

__all__ = [
    "PartialRealizationProblem",
    "feasible_with_free_pairs",
    "verify_witness",
]

FeasibleWitness = tuple[Realization, dict[Pair, float]]

_COVER_ENUM_CAP = 256
_LINE_COMPONENT_CAP = 18
_LINE_NODE_CAP = 1 << 18


@dataclass(frozen=True)
class PartialRealizationProblem:
    """Points with fixed squared distances except on free_pairs, target R^dim."""

    space: DistanceSpace
    free_pairs: frozenset[Pair]
    dim: int
    restarts: int = 20
    max_iters: int = 500
    residual_tol: float = 1e-7
    seed: int = 0

    @classmethod
    def build(
        cls,
        space: DistanceSpace,
        free_pairs: Iterable[Pair],
        dim: int,
        restarts: int = 20,
        max_iters: int = 500,
        residual_tol: float = 1e-7,
        seed: int = 0,
    ) -> "PartialRealizationProblem":
        if dim < 0:
            raise ValueError(f"dimension must be nonnegative, got {dim}")
        if restarts < 0 or max_iters < 1 or residual_tol <= 0:
            raise ValueError("bad search parameters")
        canon = set()
        for i, j in free_pairs:
            p = as_pair(i, j)
            if not (0 <= p[0] and p[1] < space.n):
                raise ValueError(f"free pair {p} outside the point range")
            canon.add(p)
        return cls(space, frozenset(canon), dim, restarts, max_iters, residual_tol, seed)


def _fixed_pairs(space: DistanceSpace, free: frozenset[Pair]) -> list[Pair]:
    n = space.n
    return [(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in free]


def _scale(space: DistanceSpace, fixed: Sequence[Pair]) -> float:
    vals = [float(space.sqdist[i][j]) for i, j in fixed]
    return max(1.0, max(vals, default=0.0))


# ------------------------------------------------------------------ verify


def _cm_at(
    space: DistanceSpace,
    points: Sequence[int],
    overrides: Mapping[Pair, float],
) -> float:
    pts = set(points)
    rel = {p: v for p, v in overrides.items() if p[0] in pts and p[1] in pts}
    return float(cm_det_with_overrides(space, points, rel, exact=False))


def verify_witness(
    space: DistanceSpace,
    free_pairs: Iterable[Pair],
    r: int,
    realization: Realization,
    tol: float = 1e-7,
) -> bool:
    """Check a realization the way the sign-condition formula does.

    (a) every fixed pair reproduces its squared distance, (b) the realized
    free-pair values substituted into the bordered determinants satisfy the
    sign chain of a greedily grown anchor set and the vanishing conditions
    for the remaining points and pairs, (c) substituted values stay
    nonnegative. Thresholds scale with the determinant's homogeneity degree,
    so the verdict is invariant under rescaling all squared distances.
    """
    n = space.n
    pts = list(range(n))
    if any(i not in realization.coords for i in pts):
        return False
    if realization.dim != r:
        return False
    free = {as_pair(i, j) for i, j in free_pairs}

    over: dict[Pair, float] = {}
    for i, j in free:
        v = realization.pair_sq(i, j)
        if v < 0:
            return False
        over[(i, j)] = v

    sub_vals = [
        over.get((i, j), float(space.sqdist[i][j]))
        for i in range(n)
        for j in range(i + 1, n)
    ]
    scale = max(1.0, max(sub_vals, default=0.0))

    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) in free:
                continue
            if abs(realization.pair_sq(i, j) - float(space.sqdist[i][j])) > tol * scale:
                return False
    if n == 0:
        return True

    def sign_band(deg: int) -> float:
        return tol * scale**deg

    def vanish_band(deg: int) -> float:
        return 100.0 * tol * scale**deg

    anchors = [0]
    while len(anchors) <= r + 1:
        j = len(anchors)
        ext = None
        for x in pts:
            if x in anchors:
                continue
            val = _cm_at(space, anchors + [x], over)
            if (-1) ** (j + 1) * val > sign_band(j):
                ext = x
                break
        if ext is None:
            break
        if j == r + 1:
            return False  # the data needs more than r dimensions
        anchors.append(ext)

    rest = [x for x in pts if x not in anchors]
    deg1 = len(anchors)
    for x in rest:
        if abs(_cm_at(space, anchors + [x], over)) > vanish_band(deg1):
            return False
    for ix, x in enumerate(rest):
        for y in rest[ix + 1 :]:
            if abs(_cm_at(space, anchors + [x, y], over)) > vanish_band(deg1 + 1):
                return False
    return True


# ------------------------------------------------------------- fast layers


def _verified(
    problem: PartialRealizationProblem,
    coords: Mapping[int, tuple[float, ...]],
) -> Optional[FeasibleWitness]:
    re = Realization(problem.dim, dict(coords))
    if not verify_witness(
        problem.space, problem.free_pairs, problem.dim, re, problem.residual_tol
    ):
        return None
    values = {p: re.pair_sq(*p) for p in sorted(problem.free_pairs)}
    return re, values


def _cover_prune(problem: PartialRealizationProblem) -> bool:
    """True when some endpoint cover of the free pairs leaves a subspace
    that provably does not embed; such an instance is infeasible."""
    sp = problem.space
    free = sorted(problem.free_pairs)
    r = problem.dim
    touched = sorted({i for p in free for i in p})
    base = [i for i in range(sp.n) if i not in touched]
    if not is_embeddable(sp, base, r):
        return True
    if 2 ** len(free) > _COVER_ENUM_CAP:
        return False
    for choice in itertools.product(*free):
        cover = set(choice)
        keep = [i for i in range(sp.n) if i not in cover]
        if not is_embeddable(sp, keep, r):
            return True
    return False


def _kabsch(Q: np.ndarray, P: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orthogonal map (reflections allowed) with translation taking Q onto P."""
    cQ = Q.mean(axis=0)
    cP = P.mean(axis=0)
    H = (Q - cQ).T @ (P - cP)
    U, _, Vt = np.linalg.svd(H)
    R = U @ Vt
    return R, cQ, cP


def _glue_single_pair(problem: PartialRealizationProblem) -> Optional[FeasibleWitness]:
    """Exact route for one free pair {a, b}: feasible iff the space minus a
    and the space minus b both embed. Realize both, align them on the shared
    points, and read off the induced value."""
    sp = problem.space
    r = problem.dim
    (a, b) = next(iter(problem.free_pairs))
    keep_a = [i for i in range(sp.n) if i != a]
    keep_b = [i for i in range(sp.n) if i != b]
    re_a = realize(sp, keep_a, r)  # has b
    re_b = realize(sp, keep_b, r)  # has a
    if re_a is None or re_b is None:
        return None
    shared = [i for i in range(sp.n) if i not in (a, b)]
    coords = {i: re_a.coords[i] for i in keep_a}
    if shared:
        P = np.array([re_a.coords[i] for i in shared])
        Q = np.array([re_b.coords[i] for i in shared])
        R, cQ, cP = _kabsch(Q, P)
        pos_a = (np.array(re_b.coords[a]) - cQ) @ R + cP
        coords[a] = tuple(float(v) for v in pos_a)
    else:
        coords[a] = re_b.coords[a]
    witness = _verified(problem, coords)
    if witness is None:
        # both sides embed, so a witness exists; hand the construction to
        # the numeric search rather than report a false negative
        return _numeric_search(problem)
    return witness


def _line_components(n: int, fixed: Sequence[Pair]) -> list[list[int]]:
    adj: dict[int, set[int]] = {i: set() for i in range(n)}
    for i, j in fixed:
        adj[i].add(j)
        adj[j].add(i)
    seen: set[int] = set()
    comps = []
    for root in range(n):
        if root in seen:
            continue
        comp = [root]
        seen.add(root)
        queue = [root]
        while queue:
            u = queue.pop()
            for v in sorted(adj[u]):
                if v not in seen:
                    seen.add(v)
                    comp.append(v)
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


def _solve_line(problem: PartialRealizationProblem) -> Optional[tuple[bool, Optional[FeasibleWitness]]]:
    """Sign-assignment enumeration for r=1. Returns (decided, witness) or
    None when the instance is too large to enumerate."""
    sp = problem.space
    fixed = _fixed_pairs(sp, problem.free_pairs)
    scale = _scale(sp, fixed)
    tol = problem.residual_tol * scale
    comps = _line_components(sp.n, fixed)
    if any(len(c) > _LINE_COMPONENT_CAP for c in comps):
        return None
    adj: dict[int, dict[int, float]] = {i: {} for i in range(sp.n)}
    for i, j in fixed:
        d = math.sqrt(float(sp.sqdist[i][j]))
        adj[i][j] = d
        adj[j][i] = d

    budget = _LINE_NODE_CAP
    positions: dict[int, float] = {}
    for comp in comps:
        order = _bfs_order(comp, adj)
        assigned: dict[int, float] = {order[0]: 0.0}

        def consistent(v: int, x: float) -> bool:
            return all(
                abs(abs(x - assigned[u]) - d) <= tol
                for u, d in adj[v].items()
                if u in assigned
            )

        def rec(k: int) -> bool:
            nonlocal budget
            if budget <= 0:
                return False
            budget -= 1
            if k == len(order):
                return True
            v = order[k]
            parent = next(u for u in order[:k] if u in adj[v])
            for s in (1.0, -1.0):
                x = assigned[parent] + s * adj[v][parent]
                if consistent(v, x):
                    assigned[v] = x
                    if rec(k + 1):
                        return True
                    del assigned[v]
            return False

        if not rec(1):
            if budget <= 0:
                return None
            return False, None
        positions.update(assigned)
    coords = {i: (positions[i],) for i in range(sp.n)}
    witness = _verified(problem, coords)
    if witness is None:
        return None
    return True, witness


def _bfs_order(comp: list[int], adj: dict[int, dict[int, float]]) -> list[int]:
    order = [comp[0]]
    seen = {comp[0]}
    qi = 0
    while qi < len(order):
        u = order[qi]
        for v in sorted(adj[u]):
            if v not in seen:
                seen.add(v)
                order.append(v)
        qi += 1
    return order


# --------------------------------------------------------- numeric search


def _warm_coords(
    space: DistanceSpace, free: frozenset[Pair], r: int
) -> dict[int, tuple[float, ...]]:
    """Deterministic start: realize the points untouched by free pairs,
    then trilaterate the rest one at a time over their fixed neighbours."""
    n = space.n
    touched = {i for p in free for i in p}
    base = [i for i in range(n) if i not in touched]
    coords: dict[int, np.ndarray] = {}
    if base:
        re = realize(space, base, r)
        if re is not None:
            coords = {i: np.array(re.coords[i]) for i in base}
        else:
            base = []
    for x in range(n):
        if x in coords:
            continue
        nbrs = [
            u for u in coords
            if (min(u, x), max(u, x)) not in free
        ]
        if not nbrs:
            coords[x] = np.zeros(r)
            continue
        p0 = coords[nbrs[0]]
        s0 = float(space.sqdist[nbrs[0]][x])
        A = np.array([2.0 * (coords[u] - p0) for u in nbrs])
        bvec = np.array(
            [
                s0
                - float(space.sqdist[u][x])
                + float(coords[u] @ coords[u])
                - float(p0 @ p0)
                - 2.0 * float(p0 @ (coords[u] - p0))
                for u in nbrs
            ]
        )
        x0, *_ = np.linalg.lstsq(A, bvec, rcond=None)
        h2 = s0 - float((x0 - p0) @ (x0 - p0))
        if h2 > 0:
            _, s, vt = np.linalg.svd(A)
            rank = int(np.sum(s > 1e-6 * max(1.0, s[0] if s.size else 1.0)))
            if rank < r:
                x0 = x0 + math.sqrt(h2) * vt[rank]
        coords[x] = x0
    return {i: tuple(float(v) for v in coords[i]) for i in range(n)}


def _numeric_search(problem: PartialRealizationProblem) -> Optional[FeasibleWitness]:
    sp = problem.space
    n, r = sp.n, problem.dim
    fixed = _fixed_pairs(sp, problem.free_pairs)
    if not fixed:
        return _verified(problem, {i: (0.0,) * r for i in range(n)})
    scale = _scale(sp, fixed)
    ia = np.array([p[0] for p in fixed])
    ib = np.array([p[1] for p in fixed])
    target = np.array([float(sp.sqdist[i][j]) for i, j in fixed]) / scale

    def fun(v: np.ndarray) -> np.ndarray:
        P = v.reshape(n, r)
        diff = P[ia] - P[ib]
        return (diff * diff).sum(axis=1) / scale - target

    def jac(v: np.ndarray) -> np.ndarray:
        P = v.reshape(n, r)
        J = np.zeros((len(fixed), n * r))
        diff = 2.0 * (P[ia] - P[ib]) / scale
        for k in range(len(fixed)):
            a, b = ia[k], ib[k]
            J[k, a * r : (a + 1) * r] = diff[k]
            J[k, b * r : (b + 1) * r] = -diff[k]
        return J

    width = math.sqrt(scale)
    warm = _warm_coords(sp, problem.free_pairs, r)
    starts: list[np.ndarray] = [
        np.array([warm[i] for i in range(n)], dtype=float).ravel()
    ]
    for t in range(problem.restarts):
        rng = np.random.default_rng(np.random.SeedSequence([problem.seed, t]))
        starts.append(rng.uniform(-width, width, size=n * r))

    for x0 in starts:
        res = least_squares(
            fun, x0, jac=jac, method="trf", max_nfev=problem.max_iters
        )
        P = res.x.reshape(n, r)
        achieved = ((P[ia] - P[ib]) ** 2).sum(axis=1)
        if np.max(np.abs(achieved - target * scale)) > problem.residual_tol * scale:
            continue
        witness = _verified(problem, {i: tuple(map(float, P[i])) for i in range(n)})
        if witness is not None:
            return witness
    return None


# ------------------------------------------------------------------ entry


def feasible_with_free_pairs(
    problem: PartialRealizationProblem,
) -> Optional[FeasibleWitness]:
    """Realization plus induced free-pair values, or None.

    Exact layers run first (see the module docstring); only instances none
    of them can settle reach the randomized numeric search, whose no answer
    is heuristic.
    """
    sp = problem.space
    r = problem.dim
    n = sp.n
    if n == 0:
        return Realization(r, {}), {}
    free = problem.free_pairs

    if r == 0:
        fixed = _fixed_pairs(sp, free)
        scale = _scale(sp, fixed)
        if any(float(sp.sqdist[i][j]) > problem.residual_tol * scale for i, j in fixed):
            return None
        return _verified(problem, {i: () for i in range(n)})

    if not free:
        re = realize(sp, range(n), r)
        if re is None:
            return None
        return re, {}

    if _cover_prune(problem):
        return None

    if len(free) == 1:
        return _glue_single_pair(problem)

    if r == 1:
        line = _solve_line(problem)
        if line is not None:
            decided, witness = line
            return witness if decided else None

    return _numeric_search(problem)
