"""Polynomial-time approximation for outlier deletion.

Two routes to a small d-outlier set:

* obstruction sets: a non-embeddable space always contains a witness of at
  most d+3 points meeting every inclusion-minimal outlier set, and removing
  such witnesses greedily gives a (d+3)-factor approximation;
* a randomized sieve that grows an independent set level by level, splits
  the remaining points into compatible / defective / incompatible classes,
  and turns the compatible class into a vertex cover instance. The best
  candidate over all levels, dimension guesses, and trials is within factor
  2 of optimal with constant probability.

Every sieve candidate is re-verified against the original dimension before
it can be returned, so the output is feasible unconditionally; randomness
only affects the quality of the bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from .core import DistanceSpace
from .geometry import (
    DEFAULT_TOL,
    ToleranceConfig,
    is_embeddable,
    strong_dim,
)

__all__ = [
    "SieveState",
    "TwoApproxTrace",
    "greedy_outliers",
    "incompatibility_graph",
    "obstruction_set",
    "run_sieve",
    "two_approx_outliers",
    "vertex_cover_2approx",
]


def _ground(space: DistanceSpace, subset: Optional[Iterable[int]]) -> list[int]:
    if subset is None:
        return list(space.points())
    pts = sorted(set(subset))
    for i in pts:
        if not (0 <= i < space.n):
            raise ValueError(f"unknown point index {i}")
    return pts


def obstruction_set(
    space: DistanceSpace,
    d: int,
    subset: Optional[Iterable[int]] = None,
    exact: Optional[bool] = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> Optional[frozenset[int]]:
    """A set of at most d+3 points meeting every minimal d-outlier set.

    Returns None when the (sub)space is d-embeddable. Otherwise grows an
    independent set A from the lowest-index point; if some candidate x makes
    A+{x} non-|A|-embeddable that already is a witness, else A is extended
    while possible. Finally a pair x, y (possibly equal: a single extra
    point can complete a witness when only one point remains outside A)
    with A+{x,y} not (|A|-1)-embeddable is attached.
    """
    if d < 1:
        raise ValueError(f"dimension must be at least 1, got {d}")
    ground = _ground(space, subset)
    if is_embeddable(space, ground, d, exact=exact, tol=tol):
        return None

    A = [ground[0]]
    while len(A) <= d:
        rest = [x for x in ground if x not in A]
        hit = next(
            (
                x
                for x in rest
                if not is_embeddable(space, A + [x], len(A), exact=exact, tol=tol)
            ),
            None,
        )
        if hit is not None:
            return frozenset(A) | {hit}
        ext = next(
            (
                x
                for x in rest
                if strong_dim(space, A + [x], exact=exact, tol=tol) == len(A)
            ),
            None,
        )
        if ext is None:
            break
        A.append(ext)

    r = len(A) - 1
    rest = [x for x in ground if x not in A]
    for ix, x in enumerate(rest):
        for y in rest[ix:]:
            pts = A + [x] if x == y else A + [x, y]
            if not is_embeddable(space, pts, r, exact=exact, tol=tol):
                return frozenset(pts)
    raise RuntimeError("non-embeddable space yielded no obstruction witness")


def greedy_outliers(
    space: DistanceSpace,
    d: int,
    subset: Optional[Iterable[int]] = None,
    exact: Optional[bool] = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> frozenset[int]:
    """Remove obstruction sets until the residual embeds in R^d.

    Each removed set contains at least one point of every optimal solution
    and has at most d+3 points, so the result is within factor d+3.
    """
    ground = _ground(space, subset)
    out: set[int] = set()
    while True:
        residual = [x for x in ground if x not in out]
        obs = obstruction_set(space, d, residual, exact=exact, tol=tol)
        if obs is None:
            return frozenset(out)
        out |= obs


def vertex_cover_2approx(graph: Mapping[int, Iterable[int]]) -> frozenset[int]:
    """Both endpoints of a greedily grown maximal matching.

    The input is an adjacency mapping of a simple undirected graph. The
    result covers every edge and has size at most twice the minimum cover.
    """
    cover: set[int] = set()
    for u in sorted(graph):
        if u in cover:
            continue
        for v in sorted(graph[u]):
            if v != u and v not in cover:
                cover.add(u)
                cover.add(v)
                break
    return frozenset(cover)


def incompatibility_graph(
    space: DistanceSpace,
    basis: Iterable[int],
    members: Iterable[int],
    r: int,
    exact: Optional[bool] = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> dict[int, frozenset[int]]:
    """Adjacency over members: x, y clash when basis+{x,y} does not embed
    in R^r even though each of x, y individually does."""
    base = sorted(basis)
    ms = sorted(members)
    adj: dict[int, set[int]] = {x: set() for x in ms}
    for ix, x in enumerate(ms):
        for y in ms[ix + 1 :]:
            if not is_embeddable(space, base + [x, y], r, exact=exact, tol=tol):
                adj[x].add(y)
                adj[y].add(x)
    return {x: frozenset(nb) for x, nb in adj.items()}


@dataclass(frozen=True)
class SieveState:
    """Point classes at one sieve level.

    U is the independent set grown so far (level-1 points when every earlier
    incompatible class was nonempty). Relative to U, a remaining point is
    compatible when it embeds with U in R^(level-2), defective when it does
    not embed with U even in the run dimension, and incompatible otherwise.
    """

    level: int
    U: tuple[int, ...]
    C_comp: frozenset[int]
    C_def: frozenset[int]
    C_incomp: frozenset[int]


@dataclass(frozen=True)
class TwoApproxTrace:
    """Everything one sieve run produced, for inspection and testing."""

    states: tuple[SieveState, ...]
    graphs: tuple[Mapping[int, frozenset[int]], ...]
    covers: tuple[frozenset[int], ...]
    candidates: tuple[frozenset[int], ...]
    feasible: tuple[bool, ...]
    best: Optional[int]


def _prefer(a: frozenset[int], b: Optional[frozenset[int]]) -> bool:
    """Smaller set wins; lexicographic order breaks ties."""
    if b is None:
        return True
    return (len(a), sorted(a)) < (len(b), sorted(b))


def run_sieve(
    space: DistanceSpace,
    d: int,
    rng: np.random.Generator,
    subset: Optional[Iterable[int]] = None,
    verify_dim: Optional[int] = None,
    exact: Optional[bool] = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> TwoApproxTrace:
    """One randomized pass over levels 1..d+2.

    At each level the remaining points are classified against the current
    independent set U, the compatible class is covered via its clash graph,
    and the candidate consists of the cover plus the incompatible and
    defective classes. Candidates are verified at verify_dim (the original
    dimension when d is a guess); infeasible ones are recorded but never
    best. The next U-element is drawn uniformly from the incompatible
    class; when that class runs dry U stays frozen for later levels.
    """
    if d < 1:
        raise ValueError(f"dimension must be at least 1, got {d}")
    ground = _ground(space, subset)
    dv = d if verify_dim is None else verify_dim
    U: list[int] = []
    states: list[SieveState] = []
    graphs: list[Mapping[int, frozenset[int]]] = []
    covers: list[frozenset[int]] = []
    cands: list[frozenset[int]] = []
    feas: list[bool] = []
    for level in range(1, d + 3):
        rest = [y for y in ground if y not in U]
        comp = frozenset(
            y
            for y in rest
            if is_embeddable(space, U + [y], level - 2, exact=exact, tol=tol)
        )
        cdef = frozenset(
            y
            for y in rest
            if y not in comp
            and not is_embeddable(space, U + [y], d, exact=exact, tol=tol)
        )
        cinc = frozenset(y for y in rest if y not in comp and y not in cdef)
        states.append(SieveState(level, tuple(U), comp, cdef, cinc))

        g = incompatibility_graph(space, U, comp, level - 2, exact=exact, tol=tol)
        q = vertex_cover_2approx(g)
        a = frozenset(q | cinc | cdef)
        kept = [y for y in ground if y not in a]
        graphs.append(g)
        covers.append(q)
        cands.append(a)
        feas.append(is_embeddable(space, kept, dv, exact=exact, tol=tol))

        # the last level only classifies; no further U-element is needed
        if level <= d + 1 and cinc:
            picks = sorted(cinc)
            U.append(picks[int(rng.integers(len(picks)))])

    best: Optional[int] = None
    for i, (a, ok) in enumerate(zip(cands, feas), start=1):
        if ok and _prefer(a, None if best is None else cands[best - 1]):
            best = i
    return TwoApproxTrace(
        tuple(states), tuple(graphs), tuple(covers), tuple(cands), tuple(feas), best
    )


def two_approx_outliers(
    space: DistanceSpace,
    d: int,
    seed: Optional[int] = None,
    trials: Optional[int] = None,
    subset: Optional[Iterable[int]] = None,
    exact: Optional[bool] = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> frozenset[int]:
    """Randomized outlier deletion, within factor 2 with constant probability.

    Runs the sieve for every dimension guess d' in 1..d and `trials`
    independent trials per guess (default 2^(d+1), which bounds the overall
    failure probability by 1-1/e). Trial t of guess d' draws its generator
    from the seed triple (seed, d', t), so a fixed seed reproduces the run
    exactly. The returned set always leaves an R^d-embeddable residual;
    level 1 contributes the full point set as a fallback candidate.
    """
    if d < 1:
        raise ValueError(f"dimension must be at least 1, got {d}")
    if trials is None:
        trials = 2 ** (d + 1)
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    ground = _ground(space, subset)
    if is_embeddable(space, ground, d, exact=exact, tol=tol):
        return frozenset()
    root = seed if seed is not None else np.random.SeedSequence().entropy
    best: Optional[frozenset[int]] = None
    for guess in range(1, d + 1):
        for t in range(trials):
            rng = np.random.default_rng(np.random.SeedSequence([root, guess, t]))
            trace = run_sieve(
                space,
                guess,
                rng,
                subset=ground,
                verify_dim=d,
                exact=exact,
                tol=tol,
            )
            for a, ok in zip(trace.candidates, trace.feasible):
                if ok and _prefer(a, best):
                    best = a
    assert best is not None  # level 1 always yields the full point set
    return best
