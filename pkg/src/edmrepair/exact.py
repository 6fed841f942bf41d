"""Exact solvers for the repair problems.

Two branching procedures handle the outlier-only case: one branches over
obstruction sets with (d+3)-way fanout, the other runs a five-line
recursion over an independent anchor set with two-way fanout and the
measure k + d + 1 - |Z|. Both explore every branch within the deletion
and weight budgets and return a minimum-cost solution, ties broken by
set size then lexicographically, so they agree with the brute-force
oracle on optimal cost and not just on yes/no.

compress shrinks an instance to an equivalent one with a point count
polynomial in the budgets and dimension: a greedy hitting set splits the
space into the suspect part A and the clean part Y, Y is partitioned
into maximal independent bases, and counting rules over compatibility
classes force some points of A into every solution and mark the parts of
Y worth keeping. solve_weeo runs compress, enumerates deletion and
modification guesses on the reduced instance in cost order, hands each
to the free-pair feasibility backend, and lifts the first hit back to
the original point set.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Iterable, Mapping, Optional

from .approx import greedy_outliers, obstruction_set
from .core import (
    Pair,
    Scalar,
    Solution,
    WeightedInstance,
    apply_modifications,
    as_pair,
    restrict,
    solution_cost,
)
from .feasibility import PartialRealizationProblem, feasible_with_free_pairs
from .geometry import (
    Realization,
    extend_to_max_independent,
    is_embeddable,
    is_independent,
    realize,
)

__all__ = [
    "BasisPartition",
    "CompressionTrace",
    "CompressionOutcome",
    "GuessTuple",
    "alg1_branch",
    "alg2_branch",
    "solve_eeo",
    "partition_into_bases",
    "compat_tests",
    "compress",
    "solve_weeo",
]


@dataclass(frozen=True)
class BasisPartition:
    """Greedy partition of a d-embeddable point set into maximal
    independent parts Y_1..Y_l, each a metric basis for what remained
    when it was built.

    size_classes maps a size h to the indices (into parts) of the parts
    with exactly h points. h_star is filled in by compress: the largest
    h whose class is big enough for the counting rules.
    """

    parts: tuple[tuple[int, ...], ...]
    size_classes: Mapping[int, tuple[int, ...]]
    h_star: Optional[int] = None


@dataclass(frozen=True)
class CompressionTrace:
    """Everything compress decided on the way to the reduced instance.

    forced_outliers lists (point, rule) in firing order, rule 3 being
    the equivalence-class counting rule and rule 4 the incompatibility
    counting rule. equivalence_classes and large_class are keyed by the
    surviving points of the hitting set; class members are part indices.
    index_map sends reduced point indices to original ones. When the
    small-instance rule returns the input unchanged, the partition
    fields stay empty and index_map is the identity.
    """

    hitting_set: frozenset[int]
    forced_outliers: tuple[tuple[int, int], ...]
    partition: Optional[BasisPartition]
    equivalence_classes: Mapping[int, tuple[tuple[int, ...], ...]]
    large_class: Mapping[int, tuple[int, ...]]
    marked: frozenset[int]
    index_map: tuple[int, ...]
    reduced: WeightedInstance


@dataclass(frozen=True)
class CompressionOutcome:
    """Either a settled answer (with a witness when yes) or a trace
    carrying an equivalent reduced instance."""

    answer: Optional[bool]
    solution: Optional[Solution] = None
    trace: Optional[CompressionTrace] = None


@dataclass(frozen=True)
class GuessTuple:
    """One candidate in the solver's enumeration: outliers to delete,
    pairs to free, and the embedding dimension.

    anchors stays empty during enumeration; the witness verifier grows
    its anchor chain greedily instead of guessing all r+1 subsets up
    front.
    """

    Z_O: tuple[int, ...]
    Z_M: tuple[Pair, ...]
    r: int
    anchors: tuple[int, ...] = ()


def _require_outlier_only(instance: WeightedInstance) -> None:
    if instance.k_mod != 0:
        raise ValueError("outlier-only solver: k_mod must be 0")


def _best_deletion(
    instance: WeightedInstance, candidates: Iterable[frozenset[int]]
) -> Optional[Solution]:
    """Minimum-cost deletion set, ties by size then lexicographically."""
    best = None
    for S in candidates:
        cost = sum(instance.out_weight(i) for i in S)
        key = (cost, len(S), tuple(sorted(S)))
        if best is None or key < best:
            best = key
    if best is None:
        return None
    cost, _, S = best
    sp = instance.space
    survivors = [i for i in sp.points() if i not in S]
    re = realize(sp, survivors, instance.d)
    return Solution(frozenset(S), {}, re, cost)


def alg1_branch(instance: WeightedInstance) -> Optional[Solution]:
    """Obstruction-set branching for outlier-only repair.

    Every branch deletes one point of the current obstruction set,
    paying one unit of k_out and the point's weight from W. Branches
    stop at embeddable leaves; supersets of a recorded leaf cannot beat
    it on cost, so the minimum over leaves is the optimum.
    """
    _require_outlier_only(instance)
    sp, d = instance.space, instance.d
    hits: list[frozenset[int]] = []
    seen: set[frozenset[int]] = set()

    def rec(deleted: frozenset[int], k: int, W: int) -> None:
        if k < 0 or W < 0 or deleted in seen:
            return
        seen.add(deleted)
        keep = [i for i in sp.points() if i not in deleted]
        if is_embeddable(sp, keep, d):
            hits.append(deleted)
            return
        if k == 0:
            return
        A = obstruction_set(sp, d, subset=keep)
        for x in sorted(A):
            rec(deleted | {x}, k - 1, W - instance.out_weight(x))

    rec(frozenset(), instance.k_out, instance.W)
    return _best_deletion(instance, hits)


def alg2_branch(
    instance: WeightedInstance,
    Z: Iterable[int] = (),
    measure_trace: Optional[list] = None,
) -> Optional[Solution]:
    """Anchor-set branching for outlier-only repair.

    Z is an independent set the solution must avoid; the initial call
    uses Z empty. The recursion forces deletions of points that break
    Z's embedding dimension, two-way branches on independence
    extensions (delete the point or anchor it), and two-way branches on
    a pair whose union with Z drops below the required dimension. The
    measure k + d + 1 - |Z| strictly decreases on every edge, which
    measure_trace records as (parent, child) pairs when provided.
    """
    _require_outlier_only(instance)
    sp, d = instance.space, instance.d
    Z0 = frozenset(int(z) for z in Z)
    if not all(0 <= z < sp.n for z in Z0):
        raise ValueError("Z contains unknown point indices")
    if Z0 and not is_independent(sp, Z0):
        raise ValueError("Z is not independent")

    hits: list[frozenset[int]] = []
    seen: set[tuple[frozenset[int], frozenset[int]]] = set()

    def rec(deleted: frozenset[int], anchors: frozenset[int], k: int, W: int,
            parent_measure: Optional[int]) -> None:
        measure = k + d + 1 - len(anchors)
        if parent_measure is not None:
            assert measure < parent_measure
            if measure_trace is not None:
                measure_trace.append((parent_measure, measure))
        if k < 0 or W < 0 or len(anchors) > d + 1:
            return
        state = (deleted, anchors)
        if state in seen:
            return
        seen.add(state)
        keep = [i for i in sp.points() if i not in deleted]
        if is_embeddable(sp, keep, d):
            hits.append(deleted)
            return
        live = [z for z in keep if z not in anchors]
        # line 3: z cannot join the anchors at their own dimension, so
        # every solution avoiding the anchors must delete it
        for z in live:
            if not is_embeddable(sp, anchors | {z}, len(anchors)):
                rec(deleted | {z}, anchors, k - 1,
                    W - instance.out_weight(z), measure)
                return
        # line 4: z extends the anchors independently; either it is an
        # outlier or it can be anchored
        for z in live:
            if is_independent(sp, anchors | {z}):
                rec(deleted | {z}, anchors, k - 1,
                    W - instance.out_weight(z), measure)
                rec(deleted, anchors | {z}, k, W, measure)
                return
        # line 5: a pair dropping below the anchors' dimension; one of
        # the two must go (the degenerate z1 == z2 case cannot occur
        # once lines 3 and 4 have failed, but costs nothing to admit)
        for z1 in live:
            for z2 in live:
                if z2 < z1:
                    continue
                if not is_embeddable(sp, anchors | {z1, z2}, len(anchors) - 1):
                    rec(deleted | {z1}, anchors, k - 1,
                        W - instance.out_weight(z1), measure)
                    if z2 != z1:
                        rec(deleted | {z2}, anchors, k - 1,
                            W - instance.out_weight(z2), measure)
                    return
        raise RuntimeError("branching found no witness; inconsistent arithmetic")

    rec(frozenset(), Z0, instance.k_out, instance.W, None)
    return _best_deletion(instance, hits)


def solve_eeo(instance: WeightedInstance) -> Optional[Solution]:
    """Outlier-only solver: picks whichever branching procedure has the
    smaller worst-case tree for this instance's budgets."""
    _require_outlier_only(instance)
    d, k = instance.d, instance.k_out
    if (d + 3) ** k <= 2 ** (d + k):
        return alg1_branch(instance)
    return alg2_branch(instance)


def partition_into_bases(space, Y: Iterable[int], d: int) -> BasisPartition:
    """Greedy partition of Y into inclusion-maximal independent parts.

    Each part seeds at the lowest remaining point and grows
    lowest-index-first while independence holds, so the result is
    deterministic. Raises when (Y, rho) does not embed in R^d.
    """
    pts = sorted(set(int(y) for y in Y))
    if not all(0 <= y < space.n for y in pts):
        raise ValueError("Y contains unknown point indices")
    if pts and not is_embeddable(space, pts, d):
        raise ValueError(f"point set is not {d}-embeddable")
    parts: list[tuple[int, ...]] = []
    remaining = pts
    while remaining:
        part = extend_to_max_independent(space, remaining, [remaining[0]])
        parts.append(tuple(sorted(part)))
        remaining = [p for p in remaining if p not in part]
    classes = {
        h: tuple(i for i, p in enumerate(parts) if len(p) == h)
        for h in range(1, d + 2)
    }
    return BasisPartition(tuple(parts), classes, None)


def compat_tests(space, part, x: int, d: int, pair_with=None) -> bool:
    """Does the part (or the two parts) stay d-embeddable with x added?"""
    pts = set(int(p) for p in part)
    if pair_with is not None:
        pts |= set(int(p) for p in pair_with)
    if x in pts:
        raise ValueError("x must lie outside the tested sets")
    return is_embeddable(space, pts | {x}, d)


def compress(instance: WeightedInstance) -> CompressionOutcome:
    """Shrink the instance to an equivalent one or settle it outright.

    Pipeline: greedy hitting set A (no-answer when it exceeds (d+3)k);
    small-Y early return; forced deletions of hitting-set points whose
    compatibility classes are all small (rule 3) or that clash with too
    many parts (rule 4), re-checked to fixpoint with the trivial-answer
    rule in between; then marking of the parts any solution could still
    interact with. Budgets k_out and W shrink with each forced deletion
    so the reduced instance stays exactly equivalent under weights.
    """
    sp, d = instance.space, instance.d
    kO, kM, W = instance.k_out, instance.k_mod, instance.W
    k = kO + kM
    A = greedy_outliers(sp, d)
    if len(A) > (d + 3) * k:
        return CompressionOutcome(False)
    points = list(sp.points())
    Y = [i for i in points if i not in A]
    if len(Y) <= 2 * (kO + 2 * kM) * (d + 1) ** 2:
        trace = CompressionTrace(
            frozenset(A), (), None, {}, {}, frozenset(), tuple(points), instance
        )
        return CompressionOutcome(None, trace=trace)

    part = partition_into_bases(sp, Y, d)
    C = part.size_classes
    h_star = max(
        h for h in range(1, d + 2) if len(C.get(h, ())) >= 2 * (kO + 2 * kM) + 1
    )
    part = replace(part, h_star=h_star)
    parts = part.parts
    Chs = C[h_star]

    classes_cache: dict[int, tuple[tuple[int, ...], ...]] = {}
    bad_cache: dict[int, tuple[int, ...]] = {}

    def classes_for(x: int) -> tuple[tuple[int, ...], ...]:
        if x not in classes_cache:
            comp = [i for i in Chs if compat_tests(sp, parts[i], x, d)]
            classes: list[list[int]] = []
            for i in comp:
                for cls in classes:
                    # class membership via the representative is enough:
                    # the relation is transitive on these parts
                    if compat_tests(sp, parts[cls[0]], x, d, pair_with=parts[i]):
                        cls.append(i)
                        break
                else:
                    classes.append([i])
            classes_cache[x] = tuple(tuple(c) for c in classes)
        return classes_cache[x]

    def large_for(x: int, kO_now: int) -> Optional[tuple[int, ...]]:
        need = len(Chs) - (kO_now + 2 * kM)
        for cls in classes_for(x):
            if len(cls) >= need:
                return cls
        return None

    def bad_for(x: int, Rx: tuple[int, ...]) -> tuple[int, ...]:
        # parts of size <= h_star that clash with the large class; the
        # representative decides for the whole class
        if x not in bad_cache:
            rep = parts[Rx[0]]
            members = set(Rx)
            bad = []
            for h in range(1, h_star + 1):
                for j in C.get(h, ()):
                    if j in members:
                        continue
                    if not compat_tests(sp, rep, x, d, pair_with=parts[j]):
                        bad.append(j)
            bad_cache[x] = tuple(bad)
        return bad_cache[x]

    A_live = sorted(A)
    forced: list[tuple[int, int]] = []
    while True:
        if kO < 0 or W < 0:
            return CompressionOutcome(False)
        if not A_live:
            out = frozenset(x for x, _ in forced)
            survivors = [i for i in points if i not in out]
            re = realize(sp, survivors, d)
            cost = sum(instance.out_weight(x) for x in out)
            return CompressionOutcome(True, Solution(out, {}, re, cost))
        fired = None
        cap = len(Chs) - (kO + 2 * kM) - 1
        for x in A_live:
            if all(len(c) <= cap for c in classes_for(x)):
                fired = (x, 3)
                break
        if fired is None:
            for x in A_live:
                Rx = large_for(x, kO)
                if len(bad_for(x, Rx)) >= kO + kM + 1:
                    fired = (x, 4)
                    break
        if fired is None:
            break
        x, rule = fired
        A_live.remove(x)
        forced.append((x, rule))
        kO -= 1
        W -= instance.out_weight(x)

    marked: set[int] = set()
    for h in range(h_star + 1, d + 2):
        marked.update(C.get(h, ()))
    large_map: dict[int, tuple[int, ...]] = {}
    for x in A_live:
        Rx = large_for(x, kO)
        large_map[x] = Rx
        marked.update(Rx[: kO + 2 * kM + 1])
        marked.update(bad_for(x, Rx))

    keep = sorted(set(A_live) | {p for i in marked for p in parts[i]})
    keep_set = set(keep)
    to_new = {old: idx for idx, old in enumerate(keep)}
    red_space = restrict(sp, [i for i in points if i not in keep_set])
    w_out_new = tuple(instance.w_out[i] for i in keep)
    w_mod_new = {
        as_pair(to_new[i], to_new[j]): wv
        for (i, j), wv in instance.w_mod.items()
        if i in keep_set and j in keep_set
    }
    reduced = WeightedInstance.build(
        red_space, d, k_out=kO, k_mod=kM, W=W, w_out=w_out_new, w_mod=w_mod_new
    )
    trace = CompressionTrace(
        frozenset(A),
        tuple(forced),
        part,
        {x: classes_for(x) for x in A_live},
        large_map,
        frozenset(marked),
        tuple(keep),
        reduced,
    )
    return CompressionOutcome(None, trace=trace)


def _enumerate_guesses(instance: WeightedInstance) -> list[tuple[int, GuessTuple]]:
    """All in-budget (Z_O, Z_M) guesses ordered by cost, then size, then
    lexicographically."""
    sp = instance.space
    n = sp.n
    out: list[tuple[int, int, tuple, tuple, GuessTuple]] = []
    for s in range(min(instance.k_out, n) + 1):
        for Z_O in combinations(range(n), s):
            oc = sum(instance.out_weight(i) for i in Z_O)
            if oc > instance.W:
                continue
            survivors = [i for i in range(n) if i not in Z_O]
            pairs = [
                (survivors[a], survivors[b])
                for a in range(len(survivors))
                for b in range(a + 1, len(survivors))
            ]
            for m in range(min(instance.k_mod, len(pairs)) + 1):
                for Z_M in combinations(pairs, m):
                    cost = oc + sum(instance.mod_weight(i, j) for i, j in Z_M)
                    if cost <= instance.W:
                        g = GuessTuple(Z_O, Z_M, instance.d)
                        out.append((cost, s + m, Z_O, Z_M, g))
    out.sort()
    return [(cost, g) for cost, _, _, _, g in out]


def _attempt(
    instance: WeightedInstance, g: GuessTuple, restarts: int, seed: int
) -> Optional[tuple[Realization, dict[Pair, float]]]:
    """Feasibility of one guess, results mapped back to instance indices."""
    sp = instance.space
    survivors = [i for i in range(sp.n) if i not in g.Z_O]
    to_new = {p: idx for idx, p in enumerate(survivors)}
    sub = restrict(sp, g.Z_O)
    prob = PartialRealizationProblem.build(
        sub,
        [(to_new[i], to_new[j]) for i, j in g.Z_M],
        g.r,
        restarts=restarts,
        seed=seed,
    )
    got = feasible_with_free_pairs(prob)
    if got is None:
        return None
    re, values = got
    coords = {survivors[i]: re.coords[i] for i in range(len(survivors))}
    mods = {
        as_pair(survivors[i], survivors[j]): v for (i, j), v in values.items()
    }
    return Realization(g.r, coords), mods


def _search_weeo(
    instance: WeightedInstance, restarts: int, seed: int
) -> Optional[Solution]:
    for cost, g in _enumerate_guesses(instance):
        got = _attempt(instance, g, restarts, seed)
        if got is not None:
            re, mods = got
            return Solution(frozenset(g.Z_O), mods, re, cost)
    return None


def _lift(
    instance: WeightedInstance,
    outliers: frozenset[int],
    mods: Mapping[Pair, Scalar],
    restarts: int,
    seed: int,
) -> Solution:
    """Rebuild a full-instance witness for a solution found on the
    reduced point set.

    The compression equivalence guarantees the deleted-and-modified
    space embeds once the unmarked points rejoin, so the feasibility
    backend is re-run against all original survivors to polish the free
    values; if that narrowly fails, the reduced values are kept and a
    plain realization is attempted.
    """
    sp = instance.space
    survivors = [i for i in sp.points() if i not in outliers]
    sol = Solution(outliers, dict(mods), None, 0)
    cost = solution_cost(instance, sol)
    if mods:
        g = GuessTuple(tuple(sorted(outliers)), tuple(sorted(mods)), instance.d)
        got = _attempt(instance, g, restarts, seed)
        if got is not None:
            re, polished = got
            return Solution(outliers, polished, re, cost)
        modified = apply_modifications(sp, mods)
        re = realize(modified, survivors, instance.d)
        return Solution(outliers, dict(mods), re, cost)
    re = realize(sp, survivors, instance.d)
    return Solution(outliers, {}, re, cost)


def solve_weeo(
    instance: WeightedInstance, restarts: int = 100, seed: int = 0
) -> Optional[Solution]:
    """Full weighted solver: compress, enumerate guesses on the reduced
    instance in cost order, feasibility-check each, lift the first hit.

    Minimum cost is exact whenever the feasibility layers are (always
    for k_mod <= 1); with more freed pairs a missed numeric witness can
    only push the reported cost up, never produce a wrong yes.
    """
    out = compress(instance)
    if out.answer is False:
        return None
    if out.answer is True:
        return out.solution
    tr = out.trace
    red = _search_weeo(tr.reduced, restarts, seed)
    if red is None:
        return None
    if tr.reduced.space.n == instance.space.n and not tr.forced_outliers:
        return red
    imap = tr.index_map
    outliers = frozenset(x for x, _ in tr.forced_outliers) | {
        imap[i] for i in red.outliers
    }
    mods = {
        as_pair(imap[i], imap[j]): v for (i, j), v in red.modifications.items()
    }
    return _lift(instance, outliers, mods, restarts, seed)
