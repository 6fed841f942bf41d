"""Exhaustive reference solvers for small instances.

These exist to certify the real algorithms: every answer is obtained by
enumerating the problem definition directly, with rational arithmetic in
the embeddability checks whenever the input is rational. Budgets are
enforced up front so an oversized instance fails loudly instead of
spinning.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Mapping, Optional

from .core import DistanceSpace, Pair, Solution, WeightedInstance, restrict
from .feasibility import PartialRealizationProblem, feasible_with_free_pairs
from .geometry import Realization, is_embeddable, realize

__all__ = [
    "DEFAULT_BUDGET",
    "OracleBudget",
    "OracleBudgetError",
    "brute_force_eeo",
    "brute_force_maxcut",
    "brute_force_vertex_cover",
    "brute_force_weeo",
]

_GRAPH_CAP = 20


class OracleBudgetError(RuntimeError):
    """The requested enumeration exceeds the oracle's budget."""


@dataclass(frozen=True)
class OracleBudget:
    max_points: int = 12
    max_subsets: int = 10_000_000

    def __post_init__(self) -> None:
        if self.max_points < 1 or self.max_subsets < 1:
            raise ValueError("budget caps must be positive")


DEFAULT_BUDGET = OracleBudget()


def _check_points(n: int, budget: OracleBudget) -> None:
    if n > budget.max_points:
        raise OracleBudgetError(
            f"too large: {n} points exceeds the budget of {budget.max_points}"
        )


def brute_force_eeo(
    instance: WeightedInstance, budget: OracleBudget = DEFAULT_BUDGET
) -> Optional[Solution]:
    """Minimum-cost outlier set by direct enumeration.

    Candidates are tried by (cost, size, lexicographic) order, so ties
    resolve deterministically. Only deletion is allowed; instances with a
    modification budget belong to brute_force_weeo.
    """
    if instance.k_mod != 0:
        raise ValueError("outlier-only oracle: k_mod must be 0")
    sp = instance.space
    n = sp.n
    _check_points(n, budget)
    k = min(instance.k_out, n)
    if sum(comb(n, s) for s in range(k + 1)) > budget.max_subsets:
        raise OracleBudgetError("too large: subset count exceeds the budget")
    cands = []
    for size in range(k + 1):
        for S in combinations(range(n), size):
            cost = sum(instance.out_weight(i) for i in S)
            if cost <= instance.W:
                cands.append((cost, size, S))
    cands.sort()
    for cost, _, S in cands:
        keep = [i for i in range(n) if i not in S]
        if is_embeddable(sp, keep, instance.d):
            re = realize(sp, keep, instance.d)
            return Solution(frozenset(S), {}, re, cost)
    return None


def _try_combo(
    instance: WeightedInstance,
    Z_O: tuple[int, ...],
    Z_M: tuple[Pair, ...],
    restarts: int,
    seed: int,
) -> Optional[tuple[Realization, dict[Pair, float]]]:
    sp = instance.space
    survivors = [i for i in range(sp.n) if i not in Z_O]
    sub = restrict(sp, Z_O)
    to_new = {p: idx for idx, p in enumerate(survivors)}
    free_new = [(to_new[i], to_new[j]) for i, j in Z_M]
    prob = PartialRealizationProblem.build(
        sub, free_new, instance.d, restarts=restarts, seed=seed
    )
    got = feasible_with_free_pairs(prob)
    if got is None:
        return None
    re, values = got
    coords = {survivors[i]: re.coords[i] for i in range(len(survivors))}
    mods: dict[Pair, float] = {}
    for (i2, j2), v in values.items():
        oi, oj = survivors[i2], survivors[j2]
        mods[(min(oi, oj), max(oi, oj))] = v
    return Realization(instance.d, coords), mods


def brute_force_weeo(
    instance: WeightedInstance,
    budget: OracleBudget = DEFAULT_BUDGET,
    restarts: int = 100,
    seed: int = 0,
) -> Optional[Solution]:
    """Minimum-cost (outliers, modified pairs) combination.

    Each candidate pair set is handed to the free-pair solver with an
    elevated restart count. The exact layers there make the verdict exact
    whenever at most one pair is modified; larger modification sets
    inherit the solver's one-sided numeric completeness.
    """
    sp = instance.space
    n = sp.n
    _check_points(n, budget)
    k_out = min(instance.k_out, n)
    total = 0
    for s in range(k_out + 1):
        npairs = comb(n - s, 2)
        total += comb(n, s) * sum(
            comb(npairs, m) for m in range(min(instance.k_mod, npairs) + 1)
        )
    if total > budget.max_subsets:
        raise OracleBudgetError("too large: combination count exceeds the budget")

    combos = []
    for s in range(k_out + 1):
        for Z_O in combinations(range(n), s):
            out_cost = sum(instance.out_weight(i) for i in Z_O)
            if out_cost > instance.W:
                continue
            survivors = [i for i in range(n) if i not in Z_O]
            pairs = [
                (survivors[a], survivors[b])
                for a in range(len(survivors))
                for b in range(a + 1, len(survivors))
            ]
            for m in range(min(instance.k_mod, len(pairs)) + 1):
                for Z_M in combinations(pairs, m):
                    cost = out_cost + sum(
                        instance.mod_weight(i, j) for i, j in Z_M
                    )
                    if cost <= instance.W:
                        combos.append((cost, s + m, Z_O, Z_M))
    combos.sort()
    for cost, _, Z_O, Z_M in combos:
        got = _try_combo(instance, Z_O, Z_M, restarts, seed)
        if got is not None:
            re, mods = got
            return Solution(frozenset(Z_O), mods, re, cost)
    return None


def _adjacency(graph) -> dict[int, frozenset[int]]:
    raw: Mapping = graph.adjacency() if hasattr(graph, "adjacency") else graph
    return {int(u): frozenset(int(v) for v in nbrs) for u, nbrs in raw.items()}


def brute_force_vertex_cover(graph) -> frozenset[int]:
    """Exact minimum vertex cover by subset enumeration (lex-least winner)."""
    adj = _adjacency(graph)
    verts = sorted(adj)
    if len(verts) > _GRAPH_CAP:
        raise OracleBudgetError(f"too large: more than {_GRAPH_CAP} vertices")
    edges = [(u, v) for u in verts for v in adj[u] if u < v]
    for size in range(len(verts) + 1):
        for S in combinations(verts, size):
            s = set(S)
            if all(u in s or v in s for u, v in edges):
                return frozenset(S)
    return frozenset(verts)


def brute_force_maxcut(graph) -> int:
    """Exact maximum cut value over all bipartitions."""
    adj = _adjacency(graph)
    verts = sorted(adj)
    if len(verts) > _GRAPH_CAP:
        raise OracleBudgetError(f"too large: more than {_GRAPH_CAP} vertices")
    if not verts:
        return 0
    edges = [(u, v) for u in verts for v in adj[u] if u < v]
    index = {v: i for i, v in enumerate(verts)}
    n = len(verts)
    best = 0
    for mask in range(1 << (n - 1)):
        side = [(mask >> i) & 1 for i in range(n - 1)] + [0]
        cut = sum(1 for u, v in edges if side[index[u]] != side[index[v]])
        best = max(best, cut)
    return best
