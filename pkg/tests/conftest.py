"""Shared helpers: independent brute-force oracles and instance samplers.

The oracles here are deliberately naive and structured differently from the
library code they check (Laplace cofactor expansion instead of elimination,
least-squares trilateration with explicit reflection enumeration instead of
Gram-frame analysis).
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest

from edmrepair.core import DistanceSpace


def cofactor_det(M):
    """Determinant by Laplace expansion along the first row."""
    n = len(M)
    if n == 1:
        return M[0][0]
    total = 0
    for j in range(n):
        if M[0][j] == 0:
            continue
        minor = [row[:j] + row[j + 1 :] for row in M[1:]]
        total += (-1) ** j * M[0][j] * cofactor_det(minor)
    return total


def cm_matrix(space, points, value=Fraction):
    """Bordered squared-distance matrix for an ordered point tuple."""
    k = len(points)
    M = [[value(0)] * (k + 1) for _ in range(k + 1)]
    for a in range(k):
        M[0][a + 1] = value(1)
        M[a + 1][0] = value(1)
        for b in range(k):
            M[a + 1][b + 1] = value(space.sqdist[points[a]][points[b]])
    return M


def brute_embeddable(space, subset, r, tol=1e-7):
    """Trilateration with explicit reflection enumeration.

    Places points one at a time in R^r: least-squares position against the
    already placed points, then both signs of the residual height along the
    first null direction. Succeeds if any branch reproduces all pairwise
    distances.
    """
    pts = sorted(set(subset))
    if not pts:
        return r >= -1
    if r < 0:
        return False
    sq = [[float(space.sqdist[i][j]) for j in pts] for i in pts]
    m = len(pts)
    scale = max(1.0, max(max(row) for row in sq))

    def ok(coords):
        for a in range(m):
            for b in range(a + 1, m):
                got = float(np.sum((coords[a] - coords[b]) ** 2))
                if abs(got - sq[a][b]) > tol * scale:
                    return False
        return True

    def rec(k, coords):
        if k == m:
            return ok(coords)
        if k == 0:
            return rec(1, coords + [np.zeros(r)])
        A = np.array([2.0 * (coords[i] - coords[0]) for i in range(k)])
        b = np.array(
            [
                sq[0][k]
                - sq[i][k]
                + float(coords[i] @ coords[i])
                - float(coords[0] @ coords[0])
                - 2.0 * float(coords[0] @ (coords[i] - coords[0]))
                for i in range(k)
            ]
        )
        # rows of A include the zero row for i=0; lstsq copes
        x0, *_ = np.linalg.lstsq(A, b, rcond=None)
        h2 = sq[0][k] - float((x0 - coords[0]) @ (x0 - coords[0]))
        if h2 < -tol * scale:
            return False
        # heights inside the tolerance band are noise; letting them through
        # perturbs later rank decisions and kills valid reflection branches
        h = 0.0 if h2 <= tol * scale else np.sqrt(h2)
        _, s, vt = np.linalg.svd(A)
        rank = int(np.sum(s > 1e-6 * max(1.0, s[0] if s.size else 1.0)))
        if rank >= r or h <= 0:
            return rec(k + 1, coords + [x0])
        null = vt[rank]
        return rec(k + 1, coords + [x0 + h * null]) or rec(
            k + 1, coords + [x0 - h * null]
        )

    return rec(0, [])


def minimal_outlier_sets(space, d, max_size=None):
    """All inclusion-minimal outlier sets via subset enumeration."""
    n = space.n
    from edmrepair.geometry import is_embeddable

    feasible = set()
    for size in range(n + 1):
        if max_size is not None and size > max_size:
            break
        for S in itertools.combinations(range(n), size):
            rest = [i for i in range(n) if i not in S]
            if is_embeddable(space, rest, d):
                feasible.add(frozenset(S))
    minimal = []
    for S in feasible:
        if not any(T < S for T in feasible):
            minimal.append(S)
    return minimal


def planted_space(rng, n, d, box=10):
    """Integer-coordinate points in a box; exactly d-embeddable."""
    pts = rng.integers(-box, box + 1, size=(n, d))
    M = [
        [int(((pts[i] - pts[j]) ** 2).sum()) for j in range(n)]
        for i in range(n)
    ]
    return DistanceSpace.from_matrix(M), pts


def garbage_space(rng, n, hi=20):
    """Random symmetric nonnegative integer matrix, usually non-embeddable."""
    M = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            M[i][j] = M[j][i] = int(rng.integers(0, hi))
    return DistanceSpace.from_matrix(M)


def spiked_space(rng, n, d, k_bad, box=10, hi=None):
    """Planted space with k_bad rows replaced by random garbage."""
    space, pts = planted_space(rng, n, d, box)
    if hi is None:
        hi = (2 * box) ** 2 * d
    M = [list(row) for row in space.sqdist]
    bad = sorted(rng.choice(n, size=k_bad, replace=False))
    for b in bad:
        for j in range(n):
            if j != b:
                v = int(rng.integers(1, hi))
                M[b][j] = v
                M[j][b] = v
    return DistanceSpace.from_matrix(M), set(int(b) for b in bad)


def seeded_graphs(count=50, seed=424242):
    """Seeded sample of simple graphs on 2..7 vertices.

    Density thins out as the vertex count grows so oracle enumeration on
    the derived repair instances stays affordable.
    """
    from edmrepair.generators import Graph

    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(2, 8))
        cap = 0.85 if n <= 5 else 0.45
        p = float(rng.uniform(0.1, cap))
        edges = [
            pr for pr in itertools.combinations(range(n), 2) if rng.random() < p
        ]
        out.append(Graph.build(n, edges))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
