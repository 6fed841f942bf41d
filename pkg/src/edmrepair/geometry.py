"""Embeddability predicates, Cayley-Menger determinants, and realizations.

The workhorse is an incremental anchoring analysis. A basis of affinely
independent points is grown greedily; every other point is then expressed in
barycentric coordinates over the basis by solving a linear system on the
basis Gram matrix, which is rational whenever the squared distances are. For
a basis Z and a candidate point x, the squared height h2 of x over the affine
hull of Z satisfies

    CM(Z + [x]) = -2 * h2 * CM(Z),

so the sign tests on h2 below are exactly the classical Cayley-Menger sign
conditions (condition 1 of the determinant characterization), just computed
in O(r^2) per point. A subset is strongly r-embeddable iff the basis stops at
size r+1 with no sign violation and every non-basis pair reproduces its
stated squared distance (condition 2).

Three arithmetic modes:

  "float"  float64 with relative tolerances from ToleranceConfig
  "exact"  Fraction arithmetic, exact signs; requires rational entries
  "auto"   float fast path that trusts only classifications with a clear
           margin and redoes the whole analysis exactly otherwise; resolves
           to plain "float" for spaces with non-rational entries

The default (exact=None) is "auto": drift-free on rational inputs, plain
float semantics everywhere else.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .core import (
    DistanceSpace,
    Pair,
    Scalar,
    Solution,
    WeightedInstance,
    apply_modifications,
    as_pair,
    solution_cost,
)

# margin below which the auto mode refuses to trust a float sign test,
# relative to max(1, max squared distance); float rounding noise sits many
# orders of magnitude below this
_AUTO_BAND = 1e-6


@dataclass(frozen=True)
class ToleranceConfig:
    """Relative tolerances for the float backend.

    eps_sign governs zero tests on squared heights (the CM sign conditions),
    eps_dist governs distance round-trip checks. With normalize=True both are
    scaled by max(1, max squared distance of the subset under test).
    """

    eps_sign: float = 1e-8
    eps_dist: float = 1e-6
    normalize: bool = True


DEFAULT_TOL = ToleranceConfig()


@dataclass(frozen=True)
class Realization:
    """Coordinates in R^dim for a subset of points, keyed by point index."""

    dim: int
    coords: Mapping[int, tuple[float, ...]]

    def point(self, i: int) -> np.ndarray:
        return np.asarray(self.coords[i])

    def pair_sq(self, i: int, j: int) -> float:
        diff = self.point(i) - self.point(j)
        return float(diff @ diff)


class _Uncertain(Exception):
    """Internal: a float sign test landed inside the auto-mode margin."""


@dataclass(frozen=True)
class _Frame:
    """Result of the anchoring analysis on one subset (sorted point tuple)."""

    feasible: bool
    rank: int
    basis: tuple[int, ...]
    # barycentric coordinates and right-hand sides for non-basis points,
    # keyed by point index; entries are Fractions in exact mode
    mu: Mapping[int, tuple]
    cvec: Mapping[int, tuple]
    gram: tuple[tuple, ...]
    exact: bool


def _resolve_mode(space: DistanceSpace, exact: Optional[bool]) -> str:
    if exact is True:
        if not space.is_rational:
            raise ValueError(
                "exact backend requires all squared distances to be int or Fraction"
            )
        return "exact"
    if exact is False:
        return "float"
    return "auto" if space.is_rational else "float"


def _scale_for(space: DistanceSpace, pts: Sequence[int], normalize: bool) -> float:
    if not normalize or not pts:
        return 1.0
    m = max(float(space.sqdist[i][j]) for i in pts for j in pts)
    return max(1.0, m)


def _solve_exact(G: list[list[Fraction]], c: list[Fraction]) -> list[Fraction]:
    """Solve G x = c over Fractions (G symmetric positive definite)."""
    t = len(c)
    M = [list(G[i]) + [c[i]] for i in range(t)]
    for col in range(t):
        piv = next(r for r in range(col, t) if M[r][col] != 0)
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
        inv = M[col][col]
        for r in range(col + 1, t):
            f = M[r][col] / inv
            if f:
                for c2 in range(col, t + 1):
                    M[r][c2] -= f * M[col][c2]
    x = [Fraction(0)] * t
    for r in range(t - 1, -1, -1):
        acc = M[r][t] - sum(M[r][c2] * x[c2] for c2 in range(r + 1, t))
        x[r] = acc / M[r][r]
    return x


def _analyze_exact(space: DistanceSpace, pts: tuple[int, ...]) -> _Frame:
    sq = space.sqdist

    def dist(a: int, b: int) -> Fraction:
        return Fraction(sq[a][b])

    base = pts[0]
    basis = [base]
    in_basis = {base}
    G: list[list[Fraction]] = []

    def place(x: int):
        t = len(basis) - 1
        c = [
            (dist(base, basis[i]) + dist(base, x) - dist(basis[i], x)) / 2
            for i in range(1, t + 1)
        ]
        mu = _solve_exact(G, c) if t else []
        h2 = dist(base, x) - sum(m * ci for m, ci in zip(mu, c))
        return mu, c, h2

    placements: dict[int, tuple[list, list]] = {}
    while True:
        placements.clear()
        extended = False
        for x in pts:
            if x in in_basis:
                continue
            mu, c, h2 = place(x)
            if h2 < 0:
                return _Frame(False, -2, tuple(basis), {}, {}, (), True)
            if h2 > 0:
                for i, row in enumerate(G):
                    row.append(c[i])
                G.append(c + [dist(base, x)])
                basis.append(x)
                in_basis.add(x)
                extended = True
                break
            placements[x] = (mu, c)
        if not extended:
            break

    nonbasis = [x for x in pts if x not in in_basis]
    for a in range(len(nonbasis)):
        x = nonbasis[a]
        mux, cx = placements[x]
        sx = sum(m * ci for m, ci in zip(mux, cx))
        for b in range(a + 1, len(nonbasis)):
            y = nonbasis[b]
            muy, cy = placements[y]
            # |p_x - p_y|^2 via mu_x^T G mu_y = mu_x . c_y
            pred = (
                sx
                + sum(m * ci for m, ci in zip(muy, cy))
                - 2 * sum(m * ci for m, ci in zip(mux, cy))
            )
            if pred != dist(x, y):
                return _Frame(False, -2, tuple(basis), {}, {}, (), True)

    mu_map = {x: tuple(placements[x][0]) for x in nonbasis}
    c_map = {x: tuple(placements[x][1]) for x in nonbasis}
    return _Frame(
        True,
        len(basis) - 1,
        tuple(basis),
        mu_map,
        c_map,
        tuple(tuple(row) for row in G),
        True,
    )


def _analyze_float(
    space: DistanceSpace, pts: tuple[int, ...], tol: ToleranceConfig, strict: bool
) -> _Frame:
    """Float analysis. With strict=True (auto mode) any sign test without a
    clear margin raises _Uncertain instead of being tolerated."""
    sub = space.as_array[np.ix_(pts, pts)]
    m = len(pts)
    scale = max(1.0, sub.max()) if (tol.normalize or strict) else 1.0
    zero_band = _AUTO_BAND * scale if strict else tol.eps_sign * scale
    pair_band = _AUTO_BAND * scale if strict else tol.eps_dist * scale

    basis = [0]
    in_basis = {0}
    G = np.zeros((0, 0))
    mu_rows: dict[int, np.ndarray] = {}
    c_rows: dict[int, np.ndarray] = {}

    while True:
        rest = [i for i in range(m) if i not in in_basis]
        if not rest:
            break
        bloc = basis[1:]
        c = 0.5 * (
            sub[0, bloc][None, :] + sub[0, rest][:, None] - sub[np.ix_(rest, bloc)]
        )
        if bloc:
            mu = np.linalg.solve(G, c.T).T
            if strict:
                resid = np.abs(G @ mu.T - c.T).max() if mu.size else 0.0
                if resid > 1e-8 * scale * (1.0 + np.abs(mu).max()):
                    raise _Uncertain
            h2 = sub[0, rest] - np.einsum("ij,ij->i", mu, c)
        else:
            mu = np.zeros((len(rest), 0))
            h2 = sub[0, rest].copy()

        if np.any(h2 < -zero_band):
            # some candidate cannot be placed over the current basis, so the
            # subset is not realizable in any dimension
            return _Frame(False, -2, tuple(pts[i] for i in basis), {}, {}, (), False)
        pos = np.nonzero(h2 > zero_band)[0]
        if pos.size:
            k = int(pos[0])
            x = rest[k]
            t = G.shape[0]
            G2 = np.zeros((t + 1, t + 1))
            G2[:t, :t] = G
            G2[t, :t] = c[k]
            G2[:t, t] = c[k]
            G2[t, t] = sub[0, x]
            G = G2
            basis.append(x)
            in_basis.add(x)
            continue
        if strict:
            # remaining candidates all sit inside the uncertainty band
            raise _Uncertain
        for k, x in enumerate(rest):
            mu_rows[x] = mu[k]
            c_rows[x] = c[k]
        break

    nonbasis = [i for i in range(m) if i not in in_basis]
    if nonbasis:
        MU = np.vstack([mu_rows[x] for x in nonbasis])
        C = np.vstack([c_rows[x] for x in nonbasis])
        s = np.einsum("ij,ij->i", MU, C)
        cross = MU @ C.T
        pred = s[:, None] + s[None, :] - cross - cross.T
        diff = np.abs(pred - sub[np.ix_(nonbasis, nonbasis)])
        np.fill_diagonal(diff, 0.0)
        if diff.size and diff.max() > pair_band:
            return _Frame(False, -2, tuple(pts[i] for i in basis), {}, {}, (), False)

    mu_map = {pts[x]: tuple(mu_rows[x]) for x in nonbasis}
    c_map = {pts[x]: tuple(c_rows[x]) for x in nonbasis}
    return _Frame(
        True,
        len(basis) - 1,
        tuple(pts[i] for i in basis),
        mu_map,
        c_map,
        tuple(tuple(row) for row in G),
        False,
    )


def _frame(
    space: DistanceSpace,
    pts: tuple[int, ...],
    mode: str,
    tol: ToleranceConfig,
) -> _Frame:
    if mode == "float":
        key = ("frame", pts, "float", tol.eps_sign, tol.eps_dist, tol.normalize)
    else:
        key = ("frame", pts, mode)
    cache = space._caches
    hit = cache.get(key)
    if hit is not None:
        return hit
    if mode == "exact":
        res = _analyze_exact(space, pts)
    elif mode == "float":
        res = _analyze_float(space, pts, tol, strict=False)
    else:
        try:
            res = _analyze_float(space, pts, tol, strict=True)
        except _Uncertain:
            res = _analyze_exact(space, pts)
    cache[key] = res
    return res


def strong_dim(
    space: DistanceSpace,
    subset: Iterable[int],
    exact: Optional[bool] = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> Optional[int]:
    """Strong embedding dimension of the subset, or None when the subset is
    not embeddable in any Euclidean space. The empty set has dimension -1."""
    pts = tuple(sorted(set(subset)))
    for i in pts:
        if not (0 <= i < space.n):
            raise ValueError(f"unknown point index {i}")
    if not pts:
        return -1
    res = _frame(space, pts, _resolve_mode(space, exact), tol)
    return res.rank if res.feasible else None


def is_embeddable(
    space: DistanceSpace,
    subset: Iterable[int],
    r: int,
    exact: Optional[bool] = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> bool:
    """Can the subset be realized in R^r? Only the empty set is (-1)-embeddable."""
    pts = set(subset)
    if not pts:
        return r >= -1
    if r < 0:
        return False
    sd = strong_dim(space, pts, exact=exact, tol=tol)
    return sd is not None and sd <= r


def is_strongly_embeddable(
    space: DistanceSpace,
    subset: Iterable[int],
    r: int,
    exact: Optional[bool] = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> bool:
    """r-embeddable but not (r-1)-embeddable."""
    sd = strong_dim(space, subset, exact=exact, tol=tol)
    return sd == r


def is_independent(
    space: DistanceSpace,
    subset: Iterable[int],
    exact: Optional[bool] = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> bool:
    """Is the subset a set of r+1 points that is strongly r-embeddable?"""
    pts = set(subset)
    if not pts:
        raise ValueError("independence is undefined for the empty set")
    return strong_dim(space, pts, exact=exact, tol=tol) == len(pts) - 1


def extend_to_max_independent(
    space: DistanceSpace,
    ground: Iterable[int],
    seed: Iterable[int] = (),
    exact: Optional[bool] = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> frozenset[int]:
    """Grow an independent seed to a maximal independent subset of ground,
    always adding the smallest extending index first."""
    ground_set = set(ground)
    cur = sorted(set(seed))
    if not set(cur) <= ground_set:
        raise ValueError("seed must be a subset of ground")
    if cur and strong_dim(space, cur, exact=exact, tol=tol) != len(cur) - 1:
        raise ValueError("seed is not independent")
    if not cur:
        rest = sorted(ground_set)
        if not rest:
            return frozenset()
        cur = [rest[0]]
    while True:
        for y in sorted(ground_set):
            if y in cur:
                continue
            if strong_dim(space, cur + [y], exact=exact, tol=tol) == len(cur):
                cur.append(y)
                break
        else:
            break
    return frozenset(cur)


def cm_det(
    space: DistanceSpace,
    points: Sequence[int],
    exact: Optional[bool] = None,
) -> Scalar:
    """Cayley-Menger determinant of an ordered point tuple.

    The matrix is (r+2)x(r+2) for r+1 points: first row and column are
    (0, 1, ..., 1), the body is the squared-distance block (zero diagonal).
    """
    return cm_det_with_overrides(space, points, {}, exact=exact)


def cm_det_with_overrides(
    space: DistanceSpace,
    points: Sequence[int],
    overrides: Mapping[Pair, Scalar],
    exact: Optional[bool] = None,
) -> Scalar:
    """cm_det with selected pair entries replaced by given squared values."""
    pts = tuple(points)
    if len(set(pts)) != len(pts):
        raise ValueError("points must be distinct")
    if not pts:
        raise ValueError("at least one point is required")
    over: dict[Pair, Scalar] = {}
    for (i, j), value in overrides.items():
        p = as_pair(i, j)
        if p[0] not in pts or p[1] not in pts:
            raise ValueError(f"override pair {p} is not among the given points")
        if value < 0:
            raise ValueError(f"negative override {value!r} for pair {p}")
        over[p] = value

    def entry(a: int, b: int) -> Scalar:
        if a == b:
            return 0
        return over.get(as_pair(a, b), space.sqdist[a][b])

    k = len(pts)
    rational_over = space.is_rational and all(
        isinstance(v, (int, Fraction)) and not isinstance(v, bool)
        for v in over.values()
    )
    if exact is True:
        if not rational_over:
            raise ValueError("exact cm_det requires rational entries and overrides")
        use_exact = True
    elif exact is False:
        use_exact = False
    else:
        use_exact = rational_over

    if use_exact:
        M = [[Fraction(0)] * (k + 1) for _ in range(k + 1)]
        for a in range(k):
            M[0][a + 1] = Fraction(1)
            M[a + 1][0] = Fraction(1)
            for b in range(k):
                M[a + 1][b + 1] = Fraction(entry(pts[a], pts[b]))
        return _det_exact(M)
    M = np.zeros((k + 1, k + 1))
    M[0, 1:] = 1.0
    M[1:, 0] = 1.0
    for a in range(k):
        for b in range(k):
            M[a + 1, b + 1] = float(entry(pts[a], pts[b]))
    return float(np.linalg.det(M))


def _det_exact(M: list[list[Fraction]]) -> Fraction:
    n = len(M)
    M = [row[:] for row in M]
    det = Fraction(1)
    for col in range(n):
        piv = None
        for r in range(col, n):
            if M[r][col] != 0:
                piv = r
                break
        if piv is None:
            return Fraction(0)
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det *= M[col][col]
        for r in range(col + 1, n):
            f = M[r][col] / M[col][col]
            if f:
                for c2 in range(col, n):
                    M[r][c2] -= f * M[col][c2]
    return det


def realize(
    space: DistanceSpace,
    subset: Iterable[int],
    d: int,
    exact: Optional[bool] = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> Optional[Realization]:
    """A canonical realization of the subset in R^d, or None.

    The first basis point sits at the origin and each later basis point opens
    one new coordinate with a positive leading entry (Cholesky of the basis
    Gram matrix); non-basis points lie in the basis affine hull. All pairwise
    distances are verified before returning.
    """
    if d < 1:
        raise ValueError(f"dimension must be at least 1, got {d}")
    pts = tuple(sorted(set(subset)))
    if not pts:
        return Realization(d, {})
    mode = _resolve_mode(space, exact)
    res = _frame(space, pts, mode, tol)
    if not res.feasible or res.rank > d:
        return None

    t = res.rank
    G = np.array([[float(v) for v in row] for row in res.gram]).reshape(t, t)
    if t:
        try:
            L = np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            # fall back to an eigen square root with clamped spectrum
            w, V = np.linalg.eigh(G)
            L = V @ np.diag(np.sqrt(np.clip(w, 0.0, None)))
    else:
        L = np.zeros((0, 0))

    coords: dict[int, tuple[float, ...]] = {}
    base = res.basis[0]
    coords[base] = tuple(0.0 for _ in range(d))
    for i, b in enumerate(res.basis[1:]):
        vec = np.zeros(d)
        vec[:t] = L[i]
        coords[b] = tuple(vec)
    for x in pts:
        if x in coords:
            continue
        mu = np.array([float(v) for v in res.mu[x]])
        vec = np.zeros(d)
        if t:
            vec[:t] = mu @ L
        coords[x] = tuple(vec)

    scale = _scale_for(space, pts, tol.normalize)
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            i, j = pts[a], pts[b]
            got = sum((u - v) ** 2 for u, v in zip(coords[i], coords[j]))
            if abs(got - float(space.sqdist[i][j])) > tol.eps_dist * scale:
                return None
    return Realization(d, coords)


def verify_solution(
    instance: WeightedInstance,
    solution: Solution,
    exact: Optional[bool] = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> bool:
    """Check a solution against its instance: budgets, weights, disjointness,
    embeddability of the repaired space, and the realization witness if one
    is attached."""
    space = instance.space
    O = solution.outliers
    if not all(0 <= i < space.n for i in O):
        return False
    if len(O) > instance.k_out:
        return False
    mods: dict[Pair, Scalar] = {}
    for (i, j), value in solution.modifications.items():
        try:
            p = as_pair(i, j)
        except ValueError:
            return False
        if not (0 <= p[0] and p[1] < space.n):
            return False
        if p[0] in O or p[1] in O:
            return False
        if value < 0:
            return False
        mods[p] = value
    if len(mods) > instance.k_mod:
        return False
    cost = solution_cost(instance, solution)
    if cost != solution.cost or cost > instance.W:
        return False
    modified = apply_modifications(space, mods)
    survivors = [i for i in space.points() if i not in O]
    if not is_embeddable(modified, survivors, instance.d, exact=exact, tol=tol):
        return False
    re = solution.realization
    if re is not None:
        if re.dim != instance.d:
            return False
        if not all(i in re.coords for i in survivors):
            return False
        scale = _scale_for(modified, survivors, tol.normalize)
        for a in range(len(survivors)):
            for b in range(a + 1, len(survivors)):
                i, j = survivors[a], survivors[b]
                if abs(re.pair_sq(i, j) - float(modified.sqdist[i][j])) > tol.eps_dist * scale:
                    return False
    return True
