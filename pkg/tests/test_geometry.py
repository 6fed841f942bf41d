import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edmrepair.core import (
    DistanceSpace,
    Solution,
    WeightedInstance,
    apply_modifications,
    restrict,
)
from edmrepair.geometry import (
    Realization,
    ToleranceConfig,
    cm_det,
    cm_det_with_overrides,
    extend_to_max_independent,
    is_embeddable,
    is_independent,
    is_strongly_embeddable,
    realize,
    strong_dim,
    verify_solution,
)

from conftest import brute_embeddable, cm_matrix, cofactor_det, garbage_space, planted_space

PAPER_D = [
    [0, 7, 1, 2, 4, 5, 1, 4, 5],
    [7, 0, 2, 1, 1, 2, 10, 5, 4],
    [1, 2, 0, 1, 11, 4, 4, 1, 2],
    [2, 1, 1, 0, 2, 1, 8, 2, 1],
    [4, 1, 11, 2, 0, 1, 12, 8, 5],
    [5, 2, 4, 1, 1, 0, 7, 5, 2],
    [1, 10, 4, 8, 12, 7, 0, 8, 9],
    [4, 5, 1, 2, 8, 5, 8, 0, 1],
    [5, 4, 2, 1, 5, 2, 9, 1, 0],
]


def repaired_example_space():
    sp = DistanceSpace.from_matrix(PAPER_D)
    mod = apply_modifications(sp, {(0, 1): 1, (2, 4): 5})
    return restrict(mod, {6})


# ---------------------------------------------------------------- cm_det


def test_cm_det_single_point():
    sp = DistanceSpace.from_matrix([[0, 7], [7, 0]])
    assert cm_det(sp, [0]) == -1


@given(st.fractions(min_value=0, max_value=100))
@settings(max_examples=100, deadline=None)
def test_cm_det_pair_identity(q):
    sp = DistanceSpace.from_matrix([[0, q], [q, 0]])
    assert cm_det(sp, [0, 1], exact=True) == 2 * q


def test_cm_det_equilateral():
    sp = DistanceSpace.from_matrix([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    assert cm_det(sp, [0, 1, 2]) == -3


def test_cm_det_matches_cofactor_oracle(rng):
    for _ in range(40):
        n = int(rng.integers(2, 6))
        sp = garbage_space(rng, n)
        pts = tuple(int(i) for i in rng.permutation(n)[: int(rng.integers(1, n + 1))])
        got = cm_det(sp, pts, exact=True)
        want = cofactor_det(cm_matrix(sp, pts))
        assert got == want


def test_cm_det_order_invariant_for_sets(rng):
    # the determinant value is invariant under point reorderings
    sp = garbage_space(rng, 5)
    base = cm_det(sp, (0, 1, 2, 3), exact=True)
    for perm in itertools.permutations((0, 1, 2, 3)):
        assert cm_det(sp, perm, exact=True) == base


def test_cm_det_rejects_duplicates():
    sp = DistanceSpace.from_matrix([[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        cm_det(sp, [0, 0])


def test_cm_det_with_overrides():
    sp = DistanceSpace.from_matrix([[0, 7], [7, 0]])
    assert cm_det_with_overrides(sp, [0, 1], {(0, 1): 3}) == 6
    with pytest.raises(ValueError):
        cm_det_with_overrides(sp, [0, 1], {(0, 1): -1})
    with pytest.raises(ValueError):
        cm_det_with_overrides(sp, [0], {(0, 1): 2})


def test_cm_sign_law_on_realized_points(rng):
    # (-1)^(j+1) CM(x_0..x_j) >= 0 for any realized point set
    for _ in range(60):
        d = int(rng.integers(1, 5))
        n = int(rng.integers(2, d + 3))
        pts = rng.uniform(-10, 10, size=(n, d))
        M = [
            [float(((pts[i] - pts[j]) ** 2).sum()) for j in range(n)]
            for i in range(n)
        ]
        sp = DistanceSpace.from_matrix(M)
        det = cm_det(sp, range(n))
        j = n - 1
        scale = max(1.0, sp.max_sq) ** max(j, 1)
        assert (-1) ** (j + 1) * det > -1e-8 * scale


# ------------------------------------------------- embeddability predicates


def test_empty_and_singleton_conventions():
    sp = DistanceSpace.from_matrix([[0, 1], [1, 0]])
    assert is_embeddable(sp, [], 3)
    assert is_embeddable(sp, [], 0)
    assert is_embeddable(sp, [], -1)
    assert is_embeddable(sp, [0], 0)
    assert not is_embeddable(sp, [0], -1)
    assert strong_dim(sp, []) == -1
    assert strong_dim(sp, [0]) == 0


def test_two_coincident_points_strongly_zero():
    sp = DistanceSpace.from_matrix([[0, 0], [0, 0]])
    assert is_strongly_embeddable(sp, [0, 1], 0)
    assert not is_independent(sp, [0, 1])


def test_unit_square_dimensions():
    sp = DistanceSpace.from_matrix(
        [[0, 1, 2, 1], [1, 0, 1, 2], [2, 1, 0, 1], [1, 2, 1, 0]]
    )
    assert not is_embeddable(sp, range(4), 1)
    assert is_strongly_embeddable(sp, range(4), 2)
    assert realize(sp, range(4), 1) is None
    # frozen via the reflection-enumeration oracle
    assert not brute_embeddable(sp, range(4), 1)


def test_triangle_violation_not_embeddable_anywhere():
    sp = DistanceSpace.from_matrix([[0, 1, 10], [1, 0, 2], [10, 2, 0]])
    assert strong_dim(sp, range(3)) is None
    for r in range(1, 5):
        assert not is_embeddable(sp, range(3), r)
        assert not brute_embeddable(sp, range(3), r)


def test_strong_dim_matches_affine_rank_of_planted(rng):
    for _ in range(40):
        d = int(rng.integers(1, 4))
        n = int(rng.integers(2, 9))
        sp, pts = planted_space(rng, n, d)
        want = int(np.linalg.matrix_rank(pts - pts[0], tol=1e-9))
        assert strong_dim(sp, range(n)) == want
        assert strong_dim(sp, range(n), exact=True) == want


def test_backends_agree_on_garbage(rng):
    for _ in range(60):
        n = int(rng.integers(2, 8))
        sp = garbage_space(rng, n)
        se = strong_dim(sp, range(n), exact=True)
        assert strong_dim(sp, range(n)) == se
        assert strong_dim(sp, range(n), exact=False) == se


def test_agreement_with_reflection_oracle_on_subsets(rng):
    # every subset of up to 6 points, realizable bases and garbage alike
    for trial in range(12):
        if trial % 2 == 0:
            sp, _ = planted_space(rng, 6, int(rng.integers(1, 4)))
        else:
            sp = garbage_space(rng, 6, hi=8)
        for size in range(1, 7):
            for sub in itertools.combinations(range(6), size):
                for r in range(1, 4):
                    assert is_embeddable(sp, sub, r) == brute_embeddable(
                        sp, sub, r
                    ), (trial, sub, r)


def test_deletion_closure(rng):
    for _ in range(30):
        sp = garbage_space(rng, 7, hi=10)
        for r in (1, 2, 3):
            if is_embeddable(sp, range(7), r):
                for x in range(7):
                    keep = [i for i in range(7) if i != x]
                    assert is_embeddable(sp, keep, r)


def test_exact_requires_rational_entries():
    sp = DistanceSpace.from_matrix([[0, 1.5], [1.5, 0]])
    with pytest.raises(ValueError):
        strong_dim(sp, [0, 1], exact=True)


# ------------------------------------------------------------ independence


def test_independence_examples():
    generic = DistanceSpace.from_matrix([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    assert is_independent(generic, range(3))
    collinear = DistanceSpace.from_matrix([[0, 1, 4], [1, 0, 1], [4, 1, 0]])
    assert not is_independent(collinear, range(3))
    assert is_independent(collinear, [0, 2])
    with pytest.raises(ValueError):
        is_independent(generic, [])


def test_max_independent_size_on_repaired_example():
    # brute force over subsets with the reflection oracle: a set of k+1
    # points is independent iff strongly k-embeddable
    sp = repaired_example_space()
    best = 1
    for size in (2, 3, 4):
        for sub in itertools.combinations(range(8), size):
            k = size - 1
            if brute_embeddable(sp, sub, k) and not brute_embeddable(sp, sub, k - 1):
                best = max(best, size)
    assert best == 3
    got = extend_to_max_independent(sp, range(8))
    assert len(got) == 3
    assert is_independent(sp, got)


def test_extend_respects_seed_and_ground():
    sp, _ = planted_space(np.random.default_rng(7), 9, 3)
    full = extend_to_max_independent(sp, range(9))
    assert len(full) == 4  # generic rank 3
    seeded = extend_to_max_independent(sp, range(9), seed=[2, 5])
    assert {2, 5} <= seeded
    assert len(seeded) == 4
    with pytest.raises(ValueError):
        extend_to_max_independent(sp, range(4), seed=[7])
    collinear = DistanceSpace.from_matrix([[0, 1, 4], [1, 0, 1], [4, 1, 0]])
    with pytest.raises(ValueError):
        extend_to_max_independent(collinear, range(3), seed=[0, 1, 2])


def test_matroid_exchange_on_planted(rng):
    # maximal independent sets all have size rank+1 regardless of seed
    for _ in range(10):
        sp, pts = planted_space(rng, 8, 2)
        want = int(np.linalg.matrix_rank(pts - pts[0], tol=1e-9)) + 1
        for seed in ([0], [3], [7]):
            got = extend_to_max_independent(sp, range(8), seed=seed)
            assert len(got) == want


# ---------------------------------------------------------------- realize


def test_realize_canonical_triangle():
    sp = DistanceSpace.from_matrix([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    re = realize(sp, range(3), 2)
    assert re is not None
    assert re.coords[0] == (0.0, 0.0)
    x1 = re.coords[1]
    assert x1[0] > 0 and abs(x1[1]) < 1e-12
    assert re.coords[2][1] > 0


def test_realize_pads_low_rank_into_higher_dim():
    sp = DistanceSpace.from_matrix([[0, 1, 4], [1, 0, 1], [4, 1, 0]])
    re = realize(sp, range(3), 3)
    assert re is not None
    for i in range(3):
        assert re.coords[i][1] == 0.0 and re.coords[i][2] == 0.0


def test_realize_roundtrip_relative_error(rng):
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 5))
        n = int(rng.integers(2, 11))
        pts = rng.uniform(-10, 10, size=(n, d))
        M = [
            [float(((pts[i] - pts[j]) ** 2).sum()) for j in range(n)]
            for i in range(n)
        ]
        sp = DistanceSpace.from_matrix(M)
        re = realize(sp, range(n), d)
        assert re is not None
        scale = max(1.0, sp.max_sq)
        for i in range(n):
            for j in range(i + 1, n):
                worst = max(worst, abs(re.pair_sq(i, j) - M[i][j]) / scale)
    assert worst < 1e-9


def test_realize_empty_and_dim_guard():
    sp = DistanceSpace.from_matrix([[0, 1], [1, 0]])
    re = realize(sp, [], 2)
    assert re is not None and re.coords == {}
    with pytest.raises(ValueError):
        realize(sp, [0, 1], 0)


# --------------------------------------------------------- verify_solution


def test_verify_solution_on_golden_witness():
    sp = DistanceSpace.from_matrix(PAPER_D)
    inst = WeightedInstance.build(sp, d=2, k_out=1, k_mod=2, W=3)
    mods = {(0, 1): 1, (2, 4): 5}
    re = realize(apply_modifications(sp, mods), [i for i in range(9) if i != 6], 2)
    sol = Solution(frozenset({6}), mods, re, 3)
    assert verify_solution(inst, sol)
    # over budget
    tight = WeightedInstance.build(sp, d=2, k_out=1, k_mod=2, W=2)
    assert not verify_solution(tight, sol)
    # wrong cost bookkeeping
    assert not verify_solution(inst, Solution(frozenset({6}), mods, None, 2))
    # modification touching an outlier
    bad = Solution(frozenset({6}), {(5, 6): 1, (2, 4): 5}, None, 3)
    assert not verify_solution(inst, bad)
    # not enough repair
    assert not verify_solution(inst, Solution(frozenset({6}), {}, None, 1))
