from fractions import Fraction

import numpy as np
import pytest

from edmrepair.core import DistanceSpace, apply_modifications, restrict
from edmrepair.geometry import Realization, is_embeddable, realize
from edmrepair.feasibility import (
    PartialRealizationProblem,
    feasible_with_free_pairs,
    verify_witness,
)

from conftest import garbage_space, planted_space

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

LINE3 = DistanceSpace.from_matrix([[0, 1, 1], [1, 0, 9], [1, 9, 0]])


def scaled(space, c):
    return DistanceSpace.from_matrix(
        [[v * c for v in row] for row in space.sqdist]
    )


def test_problem_build_validation():
    with pytest.raises(ValueError):
        PartialRealizationProblem.build(LINE3, [], -1)
    with pytest.raises(ValueError):
        PartialRealizationProblem.build(LINE3, [(0, 3)], 1)
    with pytest.raises(ValueError):
        PartialRealizationProblem.build(LINE3, [(1, 1)], 1)
    with pytest.raises(ValueError):
        PartialRealizationProblem.build(LINE3, [], 1, restarts=-1)
    p = PartialRealizationProblem.build(LINE3, [(2, 1), (1, 2)], 1)
    assert p.free_pairs == frozenset({(1, 2)})


def test_no_free_pairs_matches_engine(rng):
    # the free-pair solver degenerates to plain realizability
    agree = 0
    for trial in range(170):
        n = int(rng.integers(3, 8))
        if trial % 2 == 0:
            sp, _ = planted_space(rng, n, int(rng.integers(1, 4)))
        else:
            sp = garbage_space(rng, n, hi=10)
        keep = sorted(rng.permutation(n)[: int(rng.integers(2, n + 1))])
        sub = restrict(sp, set(range(n)) - set(keep))
        for r in (1, 2, 3):
            prob = PartialRealizationProblem.build(sub, [], r)
            got = feasible_with_free_pairs(prob)
            want = is_embeddable(sub, range(sub.n), r)
            assert (got is not None) == want
            if got is not None:
                re, values = got
                assert values == {}
                assert verify_witness(sub, [], r, re)
            agree += 1
    assert agree >= 500


def test_paper_restriction_recovers_witness_values():
    rsp = restrict(DistanceSpace.from_matrix(PAPER_D), {6})
    prob = PartialRealizationProblem.build(rsp, [(0, 1), (2, 4)], 2)
    got = feasible_with_free_pairs(prob)
    assert got is not None
    re, values = got
    assert verify_witness(rsp, [(0, 1), (2, 4)], 2, re)
    # the remaining pairs pin both endpoints, so the values are forced
    assert abs(values[(0, 1)] - 1) < 1e-5
    assert abs(values[(2, 4)] - 5) < 1e-5


def test_three_point_line_with_free_bad_pair():
    prob = PartialRealizationProblem.build(LINE3, [(1, 2)], 1)
    got = feasible_with_free_pairs(prob)
    assert got is not None
    re, values = got
    assert verify_witness(LINE3, [(1, 2)], 1, re)
    assert values[(1, 2)] >= 0
    # without freeing anything the space stays stuck
    assert feasible_with_free_pairs(
        PartialRealizationProblem.build(LINE3, [], 1)
    ) is None


def test_single_free_pair_two_sided_decision():
    # point 3 has inconsistent fixed distances; freeing (3, 4) cannot help
    M = [
        [0, 1, 4, 1, 9],
        [1, 0, 1, 50, 4],
        [4, 1, 0, 60, 1],
        [1, 50, 60, 0, 70],
        [9, 4, 1, 70, 0],
    ]
    sp = DistanceSpace.from_matrix(M)
    assert feasible_with_free_pairs(
        PartialRealizationProblem.build(sp, [(3, 4)], 1)
    ) is None


def test_r0_degenerate():
    co = DistanceSpace.from_matrix([[0, 0, 5], [0, 0, 5], [5, 5, 0]])
    got = feasible_with_free_pairs(
        PartialRealizationProblem.build(co, [(0, 2), (1, 2)], 0)
    )
    assert got is not None
    re, values = got
    assert re.dim == 0
    assert set(values.values()) == {0.0}
    assert feasible_with_free_pairs(
        PartialRealizationProblem.build(co, [(0, 2)], 0)
    ) is None


def test_line_enumeration_recovers_rigid_values():
    xs = [0, 1, 3, 6, 10]
    n = len(xs)
    M = [[(xs[i] - xs[j]) ** 2 for j in range(n)] for i in range(n)]
    truth02 = M[0][2]
    truth14 = M[1][4]
    M[0][2] = M[2][0] = 9999
    M[1][4] = M[4][1] = 1234
    sp = DistanceSpace.from_matrix(M)
    got = feasible_with_free_pairs(
        PartialRealizationProblem.build(sp, [(0, 2), (1, 4)], 1)
    )
    assert got is not None
    re, values = got
    assert abs(values[(0, 2)] - truth02) < 1e-6
    assert abs(values[(1, 4)] - truth14) < 1e-6


def test_line_enumeration_infeasible():
    # the fully fixed triangle 1, 1, 9 stays infeasible on the line no
    # matter what the pairs into the extra point get
    M = [
        [0, 1, 1, 7],
        [1, 0, 9, 7],
        [1, 9, 0, 4],
        [7, 7, 4, 0],
    ]
    sp = DistanceSpace.from_matrix(M)
    got = feasible_with_free_pairs(
        PartialRealizationProblem.build(sp, [(0, 3), (1, 3)], 1)
    )
    assert got is None


def test_numeric_path_on_scrambled_planted(rng):
    ok = 0
    total = 0
    for trial in range(20):
        d = 2 if trial % 2 == 0 else 3
        n = int(rng.integers(7, 10))
        sp, pts = planted_space(rng, n, d)
        M = [list(row) for row in sp.sqdist]
        free = set()
        while len(free) < 3:
            i, j = sorted(rng.permutation(n)[:2])
            free.add((int(i), int(j)))
        for i, j in free:
            M[i][j] = M[j][i] = int(rng.integers(1, 500))
        scr = DistanceSpace.from_matrix(M)
        total += 1
        got = feasible_with_free_pairs(
            PartialRealizationProblem.build(scr, free, d, seed=trial)
        )
        if got is not None:
            re, values = got
            assert verify_witness(scr, free, d, re)
            ok += 1
    assert ok >= int(0.95 * total)


def test_scale_invariance_of_verdict():
    rsp = restrict(DistanceSpace.from_matrix(PAPER_D), {6})
    frees = [(0, 1), (2, 4)]
    bad = DistanceSpace.from_matrix(
        [[0, 1, 1, 7], [1, 0, 9, 7], [1, 9, 0, 4], [7, 7, 4, 0]]
    )
    for c in (Fraction(1, 64), 729):
        up = scaled(rsp, c)
        assert feasible_with_free_pairs(
            PartialRealizationProblem.build(up, frees, 2)
        ) is not None
        down = scaled(bad, c)
        assert feasible_with_free_pairs(
            PartialRealizationProblem.build(down, [(0, 3), (1, 3)], 1)
        ) is None


def test_verify_witness_paper_realization():
    rsp = restrict(DistanceSpace.from_matrix(PAPER_D), {6})
    mod = apply_modifications(rsp, {(0, 1): 1, (2, 4): 5})
    re = realize(mod, range(8), 2)
    assert re is not None
    assert verify_witness(rsp, [(0, 1), (2, 4)], 2, re)


def test_verify_witness_rejects_perturbation():
    rsp = restrict(DistanceSpace.from_matrix(PAPER_D), {6})
    frees = [(0, 1), (2, 4)]
    got = feasible_with_free_pairs(PartialRealizationProblem.build(rsp, frees, 2))
    assert got is not None
    re, _ = got
    coords = dict(re.coords)
    x, y = coords[7]
    coords[7] = (x + 0.01, y)  # far beyond 10x the tolerance
    assert not verify_witness(rsp, frees, 2, Realization(2, coords))
    # missing point or wrong ambient dimension is not a witness
    partial = {i: re.coords[i] for i in range(7)}
    assert not verify_witness(rsp, frees, 2, Realization(2, partial))
    assert not verify_witness(rsp, frees, 3, re)


def test_witness_from_empty_space():
    empty = restrict(LINE3, {0, 1, 2})
    got = feasible_with_free_pairs(PartialRealizationProblem.build(empty, [], 2))
    assert got is not None
    assert got[0].coords == {}
