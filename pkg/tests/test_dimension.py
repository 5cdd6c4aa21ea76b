"""Covering counts, ratio proxies, and the hyperdyadic failure demo."""

import math

import numpy as np
import pytest

from fracavoid.dimension import covering_number, hyperdyadic_demo, minkowski_estimate
from fracavoid.dyadic import BranchingSchedule, BudgetError, GridSet


def cantor_grids(depth):
    s = BranchingSchedule(1, [3] * depth)
    grids = [GridSet(s, 0, [[0]])]
    for k in range(1, depth + 1):
        prev = grids[-1].coords.ravel()
        grids.append(GridSet(s, k, np.concatenate([prev * 3, prev * 3 + 2]).reshape(-1, 1)))
    return grids


def test_covering_full_cube():
    s = BranchingSchedule(2, [2, 2, 2])
    full = GridSet(s, 0, [[0, 0]])
    assert covering_number(full, 3) == 8**2


def test_covering_single_point():
    s = BranchingSchedule(1, [4, 4])
    assert covering_number([0.3], 2, s) == 1


def test_covering_cantor_counts():
    grids = cantor_grids(6)
    for k, g in enumerate(grids):
        assert covering_number(g, k) == 2**k
    # counting the depth-6 set at coarser scales recovers earlier counts
    assert covering_number(grids[6], 3) == 2**3


def test_covering_monotone_and_subadditive():
    s = BranchingSchedule(1, [4, 4])
    a = GridSet(s, 2, [[0], [7], [9]])
    b = GridSet(s, 2, [[7], [11]])
    u = a.union(b)
    for k in (1, 2):
        assert covering_number(a, k) <= covering_number(u, k)
        assert covering_number(u, k) <= covering_number(a, k) + covering_number(b, k)


def test_minkowski_full_cube_ratios():
    s = BranchingSchedule(2, [2] * 5)
    full = GridSet(s, 0, [[0, 0]])
    est = minkowski_estimate(full, depth=5)
    assert all(r == pytest.approx(2.0) for r in est.ratios)
    assert 0 <= min(est.ratios) and max(est.ratios) <= 2


def test_minkowski_cantor_proxy():
    grids = cantor_grids(8)
    est = minkowski_estimate(grids[1:])
    target = math.log(2) / math.log(3)
    assert est.lower_proxy == pytest.approx(target, abs=0.02)
    assert est.upper_proxy == pytest.approx(target, abs=0.02)


def test_minkowski_finite_set_ratios_decay():
    s = BranchingSchedule(1, [4] * 6)
    est = minkowski_estimate([0.1, 0.57, 0.93], depth=6, schedule=s)
    # after saturation the count is constant, so ratios decrease toward 0
    tail = est.ratios[2:]
    assert all(b < a for a, b in zip(tail, tail[1:]))


def test_hyperdyadic_demo_limits_and_gap():
    demo = hyperdyadic_demo(0.5, 6)
    assert demo.l_ratios[-1] == pytest.approx(0.5, abs=0.05)
    assert demo.r_ratios[-1] == pytest.approx(1 / (1 + math.sqrt(2)), abs=0.05)
    for k in range(5, len(demo.l_ratios)):
        assert demo.l_ratios[k] - demo.r_ratios[k] >= 0.05
    # exact count identity prod(N_j / M_j)
    expected = 1
    for N, M in zip(demo.Ns, demo.Ms):
        expected *= N // M
    assert demo.counts[-1] == expected


def test_hyperdyadic_demo_budget_overflow():
    with pytest.raises(BudgetError):
        hyperdyadic_demo(0.5, 12)
