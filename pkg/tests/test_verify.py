"""Verifier oracles: planted violations are found, clean inputs pass."""

import numpy as np
import pytest

from fracavoid.configs import CurveSpec
from fracavoid.dyadic import BranchingSchedule, Cube, GridSet
from fracavoid.verify import (
    VerifyBudgetError,
    assert_avoids,
    difference_check,
    isosceles_check,
    sumset_check,
)


def test_assert_avoids_empty_bad_set_counts_tuples():
    s = BranchingSchedule(1, [8])
    X = GridSet(s, 1, [[0], [3], [5]])
    B = GridSet(s, 1, np.zeros((0, 2)), d=1, n=2)
    rep = assert_avoids(X, B, 2)
    assert rep.passed
    assert rep.checked == 3 * 2


def test_assert_avoids_planted_violation():
    s = BranchingSchedule(1, [8])
    X = GridSet(s, 1, [[0], [3], [5]])
    B = GridSet(s, 1, [[3, 5], [7, 7]], d=1, n=2)
    rep = assert_avoids(X, B, 2)
    assert not rep.passed
    assert (3, 5) in {tuple(v) for v in rep.violations}


def test_assert_avoids_budget_is_loud():
    s = BranchingSchedule(1, [16])
    X = GridSet(s, 1, np.arange(16).reshape(-1, 1))
    rng = np.random.default_rng(0)
    B = GridSet(s, 1, rng.integers(0, 16, size=(150, 3)), d=1, n=3)
    with pytest.raises(VerifyBudgetError):
        assert_avoids(X, B, 3, budget=100)
    # with an affordable B the scan direction still answers exactly
    rep = assert_avoids(X, B, 3, budget=1000)
    assert rep.note == "scanned B rows"
    assert not rep.passed  # X is the full grid, so any non-diagonal row hits


def test_difference_check_vacuous_and_planted():
    s = BranchingSchedule(1, [10], require_power_of_two=False)
    tiny = GridSet(s, 1, [[0], [5]])
    assert difference_check(tiny).passed
    s2 = BranchingSchedule(1, [20], require_power_of_two=False)
    planted = GridSet(s2, 1, [[0], [4], [9], [13]])  # 4-0 = 13-9
    rep = difference_check(planted)
    assert not rep.passed
    assert (0, 4, 9, 13) in {tuple(v) for v in rep.violations}


def test_difference_check_shared_midpoint_quadruple():
    s = BranchingSchedule(1, [32])
    planted = GridSet(s, 1, [[2], [9], [16]])  # 9-2 = 16-9, with x2 = x3
    rep = difference_check(planted)
    assert not rep.passed


def test_difference_check_trace_scope():
    # separation law at the generation where the interval was processed
    s = BranchingSchedule(1, [20, 20], require_power_of_two=False)
    # inside offsets 9, outside offsets 4 at generation 2 (processed at step 1)
    X = GridSet(s, 1, [[9], [19]])
    from fracavoid.avoidance import keleti_step

    X2 = keleti_step(X, Cube(s, 1, "DQ", (9,)), s)
    trace = [(0, Cube(s, 0, "DQ", (0,))), (1, Cube(s, 1, "DQ", (9,)))]
    rep = difference_check(X2, trace=trace)
    assert rep.passed
    # planted in-scope quadruple with matching gaps: 204-189 = 399-384
    bad = GridSet(s, 2, [[189], [204], [384], [399]])
    rep2 = difference_check(bad, trace=trace)
    assert not rep2.passed


def test_sumset_check_pass_and_planted():
    s = BranchingSchedule(1, [32])
    ycov = GridSet(s, 1, [[31]])
    clean = GridSet(s, 1, [[2], [5], [9]])
    assert sumset_check(clean, ycov).passed
    planted = GridSet(s, 1, [[2], [29]])  # 2 + 29 = 31 hits the cover window
    rep = sumset_check(planted, ycov)
    assert not rep.passed
    empty_y = GridSet(s, 1, np.zeros((0, 1)))
    assert sumset_check(planted, empty_y).passed


def test_sumset_check_halved_branch():
    s = BranchingSchedule(1, [32])
    ycov = GridSet(s, 1, [[31]])
    # x = 15: 2x = 30 is within the slack window of cube 31
    rep = sumset_check(GridSet(s, 1, [[15]]), ycov)
    assert not rep.passed
    assert (15, 15) in {tuple(v) for v in rep.violations}


def flat():
    return CurveSpec((0.0, 1.0), ((0.0,), (0.0,)), lipschitz=0.0)


def test_isosceles_check_vacuous_and_planted():
    s = BranchingSchedule(1, [16])
    assert isosceles_check(GridSet(s, 1, [[0], [8]]), flat()).passed
    # equally spaced params on a flat curve: exact isosceles at the midpoint
    rep = isosceles_check(GridSet(s, 1, [[0], [6], [12]]), flat())
    assert not rep.passed


def test_isosceles_check_clean_triple():
    s = BranchingSchedule(1, [64])
    # wildly unequal spacing on a flat curve: all distance gaps exceed tau*l
    rep = isosceles_check(GridSet(s, 1, [[0], [9], [50]]), flat())
    assert rep.passed
