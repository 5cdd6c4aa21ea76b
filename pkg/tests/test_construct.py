"""Plans and iterative constructions: strong covers, queues, reports."""

import math

import numpy as np
import pytest

from fracavoid.avoidance import AvoidParams
from fracavoid.configs import (
        diagonal_band_cover,
    explicit_cover,
    sumset_cover,
    zero_set_cover,
)
from fracavoid.construct import (
    build_strong_cover,
    cantor_state,
    choose_intermediary,
    dimension_report,
    fp_processed_scan,
    iterate_fp,
    iterate_keleti,
    iterate_main,
    plan_from_schedule,
)
from fracavoid.dyadic import BranchingSchedule, BudgetError, thicken
from fracavoid.measure import canonical_weights, frostman_exponent
from fracavoid.verify import difference_check, sumset_check


def test_choose_intermediary_worked_example():
    p = AvoidParams(s=1.0, eps=0.0, d=1, n=2)
    assert choose_intermediary(64, p) == 8
    assert choose_intermediary(4, p) == 1  # N <= C clamps to 1
    # the branching bound holds for the returned pair
    from fracavoid.avoidance import min_branching

    M = choose_intermediary(64, p)
    assert 64 >= min_branching(p, M)


def test_build_strong_cover_empty_oracle_round_robin():
    # the rapid-decay floor alone drives the growth when covers are empty;
    # its doubly exponential bit cost caps the strict search at depth 3
    empty1 = explicit_cover({}, n=2, d=1, s=1.0, tag="a")
    empty2 = explicit_cover({}, n=2, d=1, s=1.0, tag="b")
    plan = build_strong_cover([empty1, empty2], [0.49, 0.48, 0.47], depth=3)
    assert [st.oracle.tag for st in plan.steps] == ["a", "b", "a"]
    assert all(st.cover_count == 0 for st in plan.steps)


def test_build_strong_cover_band_sparsity_verified():
    diag = diagonal_band_cover()
    plan = build_strong_cover([diag], [0.45, 0.44], depth=2)
    for k, st in enumerate(plan.steps, start=1):
        assert st.cover_count <= st.N ** (diag.s + st.eps)
        if k > 1:
            assert st.N >= plan.schedule.D(k - 1) ** (1 / st.eps) - 1e-9


def test_build_strong_cover_budget_is_loud():
    # doubly exponential growth cannot fit four band levels in 62 bits
    diag = diagonal_band_cover()
    with pytest.raises(BudgetError):
        build_strong_cover([diag], lambda k: 0.45 / k, depth=4)


def test_plan_from_schedule_records_without_enforcing():
    diag = diagonal_band_cover()
    sched = BranchingSchedule(1, [128, 128], [8, 8])
    plan = plan_from_schedule([diag], sched, [0.45, 0.44])
    assert plan.strict is False
    assert plan.steps[0].sparsity_ok is True   # 7*128-12 <= 128^1.45
    assert plan.steps[1].sparsity_ok is False  # band outgrows N^(s+eps) at k=2


def test_iterate_main_pure_random_counts():
    # no bad set: one cube per cell everywhere, counts multiply by M^d
    empty = explicit_cover({}, n=2, d=1, s=1.0)
    sched = BranchingSchedule(1, [64, 64], [8, 8])
    plan = plan_from_schedule([empty], sched)
    state = iterate_main(plan, 2, seed=5)
    assert len(state.grids[1]) == 8
    assert len(state.grids[2]) == 64
    assert state.check_refinement()
    assert all(c["passed"] for c in state.meta["certified"])


def test_iterate_main_diagonal_band_certified():
    diag = diagonal_band_cover()
    sched = BranchingSchedule(1, [64, 64], [8, 8])
    plan = plan_from_schedule([diag], sched)
    state = iterate_main(plan, 2, seed=11)
    assert all(c["passed"] for c in state.meta["certified"])
    for rep in state.reports:
        assert rep.min_kept >= rep.cells_per_parent / 2


def point_oracle(x=1.0):
    class _P:
        n, d, s, tag = 1, 1, 0.0, "point"

        def cover(self, schedule, k, domain=None):
            return thicken([x], k, schedule)

        def count_bound(self, schedule, k):
            return 2

        def sample_points(self, rng, count):
            return np.full((count, 1), x)

    return _P()


def test_iterate_main_sumset_small_pipeline():
    oracle = sumset_cover(point_oracle(1.0))
    sched = BranchingSchedule(1, [256, 64, 64], [16, 8, 8])
    plan = plan_from_schedule([oracle], sched)
    state = iterate_main(plan, 3, seed=7)
    ycov = thicken([1.0], 3, sched)
    rep = sumset_check(state.X, ycov)
    assert rep.passed
    report = dimension_report(state, plan)
    assert report["target_dimension"] == pytest.approx(1.0)


def test_iterate_keleti_counts_and_difference_law():
    sched = BranchingSchedule(1, [20, 40, 80], require_power_of_two=False)
    state = iterate_keleti(sched, 3)
    for k in range(1, 4):
        assert len(state.grids[k]) == sched.D(k) // 10**k
    rep = difference_check(state.X, trace=state.trace)
    assert rep.passed


def test_iterate_keleti_depth_one():
    sched = BranchingSchedule(1, [20], require_power_of_two=False)
    state = iterate_keleti(sched, 1)
    assert len(state.X) == 2


def test_iterate_fp_no_zero_function_never_deletes():
    oracle = zero_set_cover(lambda p: np.ones(len(p)), 0.0, n=2, d=1, m=1)
    sched = BranchingSchedule(1, [4, 16], [2, 4])
    state = iterate_fp(oracle, sched, 2, C_f=1.0, m=1)
    # nothing is ever deleted outside processed tuples; with no zeros the
    # processed tuple keeps one cube per cell and the rest refine fully
    assert state.check_refinement()
    assert all(r["passed"] for r in fp_processed_scan(state, oracle))


def test_iterate_fp_sum_curve_processed_tuples_clean():
    oracle = zero_set_cover(lambda p: p[:, 0] + p[:, 1] - 1.0, math.sqrt(2),
                            n=2, d=1, m=1)
    sched = BranchingSchedule(1, [4, 64], [2, 4])
    state = iterate_fp(oracle, sched, 2, C_f=4.0, m=1)
    assert all(r["passed"] for r in fp_processed_scan(state, oracle))
    assert state.meta["processed"]


def test_iterate_fp_queue_growth_matches_tuple_count():
    oracle = zero_set_cover(lambda p: np.ones(len(p)), 0.0, n=2, d=1, m=1)
    sched = BranchingSchedule(1, [2, 4], [2, 2])
    state = iterate_fp(oracle, sched, 2, queue_cap=100_000, C_f=1.0, m=1)
    cubes = len(state.X)
    # after the final step the queue holds every ordered pair of distinct
    # cubes from each generation produced
    expected_last = cubes * (cubes - 1)
    prev = len(state.grids[1])
    expected_prev = prev * (prev - 1)
    assert len(state.queue) == expected_prev - 1 + expected_last
    assert state.queue_truncated == 0


def test_dimension_report_targets():
    st = cantor_state(3)
    rep = dimension_report(st, n=2, d=1, s=1.0)
    assert rep["target_dimension"] == pytest.approx(1.0)
    rep3 = dimension_report(st, n=3, d=1, s=2.0)
    assert rep3["target_dimension"] == pytest.approx(0.5)
    trivial = dimension_report(st, n=2, d=1, s=2.0)
    assert trivial["target_dimension"] == 0.0
    assert "trivial" in trivial


def test_cantor_state_calibration():
    st = cantor_state(8)
    tree = canonical_weights(st.grids)
    est = frostman_exponent(tree)
    assert est.s == pytest.approx(math.log(2) / math.log(3), abs=1e-9)
