"""Transforms, mollifiers, the gated step, and concentration sanity."""

import cmath
import math

import numpy as np
import pytest

from fracavoid.avoidance import AvoidanceError
from fracavoid.dyadic import BranchingSchedule, GridSet
from fracavoid.fourier import (
    DiscreteMeasure,
    FourierParams,
    decay_profile,
    fourier_coeff,
    fourier_pipeline,
    fourier_step,
    hoeffding_bound,
    measure_of_set,
    mollify,
    smoother_coeff,
    telescoping_increments,
)


def test_measure_of_full_grid():
    s = BranchingSchedule(1, [4])
    full = GridSet(s, 1, np.arange(4).reshape(-1, 1))
    mu = measure_of_set(full)
    assert np.allclose(mu.weights, 0.25)
    with pytest.raises(ValueError):
        measure_of_set(GridSet(s, 1, np.zeros((0, 1))))


def test_full_grid_coefficient_comb():
    s = BranchingSchedule(1, [4])
    mu = measure_of_set(GridSet(s, 1, np.arange(4).reshape(-1, 1)))
    assert fourier_coeff(4, mu) == pytest.approx(1.0)
    for m in (1, 2, 3, 5, 6, 7):
        assert abs(fourier_coeff(m, mu)) < 1e-12


def test_single_atom_flat_transform():
    s = BranchingSchedule(1, [8])
    mu = DiscreteMeasure(s, 1, np.asarray([0]), np.asarray([1.0]))
    for m in (1, 5, 100):
        assert fourier_coeff(m, mu) == pytest.approx(1.0)


def test_coefficient_matches_independent_loop_oracle():
    rng = np.random.default_rng(2)
    s = BranchingSchedule(1, [1024])
    atoms = np.sort(rng.choice(1024, size=20, replace=False))
    w = rng.random(20)
    w /= w.sum()
    mu = DiscreteMeasure(s, 1, atoms, w)
    for m in (1, 7, 300, 1023):
        slow = sum(wi * cmath.exp(-2j * math.pi * m * a / 1024)
                   for a, wi in zip(atoms, w))
        assert abs(fourier_coeff(m, mu) - slow) < 1e-12


def test_atomic_periodicity():
    rng = np.random.default_rng(5)
    s = BranchingSchedule(1, [64])
    atoms = np.sort(rng.choice(64, size=9, replace=False))
    mu = DiscreteMeasure(s, 1, atoms, np.full(9, 1 / 9))
    for m in (3, 11, 40):
        assert abs(fourier_coeff(m, mu) - fourier_coeff(m + 64, mu)) < 1e-12


def test_mollified_envelope_and_factorization():
    rng = np.random.default_rng(3)
    s = BranchingSchedule(1, [128])
    atoms = np.sort(rng.choice(128, size=12, replace=False))
    nu = DiscreteMeasure(s, 1, atoms, np.full(12, 1 / 12))
    mu = mollify(nu)
    D = 128
    for m in (1, 9, 64, 200, 1000):
        kern = smoother_coeff(np.asarray([m]), D)[0]
        assert abs(kern) <= min(1.0, D / (math.pi * abs(m))) + 1e-12
        # factorization mu^ = nu^ * psi^ against direct integration
        direct = sum(
            (1 / 12) * D * (cmath.exp(-2j * math.pi * m * a / D)
                            - cmath.exp(-2j * math.pi * m * (a + 1) / D))
            / (2j * math.pi * m)
            for a in atoms
        )
        assert abs(fourier_coeff(m, mu) - direct) < 1e-12
        assert abs(fourier_coeff(m, mu) - fourier_coeff(m, nu) * kern) < 1e-12


def test_smoothed_unit_interval_kills_integers():
    # the mollified root measure is Lebesgue on [0,1]: zero at every m != 0
    s = BranchingSchedule(1, [2])
    nu0 = DiscreteMeasure(s, 0, np.asarray([0]), np.asarray([1.0]))
    mu0 = mollify(nu0)
    prof = decay_profile(mu0, alpha=0.25, m_max=50)
    assert prof["statistic"] < 1e-12


def test_decay_profile_single_atom():
    s = BranchingSchedule(1, [8])
    mu = DiscreteMeasure(s, 1, np.asarray([0]), np.asarray([1.0]))
    prof = decay_profile(mu, alpha=0.5, m_max=100)
    assert prof["statistic"] == pytest.approx(10.0)  # m_max^alpha


def toy_schedule():
    # M pinned to N^((n-s-2eps)/n) with n=2, s=1, eps=0.05: N^0.45
    return BranchingSchedule(1, [2048], [16])


def test_fourier_step_deterministic_when_M_equals_N():
    s = BranchingSchedule(1, [16], [16])
    T = GridSet(s, 0, [[0]])
    params = FourierParams(s=0.0, eps=0.0, n=2, seed=1)
    B = GridSet(s, 1, np.zeros((0, 2)), d=1, n=2)
    S, rep = fourier_step(T, B, params, s)
    assert S.coords.ravel().tolist() == list(range(16))
    assert rep.deviation < 1e-12
    assert rep.threshold_met


def test_fourier_step_m_pinning_enforced():
    s = BranchingSchedule(1, [2048], [64])  # 64 > 2048^0.45 ~ 31
    T = GridSet(s, 0, [[0]])
    with pytest.raises(AvoidanceError, match="pinned"):
        fourier_step(T, GridSet(s, 1, np.zeros((0, 2)), d=1, n=2),
                     FourierParams(s=1.0, eps=0.05, n=2, seed=0), s)


def test_fourier_step_avoids_diagonal_band():
    s = toy_schedule()
    T = GridSet(s, 0, [[0]])
    rng = np.random.default_rng(8)
    rows = []
    for _ in range(40):
        a = rng.integers(0, 2047)
        rows.append([a, a + 1])
    B = GridSet(s, 1, np.asarray(rows), d=1, n=2)
    params = FourierParams(s=1.0, eps=0.05, n=2, seed=3, strict=False)
    S, rep = fourier_step(T, B, params, s)
    from fracavoid.verify import assert_avoids

    assert assert_avoids(S, B, 2).passed
    assert rep.size_conditions["exponential_floor"]["ok"] is False  # desk scale


def test_fourier_pipeline_increments_decrease():
    # at fixed frequencies the refinements move mass within ever smaller
    # cells, so the weighted increments collapse step over step; the window
    # is the coarsest full period (the full-period sup would instead be
    # amplified by m^alpha at m ~ D_{k+1}, which no desk scale can beat)
    sched = BranchingSchedule(1, [64, 128, 256], [4, 8, 8])
    out = fourier_pipeline(None, sched, 3, seed=12, s=1.0,
                           eps_seq=[0.05, 0.05, 0.05], strict=False)
    inc = telescoping_increments(out["mollified"], alpha=0.20, m_max=64)
    assert len(inc) == 3
    assert inc[2] < inc[1] < inc[0]


def test_hoeffding_tail_envelope_small():
    # fixed frequency, many seeds: empirical tail under the stated bound
    sched = BranchingSchedule(1, [1024], [64])
    T = GridSet(sched, 0, [[0]])
    from fracavoid.avoidance import random_select
    from fracavoid.fourier import _dense_transform

    wT = np.full(1024, 1 / 1024)
    smooth = np.fft.fft(wT)
    m_probe = [3, 17, 100]
    t_probe = 0.35
    seeds = 1000
    exceed = np.zeros(len(m_probe))
    for seed in range(seeds):
        A = random_select(T, sched, seed)
        dev = np.abs(_dense_transform(measure_of_set(A)) - smooth)
        for i, m in enumerate(m_probe):
            exceed[i] += dev[m] >= t_probe
    bound = hoeffding_bound(64, t_probe)
    assert bound < 1
    for i in range(len(m_probe)):
        emp = exceed[i] / seeds
        assert emp <= bound + 3 * math.sqrt(bound * (1 - bound) / seeds) + 0.01


def test_decay_statistic_bounded_by_telescoping():
    # the weighted sup stays bounded along the history and its per-step
    # change is dominated by the telescoping increment (triangle inequality),
    # which itself collapses step over step
    sched = BranchingSchedule(1, [64, 128, 256], [4, 8, 8])
    out = fourier_pipeline(None, sched, 3, seed=12, s=1.0,
                           eps_seq=[0.05] * 3, strict=False)
    prof = decay_profile(out["mollified"], alpha=0.20, m_max=64)
    stats = prof["statistics"]
    incs = prof["increments"]
    assert stats[0] < 1e-12  # the smoothed root kills integer frequencies
    assert max(stats) <= stats[1] * 1.05
    for k in range(3):
        assert abs(stats[k + 1] - stats[k]) <= incs[k] + 1e-12
    assert incs[2] < incs[1] < incs[0]
