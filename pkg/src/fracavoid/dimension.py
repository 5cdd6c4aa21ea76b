"""Covering numbers and Minkowski-dimension estimation at dyadic scales.

The estimates report raw per-generation ratios log(count)/log(1/l_k) and
trailing-window extremes as finite proxies for the lower/upper Minkowski
dimension; no limit is claimed.  The hyperdyadic demonstration reproduces
the regime where single-scale ratios misreport the dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from fracavoid.dyadic import (
    BranchingSchedule,
    BudgetError,
    GridSet,
    coarsen,
    thicken,
)

__all__ = [
    "DimensionEstimate",
    "covering_number",
    "minkowski_estimate",
    "hyperdyadic_demo",
    "HyperdyadicDemo",
]


@dataclass
class DimensionEstimate:
    ks: list
    counts: list
    ratios: list
    window: int

    @property
    def lower_proxy(self) -> float:
        return min(self.ratios[-self.window:])

    @property
    def upper_proxy(self) -> float:
        return max(self.ratios[-self.window:])

    def rows(self):
        return list(zip(self.ks, self.counts, self.ratios))


def covering_number(E, k: int, schedule: BranchingSchedule | None = None) -> int:
    """Number of generation-k cubes meeting E (dyadic greedy count).

    Grid sets are unions of half-open boxes: coarser counts are ancestor
    counts, finer counts multiply by the subdivision ratio per axis.  Point
    inputs are thickened against closed cubes.
    """
    if isinstance(E, GridSet):
        if k == E.k:
            return len(E)
        if k < E.k:
            return len(coarsen(E, k))
        ratio = 1
        for j in range(E.k + 1, k + 1):
            if j > E.schedule.depth:
                raise BudgetError(f"schedule has no generation {j}")
            ratio *= E.schedule.N(j)
        return len(E) * ratio ** E.dim
    if schedule is None:
        raise ValueError("covering_number of points needs a schedule")
    return len(thicken(E, k, schedule))


def minkowski_estimate(E, depth: int | None = None, window: int = 3,
                       schedule: BranchingSchedule | None = None) -> DimensionEstimate:
    """Per-generation covering ratios with trailing-window extremes.

    E may be a grid set (counted at generations 1..depth via exact
    coarsening/refinement) or a list of per-generation grid sets from a
    construction, in which case each generation is counted from its own set.
    """
    if isinstance(E, (list, tuple)) and E and all(isinstance(g, GridSet) for g in E):
        grids = list(E)
        ks = [g.k for g in grids if g.k >= 1]
        counts = [len(g) for g in grids if g.k >= 1]
        sched = grids[0].schedule
    else:
        sched = E.schedule if isinstance(E, GridSet) else schedule
        if sched is None:
            raise ValueError("point input needs a schedule")
        if depth is None:
            depth = E.k if isinstance(E, GridSet) else sched.depth
        ks = list(range(1, depth + 1))
        counts = [covering_number(E, k, sched) for k in ks]
    ratios = [math.log(c) / math.log(sched.D(k)) if c > 0 else 0.0
              for k, c in zip(ks, counts)]
    window = min(window, len(ratios))
    if window < 1:
        raise ValueError("no generations to estimate from")
    return DimensionEstimate(ks, counts, ratios, window)


@dataclass
class HyperdyadicDemo:
    c: float
    Ns: list
    Ms: list
    counts: list
    l_ratios: list
    r_ratios: list
    grids: list

    @property
    def final_gap(self) -> float:
        return self.l_ratios[-1] - self.r_ratios[-1]


def hyperdyadic_demo(c: float, depth: int, *, d: int = 1,
                     max_bits: int | None = None,
                     materialize_limit: int = 2_000_000) -> HyperdyadicDemo:
    """One-cell-per-cube construction on the schedule N_k = 2^floor(2^(ck)).

    Each generation keeps a single intermediary cell (all of its fine cubes)
    inside every kept cube, so the exact count identity
    #E_k = prod N_j / M_j holds.  Returns the fine-scale and intermediary-
    scale ratio sequences; the former trends to 1-c, the latter to the
    strictly smaller (1-c)/(1-c+c*2^c).

    Grids are materialized (and the count identity cross-checked on them)
    only while they stay under materialize_limit cubes; beyond that the
    exact closed-form count drives the ratios and the grid slot holds None.
    """
    if not (0 < c < 1):
        raise ValueError("c must lie in (0,1)")
    if depth < 1:
        raise ValueError("depth must be positive")
    Ns = [2 ** int(math.floor(2 ** (c * k))) for k in range(1, depth + 2)]
    Ms = [2 ** int(math.floor(c * 2 ** (c * k))) for k in range(1, depth + 2)]
    schedule = BranchingSchedule(d, Ns[:depth], Ms[:depth], max_bits=max_bits)
    # the extra level only contributes M_{depth+1} to the last r-scale ratio
    M_extra = Ms[depth]

    grids = [GridSet(schedule, 0, np.zeros((1, d), dtype=np.int64))]
    counts = []
    l_ratios = []
    r_ratios = []
    expected = 1
    for k in range(1, depth + 1):
        N, M = schedule.N(k), schedule.M(k)
        prev = grids[-1]
        ratio = N // M
        expected *= ratio**d
        if prev is not None and expected <= materialize_limit:
            # keep the first intermediary cell of each cube, i.e. fine
            # offsets 0..ratio-1 per axis
            offs = np.stack(
                np.meshgrid(*[np.arange(ratio, dtype=np.int64)] * d, indexing="ij"),
                axis=-1,
            ).reshape(-1, d)
            coords = (prev.coords * N)[:, None, :] + offs[None, :, :]
            cur = GridSet(schedule, k, coords.reshape(-1, d), _presorted=(d == 1))
            assert len(cur) == expected, "count identity prod(N_j/M_j) violated"
            grids.append(cur)
        else:
            grids.append(None)
        count = expected
        counts.append(count)
        l_ratios.append(math.log(count) / math.log(schedule.D(k)))
        Mk1 = schedule.M(k + 1) if k < depth else M_extra
        R_next = schedule.D(k) * Mk1
        # the next refinement keeps one intermediary cell per cube, so the
        # count of scale-r_{k+1} cubes meeting the set equals #E_k
        r_ratios.append(math.log(count) / math.log(R_next))
    return HyperdyadicDemo(c, Ns[:depth], Ms[:depth], counts, l_ratios, r_ratios, grids)
