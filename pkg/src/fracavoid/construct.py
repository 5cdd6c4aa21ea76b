"""Orchestration: strong-cover plans and the iterative constructions.

A construction is a nested chain {X_k} of grid sets, each refining the
last, together with per-step reports.  Three engines are provided: the
randomized avoidance iteration, the translate-avoiding interval queue, and
the tuple-queue driver for the slab/wafer step.

Strong-cover planning searches power-of-two branching factors until the
emitted covers satisfy the sparsity and rapid-decay inequalities; the
doubly exponential growth this demands caps the reachable depth at the
integer budget, so pipelines may instead run on an explicitly supplied
schedule with every realized inequality recorded rather than enforced.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from fracavoid.avoidance import (
    AvoidanceError,
    AvoidParams,
    avoid_step,
    fp_step,
    keleti_step,
    step_constant,
)
from fracavoid.configs import CoverOracle
from fracavoid.dyadic import (
    BranchingSchedule,
    BudgetError,
    Cube,
    GridSet,
    coarsen,
    refine,
)
from fracavoid.measure import canonical_weights, frostman_exponent
from fracavoid.verify import assert_avoids

__all__ = [
    "PlanStep",
    "StrongCoverPlan",
    "ConstructionState",
    "build_strong_cover",
    "plan_from_schedule",
    "choose_intermediary",
    "iterate_main",
    "iterate_keleti",
    "iterate_fp",
    "dimension_report",
    "cantor_state",
]


@dataclass
class PlanStep:
    oracle: CoverOracle
    eps: float
    N: int
    M: int
    cover_count: int | None
    sparsity_ok: bool | None
    rapid_decay_ok: bool


@dataclass
class StrongCoverPlan:
    d: int
    n: int
    s: float
    steps: list
    schedule: BranchingSchedule
    strict: bool

    @property
    def depth(self) -> int:
        return len(self.steps)


@dataclass
class ConstructionState:
    schedule: BranchingSchedule
    grids: list               # X_0 .. X_k
    reports: list = field(default_factory=list)
    mode: str = "main"
    meta: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)      # processed queue items
    queue: deque = field(default_factory=deque)
    queue_truncated: int = 0

    @property
    def k(self) -> int:
        return self.grids[-1].k

    @property
    def X(self) -> GridSet:
        return self.grids[-1]

    def check_refinement(self) -> bool:
        for prev, cur in zip(self.grids, self.grids[1:]):
            parents = cur.coords // self.schedule.N(cur.k)
            if not prev.member(parents).all():
                return False
        return True


def choose_intermediary(N: int, params: AvoidParams) -> int:
    """Largest power of two strictly below (N/C)^((dn-s-eps)/(d(n-1)))."""
    expo = (params.dim - params.s - params.eps) / (params.d * (params.n - 1))
    base = (N / params.C) ** expo
    M = 1
    while M * 2 < base - 1e-12:
        M *= 2
    return max(1, min(M, N))


def _eps_default(k: int, d: int, n: int, s: float) -> float:
    return min((d * n - s) / 4.0, 1.0 / (k + 1))


def build_strong_cover(oracles: Sequence[CoverOracle], eps_seq, depth: int,
                       *, d: int | None = None, max_bits: int | None = None,
                       n_start_bits: int = 1) -> StrongCoverPlan:
    """Round-robin strong-cover plan with searched branching factors.

    For each level the designated oracle's cover must satisfy the sparsity
    bound count <= N^(s+eps_k) while N also dominates the rapid-decay floor
    max(C(s,d,n), D_{k-1}^(1/eps_k)).  Power-of-two factors are searched
    upward; the integer budget bounds the reachable depth and exhaustion is
    a loud failure.
    """
    if not oracles:
        raise ValueError("no oracles")
    n = oracles[0].n
    d = d or oracles[0].d
    s = max(o.s for o in oracles)
    if callable(eps_seq):
        eps_list = [eps_seq(k) for k in range(1, depth + 1)]
    else:
        eps_list = list(eps_seq)
    if len(eps_list) < depth:
        raise ValueError("eps sequence shorter than the requested depth")
    for k, e in enumerate(eps_list[:depth], start=1):
        if not (0 < e < (d * n - s) / 2):
            raise ValueError(f"eps_{k} = {e} outside (0, (dn-s)/2)")
        if k >= 2 and e > eps_list[k - 2] + 1e-12:
            raise ValueError("eps sequence must be decreasing")
    from fracavoid.dyadic import budget_bits

    bits = budget_bits() if max_bits is None else max_bits
    C = step_constant(s, d, n)
    steps = []
    Ns, Ms = [], []
    D = 1
    for k in range(1, depth + 1):
        oracle = oracles[(k - 1) % len(oracles)]
        eps = eps_list[k - 1]
        floor = max(C, math.ceil(D ** (1.0 / eps)) if D > 1 else 2)
        j = max(n_start_bits, int(math.ceil(math.log2(max(floor, 2)))))
        found = None
        while True:
            N = 1 << j
            if (D * N).bit_length() > bits:
                raise BudgetError(
                    f"level {k}: no admissible N within the {bits}-bit budget"
                    f" (search reached N = 2^{j})"
                )
            trial = BranchingSchedule(d, Ns + [N], None, max_bits=bits)
            count = oracle.count_bound(trial, k)
            if count is None:
                try:
                    count = len(oracle.cover(trial, k))
                except BudgetError:
                    count = None
            if count is not None and count <= N ** (oracle.s + eps):
                found = (N, count)
                break
            j += 1
        N, count = found
        params = AvoidParams(s=oracle.s, eps=eps, d=d, n=n, seed=0)
        M = choose_intermediary(N, params)
        steps.append(PlanStep(oracle, eps, N, M, count, True, True))
        Ns.append(N)
        Ms.append(M)
        D *= N
    schedule = BranchingSchedule(d, Ns, Ms, max_bits=bits)
    return StrongCoverPlan(d, n, s, steps, schedule, strict=True)


def plan_from_schedule(oracles: Sequence[CoverOracle], schedule: BranchingSchedule,
                       eps_seq=None) -> StrongCoverPlan:
    """Desk-scale plan on a fixed schedule: inequalities recorded, not enforced.

    The searched plan's doubly exponential factors exceed any materializable
    grid beyond shallow depth, so pipeline runs fix the schedule and record
    which sparsity/rapid-decay inequalities the realized covers satisfy.
    """
    n = oracles[0].n
    d = oracles[0].d
    s = max(o.s for o in oracles)
    depth = schedule.depth
    if eps_seq is None:
        eps_list = [_eps_default(k, d, n, s) for k in range(1, depth + 1)]
    elif callable(eps_seq):
        eps_list = [eps_seq(k) for k in range(1, depth + 1)]
    else:
        eps_list = list(eps_seq)
    C = step_constant(s, d, n)
    steps = []
    for k in range(1, depth + 1):
        oracle = oracles[(k - 1) % len(oracles)]
        eps = eps_list[k - 1]
        N, M = schedule.N(k), schedule.M(k)
        count = oracle.count_bound(schedule, k)
        sparsity_ok = None if count is None else count <= N ** (oracle.s + eps)
        if k > 1 and eps > 0:
            decay_floor = max(C, schedule.D(k - 1) ** (1.0 / eps))
        else:
            decay_floor = C if k == 1 else math.inf  # eps = 0 admits no finite floor
        decay_ok = N >= decay_floor
        steps.append(PlanStep(oracle, eps, N, M, count, sparsity_ok, decay_ok))
    return StrongCoverPlan(d, n, s, steps, schedule, strict=False)


def _full_cube(schedule: BranchingSchedule, d: int) -> GridSet:
    return GridSet(schedule, 0, np.zeros((1, d), dtype=np.int64))


def iterate_main(plan: StrongCoverPlan, steps: int, seed: int,
                 *, certify: bool = True, retries: int = 64) -> ConstructionState:
    """Randomized avoidance iteration along a plan.

    Applies the one-scale step against each level's cover, maintains the
    refinement invariant, and finally re-certifies the finished set against
    every level's cover with the independent verifier.
    """
    if steps > plan.depth:
        raise ValueError("plan too shallow for the requested steps")
    schedule = plan.schedule
    state = ConstructionState(schedule, [_full_cube(schedule, plan.d)], mode="main",
                              meta={"seed": seed, "n": plan.n, "d": plan.d,
                                    "s": plan.s, "tags": [st.oracle.tag for st in plan.steps]})
    seed_seq = np.random.SeedSequence(seed).spawn(steps)
    for t in range(steps):
        st = plan.steps[t]
        params = AvoidParams(s=st.oracle.s, eps=st.eps, d=plan.d, n=plan.n,
                             seed=seed_seq[t], retries=retries)
        S, report = avoid_step(state.X, st.oracle, params, schedule)
        state.grids.append(S)
        state.reports.append(report)
    if not state.check_refinement():
        raise AvoidanceError("refinement invariant violated")
    if certify:
        state.meta["certified"] = certify_against_plan(state, plan, steps)
    return state


def certify_against_plan(state: ConstructionState, plan: StrongCoverPlan,
                         steps: int) -> list:
    """Independent avoidance certificates of X_k against every B_j, j <= k."""
    out = []
    for j in range(1, steps + 1):
        Xj = coarsen(state.X, j)
        B = plan.steps[j - 1].oracle.cover(plan.schedule, j, domain=Xj)
        rep = assert_avoids(Xj, B, plan.n)
        out.append({"generation": j, "checked": rep.checked, "passed": rep.passed,
                    "violations": len(rep.violations)})
        if not rep.passed:
            raise AvoidanceError(
                f"certification failed at generation {j}: {rep.violations[:3]}"
            )
    return out


def iterate_keleti(schedule: BranchingSchedule, depth: int) -> ConstructionState:
    """Translate-avoiding interval queue: process one interval per level.

    The queue starts with [0,1]; after each step every interval of the new
    generation joins the back of the queue.
    """
    state = ConstructionState(schedule, [_full_cube(schedule, 1)], mode="keleti")
    state.queue = deque([Cube(schedule, 0, "DQ", (0,))])
    for t in range(depth):
        if t + 1 > schedule.depth:
            raise BudgetError("schedule exhausted")
        active = state.queue.popleft()
        X_next = keleti_step(state.X, active, schedule)
        state.trace.append((t, active))
        state.grids.append(X_next)
        for cube in X_next.cubes():
            state.queue.append(cube)
    assert state.check_refinement()
    return state


def iterate_fp(oracle: CoverOracle, schedule: BranchingSchedule, depth: int,
               *, queue_cap: int = 10_000, C_f: float = 4.0, m: int = 1) -> ConstructionState:
    """Tuple-queue driver for the slab/wafer step.

    Dequeues one n-tuple of disjoint cubes per level and applies the
    dissection inside it; all other cubes refine untouched.  Every level's
    disjoint n-tuples join the queue up to the cap (truncation is
    reported), so only processed tuples carry avoidance guarantees.
    """
    n = oracle.n
    state = ConstructionState(schedule, [_full_cube(schedule, oracle.d)], mode="fp",
                              meta={"n": n, "m": m, "C_f": C_f, "processed": [],
                                    "hypothesis": []})
    for t in range(depth):
        k1 = t + 1
        processed = None
        while state.queue:
            cand = state.queue.popleft()
            parts = []
            empty = False
            for cube in cand:
                ratio = schedule.D(t) // schedule.D(cube.k)
                inside = state.X.coords[
                    (state.X.coords // ratio == np.asarray(cube.coords)).all(axis=1)
                ]
                if len(inside) == 0:
                    empty = True
                    break
                parts.append(GridSet(schedule, t, inside, d=oracle.d, n=1,
                                     _presorted=True))
            if not empty:
                processed = (cand, parts)
                break
        if processed is None:
            X_next = refine(state.X, k1)
            state.grids.append(X_next)
            state.reports.append(None)
        else:
            cand, parts = processed
            domain = parts[0]
            for p in parts[1:]:
                domain = domain.union(p)
            domain_children = refine(domain, k1)
            B = oracle.cover(schedule, k1, domain=domain_children)
            Ss, rep = fp_step(parts, B, schedule, C_f=C_f, m=m)
            state.meta["hypothesis"].append(rep.entry_hypothesis)
            rest = state.X.difference(domain)
            X_next = refine(rest, k1)
            for S in Ss:
                X_next = X_next.union(S)
            state.grids.append(X_next)
            state.reports.append(rep)
            state.trace.append((t, cand))
            state.meta["processed"].append((t, [c.coords for c in cand]))
        # enqueue all ordered disjoint n-tuples of the new generation
        import itertools as _it

        cubes = list(X_next.cubes())
        room = queue_cap - len(state.queue)
        added = 0
        for combo in _it.permutations(cubes, n):
            if added >= room:
                state.queue_truncated += 1
                break
            state.queue.append(combo)
            added += 1
    assert state.check_refinement()
    return state


def fp_processed_scan(state: ConstructionState, oracle: CoverOracle) -> list:
    """Re-check every processed tuple of an fp run against the oracle's cover."""
    out = []
    schedule = state.schedule
    for step, cand in state.trace:
        k1 = step + 1
        parts = []
        for cube in cand:
            ratio = schedule.D(state.k) // schedule.D(cube.k)
            inside = state.X.coords[
                (state.X.coords // ratio == np.asarray(cube.coords)).all(axis=1)
            ]
            parts.append(coarsen(GridSet(schedule, state.k, inside), k1)
                         if len(inside) else None)
        if any(p is None or len(p) == 0 for p in parts):
            out.append({"step": step, "passed": True, "note": "tuple emptied"})
            continue
        domain = parts[0]
        for p in parts[1:]:
            domain = domain.union(p)
        B = oracle.cover(schedule, k1, domain=domain)
        bad = set(map(tuple, B.coords.tolist()))
        ok = True
        import itertools as _it

        for combo in _it.product(*[p.coords.tolist() for p in parts]):
            row = tuple(c for block in combo for c in block)
            if row in bad:
                ok = False
                break
        out.append({"step": step, "passed": ok})
    return out


def dimension_report(state: ConstructionState, plan: StrongCoverPlan | None = None,
                     *, n: int | None = None, d: int | None = None,
                     s: float | None = None) -> dict:
    """Theoretical target, finite-depth Frostman exponent, and the checklist.

    The dimension target is (nd - s)/(n - 1); the trivial s = dn case short
    circuits to an empty-set target of 0.  The checklist evaluates, on the
    realized schedule, the three multi-scale construction properties:
    per-parent cell retention, the rapid-decrease diagnostic, and the
    scale-ratio comparison between branching and intermediary factors.
    """
    if plan is not None:
        n = n or plan.n
        d = d or plan.d
        s = plan.s if s is None else s
    else:
        n = n or state.meta.get("n")
        d = d or state.meta.get("d", 1)
        s = state.meta.get("s") if s is None else s
    if n is None or s is None:
        raise ValueError("need the configuration arity and dimension bound")
    out = {"n": n, "d": d, "s": s}
    if s >= d * n:
        out["target_dimension"] = 0.0
        out["trivial"] = "s = dn admits only the empty set"
        return out
    out["target_dimension"] = (n * d - s) / (n - 1)

    tree = canonical_weights(state.grids)
    est = frostman_exponent(tree)
    out["frostman_exponent"] = est.s
    out["frostman_witness"] = {"generation": est.witness_gen,
                               "coords": list(est.witness_coords),
                               "weight": str(est.witness_weight)}

    sched = state.schedule
    checklist = {}
    if state.reports and all(r is not None for r in state.reports):
        halves = []
        for rep in state.reports:
            if hasattr(rep, "kept_per_parent"):
                halves.append(rep.min_kept >= rep.cells_per_parent / 2)
        checklist["cell_retention_ok"] = all(halves) if halves else None
    diag = []
    for k in range(1, state.k):
        diag.append(math.log(sched.D(k)) / math.log(sched.N(k + 1)))
    checklist["rapid_decrease_diagnostic"] = diag  # small values = paper regime
    target_s_ratio = []
    for k in range(1, state.k + 1):
        if sched.M(k) > 1:
            target_s_ratio.append(math.log(sched.N(k)) / math.log(sched.M(k)))
    checklist["scale_ratio_log_N_over_log_M"] = target_s_ratio
    if target_s_ratio and s < d * n and out["target_dimension"] > 0:
        checklist["scale_ratio_needed_for_target"] = (
            d * (n - 1) / max(d * n - s, 1e-12)
        )
    out["construction_checklist"] = checklist
    return out


def cantor_state(depth: int, *, keep=(0, 2), N: int = 3) -> ConstructionState:
    """Classical keep-cells construction, e.g. the middle-thirds set."""
    schedule = BranchingSchedule(1, [N] * depth)
    grids = [_full_cube(schedule, 1)]
    keep = np.asarray(sorted(keep), dtype=np.int64)
    for k in range(1, depth + 1):
        prev = grids[-1].coords.ravel()
        coords = (prev[:, None] * N + keep[None, :]).reshape(-1, 1)
        grids.append(GridSet(schedule, k, coords, _presorted=True))
    return ConstructionState(schedule, grids, mode="cantor",
                             meta={"keep": keep.tolist(), "N": N})
