"""Single-scale discrete avoidance steps.

Each step maps (current set T at generation k, bad set B at generation k+1)
to a refined set S at generation k+1 with two certified properties: no
tuple of distinct S-cubes lies in B, and every parent keeps at least half
(1/A for the low-rank variant) of its intermediary cells with exactly one
fine cube per kept cell.

The randomized step resamples a one-cube-per-cell selection until the
strongly non-diagonal collision count is at most M^d/2, then deletes the
first-block projection of the collisions.  The expectation bound makes
failure of the resampling loop a probabilistic non-event whenever the
entry hypotheses hold; a deterministic exhaustive search over all
selections is available for tiny instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from fracavoid.configs import CoverOracle
from fracavoid.dyadic import (
    BranchingSchedule,
    BudgetError,
    Cube,
    GridSet,
    nondiagonal_filter,
    rows_member,
)

__all__ = [
    "AvoidanceError",
    "AvoidParams",
    "StepReport",
    "step_constant",
    "min_branching",
    "random_select",
    "collision_set",
    "avoid_step",
    "keleti_step",
    "fp_step",
    "FPReport",
    "Poly",
    "mathe_step",
    "MatheReport",
    "lowrank_step",
    "LowRankReport",
]


class AvoidanceError(RuntimeError):
    """A step hypothesis failed or a search was exhausted; message says which."""


def _next_pow2(x: float) -> int:
    n = 1
    while n < x - 1e-12:
        n <<= 1
    return n


def step_constant(s: float, d: int, n: int) -> int:
    """C(s,d,n): the smallest constant the deletion argument needs.

    Two inequalities are used: C >= 4d (cells outnumber choices) and
    C >= 4^(1/(dn-s)) (expectation at most half the cells); we take the
    power-of-two-rounded max of both.
    """
    if not (0 <= s < d * n):
        raise ValueError(f"s = {s} outside [0, dn)")
    return max(4 * d, _next_pow2(4.0 ** (1.0 / (d * n - s))))


@dataclass(frozen=True)
class AvoidParams:
    """Parameters of the randomized avoidance step."""

    s: float
    eps: float
    d: int = 1
    n: int = 2
    C: int | None = None
    retries: int = 64
    seed: int | None = None
    exhaustive: bool = False

    def __post_init__(self):
        slack_cap = (self.d * self.n - self.s) / 2
        if not (0 <= self.eps < slack_cap):
            raise AvoidanceError(
                f"eps = {self.eps} outside [0, (dn-s)/2) = [0, {slack_cap})"
            )
        if self.C is None:
            object.__setattr__(self, "C", step_constant(self.s, self.d, self.n))

    @property
    def dim(self) -> int:
        return self.d * self.n


@dataclass
class StepReport:
    """Bookkeeping of one accepted avoidance step."""

    trials: int
    collision_count: int
    deleted: int
    kept_per_parent: dict
    cells_per_parent: int
    hypothesis: dict = field(default_factory=dict)

    @property
    def min_kept(self) -> int:
        return min(self.kept_per_parent.values()) if self.kept_per_parent else 0


def min_branching(params: AvoidParams, M: int) -> int:
    """Smallest power-of-two branching factor admissible for divisor M."""
    if M < 1 or M & (M - 1):
        raise AvoidanceError(f"M = {M} is not a power of two")
    denom = params.dim - params.s - params.eps
    if denom <= 0:
        raise AvoidanceError(f"dn - s - eps = {denom} <= 0")
    expo = params.d * (params.n - 1) / denom
    return _next_pow2(params.C * M**expo)


def _cells_of(T: GridSet, M: int) -> np.ndarray:
    """All intermediary cells inside T, in canonical order: (n_cells, d)."""
    d = T.dim
    base = T.coords * M
    axes = [np.arange(M, dtype=np.int64)] * d
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    return (base[:, None, :] + mesh[None, :, :]).reshape(-1, d)


def random_select(T: GridSet, schedule: BranchingSchedule, seed) -> GridSet:
    """One uniform independent fine cube per intermediary cell of T."""
    k1 = T.k + 1
    if k1 > schedule.depth:
        raise BudgetError(f"schedule exhausted at generation {k1}")
    N, M = schedule.N(k1), schedule.M(k1)
    ratio = N // M
    cells = _cells_of(T, M)
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.integers(0, ratio, size=cells.shape, dtype=np.int64)
    coords = cells * ratio + draws
    # cell blocks of distinct cubes interleave lexicographically when d > 1,
    # so only the one-dimensional case arrives presorted
    return GridSet(schedule, k1, coords, kind="DQ", d=T.dim, n=1,
                   _presorted=(T.dim == 1))


def _selection_to_grid(T, schedule, cells, ratio, draws):
    coords = cells * ratio + draws
    return GridSet(schedule, T.k + 1, coords, kind="DQ", d=T.dim, n=1,
                   _presorted=(T.dim == 1))


def collision_set(A: GridSet, B: GridSet, n: int) -> GridSet:
    """Strongly non-diagonal B-cubes all of whose blocks lie in A."""
    d = A.dim
    if B.dim != d * n:
        raise ValueError(f"B lives in R^{B.dim}, expected d*n = {d * n}")
    nd = nondiagonal_filter(B, n, d)
    if len(nd) == 0 or len(A) == 0:
        return GridSet(B.schedule, B.k, np.zeros((0, d * n), dtype=np.int64), d=d, n=n)
    blocks = nd.coords.reshape(len(nd), n, d)
    keep = np.ones(len(nd), dtype=bool)
    for i in range(n):
        keep &= rows_member(np.ascontiguousarray(blocks[:, i, :]), A.coords)
    return GridSet(B.schedule, B.k, nd.coords[keep], d=d, n=n, _presorted=True)


def _bad_restricted(B, schedule, k1, A, n):
    """Collision set of a selection against an explicit grid or an oracle."""
    if isinstance(B, CoverOracle):
        emitted = B.cover(schedule, k1, domain=A)
        return collision_set(A, emitted, n)
    return collision_set(A, B, n)


def _check_entry(T, B, params, schedule, k1):
    N, M = schedule.N(k1), schedule.M(k1)
    if N & (N - 1) or M & (M - 1):
        raise AvoidanceError(f"N_{k1} = {N}, M_{k1} = {M}: powers of two required")
    hyp = {}
    need = min_branching(params, M)
    hyp["branching_bound"] = {"required": need, "actual": N, "ok": N >= need}
    if not N >= need:
        raise AvoidanceError(
            f"N_{k1} = {N} < C*M^(d(n-1)/(dn-s-eps)) = {need}"
        )
    bound = N ** (params.s + params.eps)
    if isinstance(B, GridSet):
        count = len(B)
        hyp["sparsity"] = {"count": count, "bound": bound, "ok": count <= bound + 1e-9}
        if count > bound + 1e-9:
            raise AvoidanceError(f"#B = {count} > N^(s+eps) = {bound:.6g}")
    else:
        cb = B.count_bound(schedule, k1)
        if cb is None:
            hyp["sparsity"] = {"count": None, "bound": bound, "ok": None,
                               "note": "oracle count unavailable; checked per trial"}
        else:
            hyp["sparsity"] = {"count": cb, "bound": bound, "ok": cb <= bound + 1e-9}
    return hyp


def _finish_selection(T, A, K, schedule, k1, trials, hyp):
    N, M = schedule.N(k1), schedule.M(k1)
    d = T.dim
    if len(K):
        first_blocks = np.ascontiguousarray(K.coords[:, :d])
        S = A.difference(GridSet(schedule, k1, first_blocks, d=d, n=1))
        deleted = len(A) - len(S)
    else:
        S = A
        deleted = 0
    parents = S.coords // N
    uniq, counts = np.unique(parents, axis=0, return_counts=True)
    kept = {tuple(map(int, row)): int(c) for row, c in zip(uniq, counts)}
    cells = M**d
    for row in T.coords:
        kept.setdefault(tuple(map(int, row)), 0)
    report = StepReport(
        trials=trials,
        collision_count=len(K),
        deleted=deleted,
        kept_per_parent=kept,
        cells_per_parent=cells,
        hypothesis=hyp,
    )
    if report.min_kept < cells / 2:
        raise AvoidanceError(
            f"a parent kept {report.min_kept} < {cells}/2 cells; "
            "collision bound did not protect the cell count"
        )
    return S, report


def avoid_step(T: GridSet, B, params: AvoidParams, schedule: BranchingSchedule):
    """Randomized one-scale refinement of T avoiding the bad set B.

    B may be an explicit generation-(k+1) grid set in R^(dn) or a
    CoverOracle queried with the trial selection as domain.  Returns
    (S, StepReport).
    """
    if len(T) == 0:
        raise AvoidanceError("T is empty")
    k1 = T.k + 1
    hyp = _check_entry(T, B, params, schedule, k1)
    N, M = schedule.N(k1), schedule.M(k1)
    d = T.dim
    half = (M**d) / 2
    if params.exhaustive:
        return _avoid_step_exhaustive(T, B, params, schedule, k1, hyp, half)
    if params.seed is None:
        raise AvoidanceError("randomized step needs a seed")
    base = (params.seed if isinstance(params.seed, np.random.SeedSequence)
            else np.random.SeedSequence(params.seed))
    seeds = base.spawn(params.retries)
    for t, ss in enumerate(seeds, start=1):
        A = random_select(T, schedule, ss)
        K = _bad_restricted(B, schedule, k1, A, params.n)
        if len(K) <= half:
            return _finish_selection(T, A, K, schedule, k1, t, hyp)
    raise AvoidanceError(
        f"no selection with at most M^d/2 = {half} collisions in "
        f"{params.retries} trials; entry hypotheses likely violated"
    )


def _avoid_step_exhaustive(T, B, params, schedule, k1, hyp, half):
    N, M = schedule.N(k1), schedule.M(k1)
    d = T.dim
    ratio = N // M
    cells = _cells_of(T, M)
    n_slots = len(cells) * d
    total = ratio**n_slots
    if total > 1_000_000:
        raise AvoidanceError(
            f"exhaustive search over {total} selections is infeasible"
        )
    for combo in itertools.product(range(ratio), repeat=n_slots):
        draws = np.asarray(combo, dtype=np.int64).reshape(len(cells), d)
        A = _selection_to_grid(T, schedule, cells, ratio, draws)
        K = _bad_restricted(B, schedule, k1, A, params.n)
        if len(K) <= half:
            return _finish_selection(T, A, K, schedule, k1, 1, hyp)
    raise AvoidanceError("no admissible selection exists (exhaustive search)")


# ---------------------------------------------------------------------------
# Keleti's residue rule


def keleti_step(X: GridSet, active: Cube, schedule: BranchingSchedule) -> GridSet:
    """One interval-dissection step of the translate-avoiding queue algorithm.

    Children J_1..J_N of every interval of X are labeled 1-indexed by
    position; intervals inside the active interval keep positions 0 mod 10,
    all others keep positions 5 mod 10.
    """
    if X.dim != 1:
        raise ValueError("interval dissection is one-dimensional")
    k1 = X.k + 1
    N = schedule.N(k1)
    if N % 10:
        raise AvoidanceError(f"N_{k1} = {N} is not a multiple of 10")
    inside_res = 10 - 1  # position 10, 20, ... -> zero-based offsets 9, 19, ...
    outside_res = 5 - 1
    ratio = schedule.D(X.k) // schedule.D(active.k)
    inside = (X.coords.ravel() // ratio) == active.coords[0]
    offs_in = np.arange(inside_res, N, 10, dtype=np.int64)
    offs_out = np.arange(outside_res, N, 10, dtype=np.int64)
    rows = []
    base = X.coords.ravel() * N
    for b, is_in in zip(base, inside):
        offs = offs_in if is_in else offs_out
        rows.append(b + offs)
    coords = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    out = GridSet(schedule, k1, coords.reshape(-1, 1), d=1, n=1, _presorted=True)
    assert len(out) == (N // 10) * len(X)
    return out


# ---------------------------------------------------------------------------
# Fraser-Pramanik slab/wafer reduction


@dataclass
class FPReport:
    bad_counts: list
    growth_bounds: list
    growth_ok: list
    kept_per_parent: list
    entry_hypothesis: dict
    final_feasibility: dict


def _fp_reduce(T: GridSet, B_cur: np.ndarray, rest_dim: int, schedule, k1):
    """One wafer reduction: select S in T, shrink the bad set to its tail blocks."""
    N, M = schedule.N(k1), schedule.M(k1)
    d = T.dim
    total = len(B_cur)
    thr = 2.0 * total / N**d
    first = np.ascontiguousarray(B_cur[:, :d])
    # per fine-cube wafer counts over the children of T
    uniq, counts = (np.unique(first, axis=0, return_counts=True)
                    if total else (np.zeros((0, d), dtype=np.int64), np.zeros(0, dtype=int)))
    ratio = N // M
    sel_rows = []
    kept = {}
    for prow in T.coords:
        parent_kept = 0
        cell_base = prow * M
        for cell_off in itertools.product(range(M), repeat=d):
            cell = cell_base + np.asarray(cell_off, dtype=np.int64)
            fine_base = cell * ratio
            good_cube = None
            for fine_off in itertools.product(range(ratio), repeat=d):
                cube = fine_base + np.asarray(fine_off, dtype=np.int64)
                cnt = 0
                if total:
                    pos = np.searchsorted(
                        uniq.view([("", np.int64)] * d).ravel(),
                        np.ascontiguousarray(cube).view([("", np.int64)] * d).ravel(),
                    )
                    if pos < len(uniq) and np.array_equal(uniq[pos], cube):
                        cnt = counts[pos]
                if cnt <= thr:
                    good_cube = cube
                    break
            if good_cube is not None:
                sel_rows.append(good_cube)
                parent_kept += 1
        if parent_kept < M**d / 2:
            raise AvoidanceError(
                f"reduction kept {parent_kept} < half the cells of {tuple(prow)}"
            )
        kept[tuple(map(int, prow))] = parent_kept
    S = GridSet(schedule, k1, np.asarray(sel_rows, dtype=np.int64).reshape(-1, d),
                d=d, n=1)
    if total:
        in_S = rows_member(first, S.coords)
        B_next = np.unique(B_cur[in_S][:, d:], axis=0) if in_S.any() else \
            np.zeros((0, rest_dim), dtype=np.int64)
    else:
        B_next = np.zeros((0, rest_dim), dtype=np.int64)
    return S, B_next, kept


def fp_step(Ts: Sequence[GridSet], B: GridSet, schedule: BranchingSchedule,
            C_f: float, m: int):
    """Slab/wafer dissection for n disjoint families against a zero-set cover.

    Applies the dimension-lowering reduction n-1 times, then clears the last
    family cell by cell.  Records the bad-set growth against the per-step
    bound 2 * D_k^d * (M/N)^d and the entry branching hypothesis with the
    caller's cover constant C_f for codimension m.
    """
    n = len(Ts)
    d = Ts[0].dim
    k = Ts[0].k
    k1 = k + 1
    for i in range(n):
        for j in range(i + 1, n):
            if len(Ts[i].intersection(Ts[j])):
                raise AvoidanceError(f"T_{i+1} and T_{j+1} are not disjoint")
    N, M = schedule.N(k1), schedule.M(k1)
    Dk = schedule.D(k)
    required = (C_f * 2**n * Dk ** (2 * d * n)) ** (1.0 / m) * M ** (d * (n - 1) / m)
    entry = {"required": required, "actual": N, "ok": N >= required - 1e-9}

    B_cur = B.coords
    bad_counts = [len(B_cur)]
    growth_bounds, growth_ok, kept_all = [], [], []
    Ss = []
    for j in range(n - 1):
        rest_dim = d * (n - 1 - j)
        S, B_next, kept = _fp_reduce(Ts[j], B_cur, rest_dim, schedule, k1)
        bound = 2 * Dk**d * (M / N) ** d * len(B_cur)
        growth_bounds.append(bound)
        growth_ok.append(len(B_next) <= bound + 1e-9)
        bad_counts.append(len(B_next))
        kept_all.append(kept)
        Ss.append(S)
        B_cur = B_next

    # final family: pick a bad-free cube in every cell with few bad cubes
    T_last = Ts[-1]
    total = len(B_cur)
    thr = 2.0 * total / M**d
    feasible = thr < (N // M) ** d
    final = {"bad_count": total, "cell_threshold": thr,
             "cube_choices": (N // M) ** d, "ok": feasible}
    if not feasible:
        raise AvoidanceError(
            f"final family infeasible: threshold {thr} >= (N/M)^d = {(N // M) ** d}"
        )
    B_grid = GridSet(schedule, k1, B_cur, d=d, n=1)
    ratio = N // M
    sel_rows = []
    kept = {}
    for prow in T_last.coords:
        parent_kept = 0
        for cell_off in itertools.product(range(M), repeat=d):
            cell = prow * M + np.asarray(cell_off, dtype=np.int64)
            fine_base = cell * ratio
            cell_cubes = fine_base[None, :] + np.stack(
                np.meshgrid(*[np.arange(ratio)] * d, indexing="ij"), axis=-1
            ).reshape(-1, d)
            bad_here = B_grid.member(cell_cubes)
            if bad_here.sum() > thr:
                continue  # bad cell, dropped
            free = cell_cubes[~bad_here]
            if len(free) == 0:
                raise AvoidanceError("good cell with no bad-free cube")
            sel_rows.append(free[0])
            parent_kept += 1
        kept[tuple(map(int, prow))] = parent_kept
        if parent_kept < M**d / 2:
            raise AvoidanceError(
                f"parent {tuple(prow)} kept {parent_kept} < half its cells"
            )
    Ss.append(GridSet(schedule, k1, np.asarray(sel_rows, dtype=np.int64).reshape(-1, d),
                      d=d, n=1))
    kept_all.append(kept)
    report = FPReport(bad_counts, growth_bounds, growth_ok, kept_all, entry, final)
    return Ss, report


# ---------------------------------------------------------------------------
# Mathe's lattice-shift step for polynomials


class Poly:
    """Polynomial over Q in several variables: {exponent tuple: Fraction}."""

    def __init__(self, nvars: int, coeffs: dict):
        self.nvars = nvars
        self.coeffs = {tuple(e): Fraction(c) for e, c in coeffs.items() if Fraction(c)}

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.coeffs), default=0)

    def __call__(self, point: Sequence[Fraction]) -> Fraction:
        out = Fraction(0)
        for expo, c in self.coeffs.items():
            term = c
            for x, e in zip(point, expo):
                term *= Fraction(x) ** e
            out += term
        return out

    def partial(self, var: int) -> "Poly":
        out = {}
        for expo, c in self.coeffs.items():
            if expo[var] == 0:
                continue
            new = list(expo)
            new[var] -= 1
            out[tuple(new)] = out.get(tuple(new), Fraction(0)) + c * expo[var]
        return Poly(self.nvars, out)

    def scale_to_integer(self) -> "Poly":
        denom = 1
        for c in self.coeffs.values():
            denom = denom * c.denominator // math.gcd(denom, c.denominator)
        return Poly(self.nvars, {e: c * denom for e, c in self.coeffs.items()})


@dataclass
class MatheReport:
    delta: Fraction
    eps: Fraction
    window: tuple
    min_distance: Fraction
    required_distance: Fraction
    hypothesis: dict


def _corner_points(grids: Sequence[GridSet], schedule, budget=200_000):
    """All corner combinations of the product of cube families, as Fractions."""
    total = 1
    for g in grids:
        total *= max(len(g), 1) * 2 ** g.dim
    if total > budget:
        raise BudgetError(f"corner certification over {total} points is infeasible")
    per_factor = []
    for g in grids:
        D = g.denominator
        pts = []
        for row in g.coords.tolist():
            for off in itertools.product((0, 1), repeat=g.dim):
                pts.append(tuple(Fraction(c + o, D) for c, o in zip(row, off)))
        per_factor.append(pts)
    return itertools.product(*per_factor)


def mathe_step(Ts: Sequence[GridSet], f: Poly, c0, C0,
               schedule: BranchingSchedule, eps=None, C_f: float = 1.0):
    """Startpoint-lattice refinement keeping f away from zero.

    Startpoint sublattices land f-values in r^m * Z; the first family is
    shifted along the first axis by a lattice multiple delta chosen inside
    [(eps/c0) r^m, ((1-eps)/C0) r^m], which pushes every value a definite
    distance from r^m * Z.  The output is certified by exact evaluation of
    f on all corner combinations of the product.
    """
    n = len(Ts)
    d = Ts[0].dim
    k = Ts[0].k
    k1 = k + 1
    if f.nvars != d * n:
        raise ValueError(f"f has {f.nvars} variables, expected d*n = {d * n}")
    f_int = f.scale_to_integer()
    m = f_int.degree
    c0, C0 = Fraction(c0), Fraction(C0)

    # sign-definiteness of the first partial, sampled on corner points
    df = f_int.partial(0)
    vals = [df(tuple(x for block in pt for x in block))
            for pt in _corner_points(Ts, schedule)]
    if not vals:
        raise AvoidanceError("empty input families")
    if min(vals) <= 0 < max(vals) or any(v == 0 for v in vals):
        raise AvoidanceError("first partial derivative changes sign or vanishes")
    lo_abs, hi_abs = min(abs(v) for v in vals), max(abs(v) for v in vals)
    if lo_abs < c0 or hi_abs > C0:
        raise AvoidanceError(
            f"sampled |df/dx1| range [{lo_abs}, {hi_abs}] violates [{c0}, {C0}]"
        )

    if eps is None:
        eps = c0 / (2 * (c0 + C0))  # midpoint of the feasible interval
    eps = Fraction(eps)
    if not eps / c0 < (1 - eps) / C0:
        raise AvoidanceError(f"eps = {eps}: no window, eps/c0 >= (1-eps)/C0")

    N, M = schedule.N(k1), schedule.M(k1)
    Dk = schedule.D(k)
    hyp = {
        "required": C_f * Dk ** (m - 1) * M**m,
        "actual": N,
    }
    hyp["ok"] = N >= hyp["required"] - 1e-9

    r = schedule.r(k1)
    l = schedule.l(k1)
    lo = (eps / c0) * r**m
    hi = ((1 - eps) / C0) * r**m
    if l > hi - lo:
        raise AvoidanceError(
            f"delta window [{lo}, {hi}] narrower than the lattice step {l}"
        )
    delta_steps = -((-lo * schedule.D(k1)) // 1)  # ceil(lo / l)
    delta = Fraction(int(delta_steps), schedule.D(k1))
    if delta > hi:
        raise AvoidanceError("no lattice multiple inside the delta window")
    if delta + l > r:
        raise AvoidanceError("shifted cube leaves its intermediary cell")

    ratio = N // M
    Ss = []
    for i, T in enumerate(Ts):
        cells = _cells_of(T, M)
        coords = cells * ratio
        if i == 0:
            coords = coords.copy()
            coords[:, 0] += int(delta * schedule.D(k1))
        Ss.append(GridSet(schedule, k1, coords, d=d, n=1, _presorted=(d == 1)))

    # exact certification on all corner combinations
    rm = r**m
    need = (eps / 2) * rm
    min_dist = None
    for pt in _corner_points(Ss, schedule):
        val = f_int(tuple(x for block in pt for x in block))
        frac = val / rm
        dist = abs(frac - round(frac)) * rm
        if min_dist is None or dist < min_dist:
            min_dist = dist
    if min_dist < need:
        raise AvoidanceError(
            f"certified distance {min_dist} below (eps/2) r^m = {need}"
        )
    report = MatheReport(delta, eps, (lo, hi), min_dist, need, hyp)
    return Ss, report


# ---------------------------------------------------------------------------
# Low-rank offset search


@dataclass
class LowRankReport:
    offset: tuple
    lattice_constant: int
    kept_per_parent: list
    min_keep_rate: float
    hypothesis: dict
    min_distance: float
    threshold: float


def _pivot_columns(Mmat) -> list[int]:
    m = len(Mmat)
    n = len(Mmat[0])
    pivots = []
    for j in range(m):
        unit = [Fraction(1) if i == j else Fraction(0) for i in range(m)]
        for col in range(n):
            if col in pivots:
                continue
            if [Mmat[i][col] for i in range(m)] == unit:
                pivots.append(col)
                break
        else:
            raise AvoidanceError(
                f"no column equals e_{j+1}; pre-normalize M(e_i_j) = e_j first"
            )
    return pivots


def lowrank_step(Ts: Sequence[GridSet], Mmat, B: GridSet, s: float, eps: float,
                 schedule: BranchingSchedule, C_M: float = 1.0):
    """Offset-lattice refinement avoiding a low-dimensional image set.

    Mmat is an m x n full-rank rational matrix in normalized coordinates
    (M(e_{i_j}) = e_j for the pivot columns).  The startpoints of the
    refined families land the image M(S_1 x ... x S_n) on a shifted lattice;
    a pigeonhole search over offsets finds one whose lattice clears B.
    """
    n = len(Ts)
    if any(T.dim != 1 for T in Ts):
        raise AvoidanceError("the low-rank step is one-dimensional")
    k = Ts[0].k
    k1 = k + 1
    Mmat = [[Fraction(x) for x in row] for row in Mmat]
    m = len(Mmat)
    if B.dim != m:
        raise ValueError(f"B lives in R^{B.dim}, expected m = {m}")
    pivots = _pivot_columns(Mmat)
    col_mult = {}
    A_M = 1
    for col in range(n):
        if col in pivots:
            continue
        q = 1
        for i in range(m):
            q *= Mmat[i][col].denominator
        col_mult[col] = q
        A_M *= q
    N, Mk = schedule.N(k1), schedule.M(k1)
    if N % A_M:
        raise AvoidanceError(f"A(M) = {A_M} does not divide N = {N}")
    denom = m - (s + eps)
    if denom <= 0:
        raise AvoidanceError(f"m - (s+eps) = {denom} <= 0")
    required = C_M * Mk ** (m / denom)
    hyp = {"required": required, "actual": N, "ok": N > required - 1e-9}

    ratio = N // Mk
    D1 = schedule.D(k1)
    R1 = schedule.R(k1)
    opnorm = float(np.linalg.norm(np.asarray([[float(x) for x in row] for row in Mmat], dtype=float), 2))
    threshold = 2.0 / (math.sqrt(1.0) * opnorm * D1)

    # startpoint candidates per family as exact fractions of D1
    def family_numerators(col, X):
        T = Ts[col]
        cells = _cells_of(T, Mk).ravel()
        if col in pivots:
            j = pivots.index(col)
            return cells * ratio + X[j]
        q = col_mult[col]
        keep = cells % q == 0
        return cells[keep] * ratio

    bad_boxes = B.coords
    Dk1 = B.denominator

    def lattice_clear(X):
        nums = [family_numerators(col, X) for col in range(n)]
        if any(len(v) == 0 for v in nums):
            raise AvoidanceError("a family has no admissible cells")
        total = 1
        for v in nums:
            total *= len(v)
        if total > 2_000_000:
            raise BudgetError(f"image lattice with {total} points is infeasible")
        mesh = np.indices([len(v) for v in nums]).reshape(n, -1)
        pts = np.stack([nums[i][mesh[i]] for i in range(n)], axis=0).astype(float) / D1
        Mf = np.asarray([[float(x) for x in row] for row in Mmat])
        img = Mf @ pts  # (m, count)
        if len(bad_boxes) == 0:
            return math.inf
        lo = bad_boxes.T.astype(float)[:, :, None] / Dk1
        hi = (bad_boxes.T.astype(float) + 1.0)[:, :, None] / Dk1
        gap = np.maximum(lo - img[:, None, :], img[:, None, :] - hi)
        gap = np.maximum(gap, 0.0)
        dists = np.sqrt((gap**2).sum(axis=0))
        return float(dists.min())

    chosen = None
    min_dist = None
    tried = 0
    for X in itertools.product(range(ratio), repeat=m):
        tried += 1
        dist = lattice_clear(X)
        if dist > threshold:
            chosen, min_dist = X, dist
            break
    if chosen is None:
        raise AvoidanceError(
            f"no offset among {tried} candidates keeps the image lattice "
            f"at distance > {threshold:.3g} from B"
        )

    Ss = []
    kept_all = []
    min_rate = 1.0
    for col in range(n):
        nums = family_numerators(col, chosen)
        S = GridSet(schedule, k1, nums.reshape(-1, 1), d=1, n=1)
        Ss.append(S)
        kept = {}
        parents = S.coords.ravel() // N
        uniq, counts = np.unique(parents, return_counts=True)
        for u, c in zip(uniq, counts):
            kept[(int(u),)] = int(c)
        for row in Ts[col].coords:
            kept.setdefault((int(row[0]),), 0)
        kept_all.append(kept)
        rate = min(kept.values()) / Mk
        min_rate = min(min_rate, rate)
        if rate < 1.0 / A_M - 1e-12:
            raise AvoidanceError(
                f"family {col+1} keep rate {rate} below 1/A(M) = {1/A_M}"
            )
    report = LowRankReport(chosen, A_M, kept_all, min_rate, hyp,
                           min_dist, threshold)
    return Ss, report
