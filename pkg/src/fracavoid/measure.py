"""Finite mass-distribution machinery: exact weight trees over constructions.

The canonical weights split each cube's mass equally among its kept
children, giving the finite form of the construction's natural measure.
All weights are exact rationals and the parent-sum law holds identically,
so Frostman-type certificates never depend on float rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from fracavoid.dyadic import BranchingSchedule, GridSet

__all__ = [
    "WeightTree",
    "canonical_weights",
    "frostman_exponent",
    "frostman_bound_holds",
    "FrostmanEstimate",
    "uniform_mass_check",
    "MassChecklist",
    "write_weight_tree",
]


class WeightTree:
    """Per-generation cube weights with the exact parent-sum law.

    levels[k] is (coords, weights): an (n_k, dim) int64 array of fine-cube
    indices and an aligned list of Fraction weights.  Weight objects are
    shared between cubes with equal values, so storage stays proportional
    to the number of cubes plus the number of distinct values.
    """

    def __init__(self, schedule: BranchingSchedule, levels):
        self.schedule = schedule
        self.levels = levels

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def weight_of(self, k: int, coords) -> Fraction:
        coords = np.asarray(coords, dtype=np.int64).reshape(1, -1)
        lvl_coords, weights = self.levels[k]
        pos = np.searchsorted(
            lvl_coords.view([("", np.int64)] * lvl_coords.shape[1]).ravel(),
            np.ascontiguousarray(coords).view([("", np.int64)] * coords.shape[1]).ravel(),
        )
        if pos >= len(lvl_coords) or not np.array_equal(lvl_coords[int(pos)], coords[0]):
            return Fraction(0)
        return weights[int(pos)]

    def check_parent_sum(self) -> bool:
        """Exact conservation: children of every cube sum to its weight."""
        for k in range(self.depth):
            coords, weights = self.levels[k]
            child_coords, child_weights = self.levels[k + 1]
            N = self.schedule.N(k + 1)
            parents = child_coords // N
            order = np.lexsort(parents.T[::-1])
            sums = {}
            for idx in order:
                key = tuple(map(int, parents[idx]))
                sums[key] = sums.get(key, Fraction(0)) + child_weights[idx]
            for row, w in zip(coords, weights):
                if sums.get(tuple(map(int, row)), Fraction(0)) != w:
                    return False
        return True


def canonical_weights(grids: Sequence[GridSet]) -> WeightTree:
    """Equal-split weights over a refinement chain of grid sets.

    grids[k] is the generation-k kept set; every cube of grids[k+1] must
    have its parent in grids[k], and every kept cube must keep at least one
    child (otherwise the chain is malformed).
    """
    if not grids:
        raise ValueError("empty construction")
    schedule = grids[0].schedule
    root_coords = grids[0].coords
    levels = [(root_coords, [Fraction(1, len(root_coords))] * len(root_coords))]
    for k in range(len(grids) - 1):
        parent_coords, parent_weights = levels[k]
        child = grids[k + 1]
        parents = child.coords // schedule.N(child.k)
        # locate each child's parent row
        pw = parent_coords.view([("", np.int64)] * parent_coords.shape[1]).ravel()
        probe = np.ascontiguousarray(parents).view(
            [("", np.int64)] * parents.shape[1]
        ).ravel()
        pos = np.searchsorted(pw, probe)
        if len(parent_coords) == 0 or np.any(pos >= len(parent_coords)) or np.any(
            pw[np.minimum(pos, len(pw) - 1)] != probe
        ):
            raise ValueError(f"generation {child.k}: a cube's parent was not kept")
        counts = np.bincount(pos, minlength=len(parent_coords))
        if np.any(counts == 0):
            raise ValueError(
                f"generation {child.k - 1}: a kept cube has zero kept children"
            )
        memo = {}
        child_weights = []
        for p in pos:
            key = (id(parent_weights[p]), int(counts[p]))
            w = memo.get(key)
            if w is None:
                w = parent_weights[p] / int(counts[p])
                memo[key] = w
            child_weights.append(w)
        levels.append((child.coords, child_weights))
    return WeightTree(schedule, levels)


@dataclass
class FrostmanEstimate:
    s: float
    witness_gen: int
    witness_coords: tuple
    witness_weight: Fraction
    per_generation: list


def frostman_exponent(tree: WeightTree, gens: Sequence[int] | None = None) -> FrostmanEstimate:
    """Largest s with w(Q) <= l(Q)^s over all stored fine cubes (C = 1).

    Per generation the binding cube is the heaviest one; the estimate is the
    min over generations of log w / log l, with ties resolved toward the
    deepest witness.
    """
    if tree.depth < 1:
        raise ValueError("tree too shallow for an exponent")
    if gens is None:
        gens = range(1, tree.depth + 1)
    best = None
    per_gen = []
    for k in gens:
        coords, weights = tree.levels[k]
        if len(coords) == 0:
            raise ValueError(f"empty level {k}")
        idx = max(range(len(weights)), key=lambda i: weights[i])
        w = weights[idx]
        D = tree.schedule.D(k)
        s_k = (math.log(w.denominator) - math.log(w.numerator)) / math.log(D)
        per_gen.append((k, s_k))
        if best is None or s_k <= best[0]:
            best = (s_k, k, tuple(map(int, coords[idx])), w)
    return FrostmanEstimate(best[0], best[1], best[2], best[3], per_gen)


def frostman_bound_holds(tree: WeightTree, s: Fraction, C: Fraction = Fraction(1),
                         gens: Sequence[int] | None = None) -> bool:
    """Exact check of w(Q) <= C * l(Q)^s for rational s, no float rounding.

    With s = p/q the comparison w <= C / D^(p/q) becomes
    w^q * D^p <= C^q in integers.
    """
    s = Fraction(s)
    C = Fraction(C)
    if gens is None:
        gens = range(1, tree.depth + 1)
    p, q = s.numerator, s.denominator
    for k in gens:
        _, weights = tree.levels[k]
        D = tree.schedule.D(k)
        Dp = D**p
        w = max(weights)
        lhs = w.numerator**q * Dp * C.denominator**q
        rhs = C.numerator**q * w.denominator**q
        if lhs > rhs:
            return False
    return True


@dataclass
class MassChecklist:
    scale_bound: dict        # w(Q) <= C1 * l_k^s on fine cubes
    cell_occupancy: dict     # fine cubes of the kept set per intermediary cell
    cell_mass: dict          # mu(R) <= C3 * M^-d * mu(Q)
    s: float

    @property
    def passed(self) -> bool:
        return self.scale_bound["ok"] and self.cell_occupancy["ok"] and self.cell_mass["ok"]

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "scale_bound": {k: (float(v) if isinstance(v, Fraction) else v)
                            for k, v in self.scale_bound.items()},
            "cell_occupancy": self.cell_occupancy,
            "cell_mass": {k: (float(v) if isinstance(v, Fraction) else v)
                          for k, v in self.cell_mass.items()},
            "passed": self.passed,
        }


def uniform_mass_check(tree: WeightTree, schedule: BranchingSchedule, s: float,
                       c1_cap: float = 2.0) -> MassChecklist:
    """Evaluate the three uniform-mass hypotheses on a stored construction.

    (1) scale bound: w(Q) <= C1 * l_k^s over fine cubes, realized C1 reported
        and compared against c1_cap;
    (2) cell occupancy: at most O(1) kept fine cubes per intermediary cell,
        instantiated as <= 2^d (thickening adds one neighbor layer per axis);
    (3) uniform cell mass: mu(R) <= C3 * (1/M)^d * mu(Q), realized C3
        compared against 2 (half the cells carry all of a parent's mass in
        the worst admissible split).

    Intermediary bookkeeping comes from the schedule's M-sequence.
    """
    if tree.depth < 1:
        raise ValueError("need at least one refinement level")
    if schedule.Ms == schedule.Ns:
        pass  # degenerate intermediaries are allowed; occupancy is then 1
    d = tree.levels[0][0].shape[1]

    c1 = 0.0
    c1_witness = None
    for k in range(1, tree.depth + 1):
        coords, weights = tree.levels[k]
        D = schedule.D(k)
        idx = max(range(len(weights)), key=lambda i: weights[i])
        ratio = float(weights[idx]) * D**s
        if ratio > c1:
            c1, c1_witness = ratio, (k, tuple(map(int, coords[idx])))
    scale = {"constant": c1, "witness": c1_witness, "cap": c1_cap,
             "ok": c1 <= c1_cap * (1 + 1e-9)}

    occ_max, occ_witness = 0, None
    mass_max, mass_witness = Fraction(0), None
    for k in range(tree.depth):
        child_coords, child_weights = tree.levels[k + 1]
        parent_coords, parent_weights = tree.levels[k]
        N, M = schedule.N(k + 1), schedule.M(k + 1)
        cells = child_coords // (N // M)
        uniq, inverse, counts = np.unique(cells, axis=0, return_inverse=True,
                                          return_counts=True)
        i = int(np.argmax(counts))
        if counts[i] > occ_max:
            occ_max, occ_witness = int(counts[i]), (k + 1, tuple(map(int, uniq[i])))
        # cell mass against the parent's mass
        cell_mass = {}
        for row_idx, cell_idx in enumerate(inverse):
            cell_mass[cell_idx] = cell_mass.get(cell_idx, Fraction(0)) + child_weights[row_idx]
        pw = parent_coords.view([("", np.int64)] * d).ravel()
        for cell_idx, mass in cell_mass.items():
            parent = uniq[cell_idx] // M
            probe = np.ascontiguousarray(parent.reshape(1, -1)).view(
                [("", np.int64)] * d
            ).ravel()
            pos = int(np.searchsorted(pw, probe)[0])
            wq = parent_weights[pos]
            ratio = (mass * M**d) / wq
            if ratio > mass_max:
                mass_max, mass_witness = ratio, (k + 1, tuple(map(int, uniq[cell_idx])))
    occupancy = {"constant": occ_max, "witness": occ_witness, "cap": 2**d,
                 "ok": occ_max <= 2**d}
    cell_mass_entry = {"constant": mass_max, "witness": mass_witness, "cap": 2,
                       "ok": mass_max <= 2}
    return MassChecklist(scale, occupancy, cell_mass_entry, s)


def write_weight_tree(tree: WeightTree, path) -> None:
    """Text dump, one line per cube: `k coords... p/q`."""
    with open(path, "w", encoding="ascii") as fh:
        for k, (coords, weights) in enumerate(tree.levels):
            for row, w in zip(coords, weights):
                cs = " ".join(str(int(c)) for c in row)
                fh.write(f"{k} {cs} {w.numerator}/{w.denominator}\n")
