"""Configuration library: per-scale discretized covers of pattern sets.

Every configuration is presented the same way: an oracle that, for a
generation k, emits a grid set in R^(d*n) containing the configuration at
scale l_k, together with a declared dimension bound s.  Covers may
over-cover (avoidance only needs supersets) but never under-cover.

Oracles can emit either the full cover (feasible only while the grid is
small) or the cover restricted to tuples drawn from a given domain set;
restriction is exact, so every avoidance guarantee against the restricted
cover is a guarantee against the full cover for sets inside the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from fracavoid.dyadic import BranchingSchedule, BudgetError, GridSet, thicken

__all__ = [
    "CoverOracle",
    "CurveSpec",
    "load_curve",
    "explicit_cover",
    "zero_set_cover",
    "isosceles_cover",
    "IsoscelesOracle",
    "point_cover",
    "sumset_cover",
    "translate_config",
    "diagonal_band_cover",
]

FULL_COVER_BUDGET = 20_000_000


class CoverOracle:
    """Uniform presentation of a configuration piece as per-scale cube covers.

    Attributes
    ----------
    n : tuple arity of the configuration.
    d : point dimension.
    s : declared lower-Minkowski dimension bound, in [0, d*n).
    tag : identity tag used for strong-cover interleaving.
    """

    n: int = 1
    d: int = 1
    s: float = 0.0
    tag: str = "oracle"

    def cover(self, schedule: BranchingSchedule, k: int, domain: GridSet | None = None) -> GridSet:
        """Grid set in R^(d*n) covering the configuration at scale l_k.

        With `domain` (a generation-k set in R^d), only tuples all of whose
        blocks lie in the domain are emitted.
        """
        raise NotImplementedError

    def count_bound(self, schedule: BranchingSchedule, k: int) -> int | None:
        """Upper bound on the full cover size at generation k, if known."""
        return None

    def sample_points(self, rng: np.random.Generator, count: int) -> np.ndarray | None:
        """Points of the configuration in [0,1]^(d*n), for containment tests."""
        return None

    def _empty(self, schedule: BranchingSchedule, k: int) -> GridSet:
        return GridSet(schedule, k, np.zeros((0, self.d * self.n), dtype=np.int64),
                       d=self.d, n=self.n)

    def _restrict_rows(self, schedule, k, rows) -> GridSet:
        return GridSet(schedule, k, rows, d=self.d, n=self.n)


def _domain_values(domain: GridSet) -> np.ndarray:
    if domain.dim != domain.d * domain.n:
        raise ValueError("bad domain")
    return domain.coords


class _ExplicitCover(CoverOracle):
    def __init__(self, covers_by_gen, n, d, s, tag="explicit"):
        self.covers_by_gen = {int(k): np.asarray(v, dtype=np.int64).reshape(-1, d * n)
                              for k, v in covers_by_gen.items()}
        self.n = n
        self.d = d
        self.s = s
        self.tag = tag

    def cover(self, schedule, k, domain=None):
        rows = self.covers_by_gen.get(k)
        if rows is None:
            return self._empty(schedule, k)
        grid = self._restrict_rows(schedule, k, rows)
        if domain is not None and len(grid):
            blocks = grid.coords.reshape(len(grid), self.n, self.d)
            keep = np.ones(len(grid), dtype=bool)
            for i in range(self.n):
                keep &= domain.member(blocks[:, i, :])
            grid = self._restrict_rows(schedule, k, grid.coords[keep])
        return grid

    def count_bound(self, schedule, k):
        rows = self.covers_by_gen.get(k)
        return 0 if rows is None else len(rows)


def explicit_cover(covers_by_gen: dict, *, n: int = 1, d: int = 1, s: float = 0.0,
                   tag: str = "explicit") -> CoverOracle:
    """Oracle replaying explicitly given per-generation cube lists."""
    return _ExplicitCover(covers_by_gen, n, d, s, tag)


class _ZeroSetCover(CoverOracle):
    """Cover of {g = 0} by corner sampling plus the Lipschitz radius.

    A cube is emitted when min over its corners of |g| <= L*sqrt(dim)*l_k,
    which is a superset of the cubes meeting the zero set.
    """

    def __init__(self, g, lipschitz, n, d, m, tag="zeroset", count_fn=None,
                 point_fn=None):
        if lipschitz is None:
            raise ValueError("zero-set covers need a Lipschitz bound")
        self.g = g
        self.lipschitz = float(lipschitz)
        self.n = n
        self.d = d
        self.m = m
        self.s = d * n - m
        self.tag = tag
        self.count_fn = count_fn
        self.point_fn = point_fn

    def count_bound(self, schedule, k):
        return None if self.count_fn is None else self.count_fn(schedule, k)

    def _threshold(self, schedule, k) -> float:
        dim = self.d * self.n
        return self.lipschitz * math.sqrt(dim) / schedule.D(k)

    def _gvals(self, pts: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.g(pts), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        return np.linalg.norm(vals, axis=-1)

    def cover(self, schedule, k, domain=None):
        dim = self.d * self.n
        D = schedule.D(k)
        thr = self._threshold(schedule, k)
        if domain is None:
            if (D + 1) ** dim > FULL_COVER_BUDGET:
                raise BudgetError(f"full zero-set cover infeasible at D={D}^{dim}")
            axes = [np.arange(D + 1) / D] * dim
            corner_vals = self._gvals(
                np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
            ).reshape(*[D + 1] * dim)
            # min over the 2^dim corners of each cube via sliding minimum
            cube_min = corner_vals
            for ax in range(dim):
                lo = np.take(cube_min, np.arange(D), axis=ax)
                hi = np.take(cube_min, np.arange(1, D + 1), axis=ax)
                cube_min = np.minimum(lo, hi)
            idx = np.argwhere(cube_min <= thr)
            return self._restrict_rows(schedule, k, idx)
        vals = _domain_values(domain)
        if len(vals) ** self.n > FULL_COVER_BUDGET:
            raise BudgetError("restricted zero-set cover too large")
        sizes = [len(vals)] * self.n
        mesh = np.indices(sizes).reshape(self.n, -1)
        tuples = np.hstack([vals[mesh[i]] for i in range(self.n)])
        # min over corners of each candidate cube
        best = None
        for mask in range(2 ** dim):
            offs = np.array([(mask >> b) & 1 for b in range(dim)], dtype=np.int64)
            pts = (tuples + offs) / D
            cur = self._gvals(pts)
            best = cur if best is None else np.minimum(best, cur)
        keep = best <= thr
        return self._restrict_rows(schedule, k, tuples[keep])

    def sample_points(self, rng, count):
        return None if self.point_fn is None else self.point_fn(rng, count)


def zero_set_cover(g: Callable, lipschitz: float, n: int, d: int, m: int,
                   tag: str = "zeroset", count_fn=None, point_fn=None) -> CoverOracle:
    """Oracle covering the zero set of a Lipschitz g: [0,1]^(dn) -> R^m.

    count_fn, when supplied, gives an analytic bound on the full cover size
    so planners need not materialize large grids.
    """
    return _ZeroSetCover(g, lipschitz, n, d, m, tag=tag, count_fn=count_fn,
                         point_fn=point_fn)


def diagonal_band_cover(d: int = 1, tag: str = "diag") -> CoverOracle:
    """Cover of the diagonal {x = y}, the canonical s = d band example."""
    # corner threshold 2 l_k keeps index offsets |a-b| <= 3, i.e. 7 diagonals
    def _diag_points(rng, count):
        x = rng.uniform(0, 1, size=(count, d))
        return np.hstack([x, x])

    return zero_set_cover(
        lambda p: p[:, :d] - p[:, d:], math.sqrt(2.0), n=2, d=d, m=d, tag=tag,
        count_fn=lambda schedule, k: (7 * schedule.D(k) - 12) ** d,
        point_fn=_diag_points,
    )


@dataclass(frozen=True)
class CurveSpec:
    """Piecewise-linear curve t -> f(t) in R^(codim) with Lipschitz bound < 1.

    The Lipschitz constant of the interpolant is the max segment slope; the
    declared bound must dominate it.
    """

    ts: tuple
    values: tuple  # tuple of rows, each a tuple of codim floats
    lipschitz: float

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if len(ts) < 2 or np.any(np.diff(ts) <= 0):
            raise ValueError("curve samples need strictly increasing parameters")
        slopes = np.linalg.norm(np.diff(vals, axis=0), axis=1) / np.diff(ts)
        if slopes.size and slopes.max() > self.lipschitz + 1e-12:
            raise ValueError(
                f"empirical Lipschitz quotient {slopes.max():.6g} exceeds bound {self.lipschitz}"
            )

    @property
    def codim(self) -> int:
        return len(self.values[0])

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        ts = np.asarray(self.ts, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        out = np.empty(t.shape + (self.codim,), dtype=float)
        for j in range(self.codim):
            out[..., j] = np.interp(t, ts, vals[:, j])
        return out

    def segments(self):
        """(t0, t1, intercept, slope) per linear piece, vector valued."""
        ts = np.asarray(self.ts, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        segs = []
        for i in range(len(ts) - 1):
            t0, t1 = ts[i], ts[i + 1]
            beta = (vals[i + 1] - vals[i]) / (t1 - t0)
            alpha = vals[i] - beta * t0
            segs.append((t0, t1, alpha, beta))
        return segs


def load_curve(path, lipschitz: float | None = None) -> CurveSpec:
    """Curve from a text file with rows `t f1 [f2 ...]`."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                rows.append([float(tok) for tok in line.split()])
    ts = tuple(r[0] for r in rows)
    values = tuple(tuple(r[1:]) for r in rows)
    if lipschitz is None:
        tarr = np.asarray(ts)
        varr = np.asarray(values, dtype=float)
        lipschitz = float(
            (np.linalg.norm(np.diff(varr, axis=0), axis=1) / np.diff(tarr)).max()
        )
    return CurveSpec(ts, values, lipschitz)


class IsoscelesOracle(CoverOracle):
    """Cover of parameter triples whose curve points form an isosceles triangle.

    A triple (t1,t2,t3) with p_j = (t_j, f(t_j)) is isosceles with apex p_a
    exactly when p_a lies on the perpendicular bisector hyperplane of the
    other two points.  Evaluating the bisector form at cube midpoints and
    thickening by 3*l_k yields a cover of all such triples at scale l_k.
    """

    def __init__(self, curve: CurveSpec, tag="isosceles"):
        if curve.lipschitz >= 1:
            raise ValueError("isosceles cover requires Lipschitz constant < 1")
        self.curve = curve
        self.n = 3
        self.d = 1
        self.s = 2.0
        self.tag = tag

    # the bisector form for apex value t against base values (ta, tb):
    #   h(t) = (t - (ta+tb)/2)*(tb - ta) + (f(t) - (fa+fb)/2).(fb - fa)
    def _apex_band(self, ta, fa, tb, fb, thr):
        """Apex-parameter intervals where |h| <= thr, per linear curve piece."""
        u = tb - ta
        s0 = 0.5 * (ta + tb)
        w = fb - fa
        v = 0.5 * (fa + fb)
        bands = []
        for t0, t1, alpha, beta in self.curve.segments():
            # h(t) = t*(u + beta.w) + (alpha - v).w - s0*u  on [t0, t1]
            slope = u + float(np.dot(beta, w))
            const = float(np.dot(alpha - v, w)) - s0 * u
            if slope == 0.0:
                if abs(const) <= thr:
                    bands.append((t0, t1))
                continue
            lo = (-thr - const) / slope
            hi = (thr - const) / slope
            if lo > hi:
                lo, hi = hi, lo
            lo, hi = max(lo, t0), min(hi, t1)
            if lo <= hi:
                bands.append((lo, hi))
        return bands

    def cover(self, schedule, k, domain=None):
        D = schedule.D(k)
        # absolute pad against float evaluation noise: without it a true
        # triple could be misclassified just outside the band at very deep
        # generations; widening only over-covers, which is always safe
        thr = 3.0 / D + 1e-13
        if domain is None:
            if D ** 2 * 8 > FULL_COVER_BUDGET:
                raise BudgetError(f"full isosceles cover infeasible at D={D}")
            mids = (np.arange(D) + 0.5) / D
            fmids = self.curve(mids)
            rows = self._banded_rows(mids, fmids, np.arange(D, dtype=np.int64), D, thr)
        else:
            vals = _domain_values(domain).ravel()
            mids = (vals + 0.5) / D
            fmids = self.curve(mids)
            rows = self._banded_rows(mids, fmids, vals, D, thr)
        return self._restrict_rows(schedule, k, rows)

    def _banded_rows(self, mids, fmids, idxs, D, thr):
        """All (i1,i2,i3) index triples hit by some apex band."""
        out = []
        m = len(idxs)
        for i in range(m):
            for j in range(m):
                bands = self._apex_band(mids[i], fmids[i], mids[j], fmids[j], thr)
                for lo, hi in bands:
                    a = np.searchsorted(mids, lo - 0.5 / D)
                    b = np.searchsorted(mids, hi + 0.5 / D)
                    # apex candidates are the grid values whose midpoint falls
                    # inside [lo, hi]
                    sel = idxs[a:b][(mids[a:b] >= lo) & (mids[a:b] <= hi)]
                    if len(sel):
                        base = np.empty((len(sel), 3), dtype=np.int64)
                        # apex in the third slot; base pair (i, j)
                        base[:, 0] = idxs[i]
                        base[:, 1] = idxs[j]
                        base[:, 2] = sel
                        out.append(base.copy())
                        # apex in first and second slots by permutation
                        perm1 = base[:, [2, 0, 1]]
                        perm2 = base[:, [0, 2, 1]]
                        out.append(perm1)
                        out.append(perm2)
        if not out:
            return np.zeros((0, 3), dtype=np.int64)
        return np.vstack(out)

    def count_bound(self, schedule, k):
        # covering count grows like k * D^2 for base-2 schedules
        D = schedule.D(k)
        return None if D > 4096 else None

    def sample_points(self, rng, count):
        # sample base pair, solve for an apex parameter on the curve
        pts = []
        tries = 0
        while len(pts) < count and tries < 50 * count:
            tries += 1
            ta, tb = sorted(rng.uniform(0, 1, size=2))
            if tb - ta < 1e-3:
                continue
            fa, fb = self.curve(ta), self.curve(tb)
            bands = self._apex_band(float(ta), fa, float(tb), fb, 0.0)
            for lo, hi in bands:
                if hi >= lo:
                    pts.append((ta, tb, 0.5 * (lo + hi)))
                    break
        return np.asarray(pts[:count], dtype=float)


def isosceles_cover(curve: CurveSpec, k: int | None = None,
                    schedule: BranchingSchedule | None = None):
    """Isosceles-triple cover; with (schedule, k) returns that generation's grid."""
    oracle = IsoscelesOracle(curve)
    if k is None:
        return oracle
    if schedule is None:
        raise ValueError("materializing a cover needs a schedule")
    return oracle.cover(schedule, k)


class _PointCover(CoverOracle):
    """Finite point set presented as an oracle: covers are point thickenings."""

    def __init__(self, points, d=1, tag="points"):
        self.points = [p if isinstance(p, (tuple, list)) else (p,) for p in points]
        self.n = 1
        self.d = d
        self.s = 0.0
        self.tag = tag

    def cover(self, schedule, k, domain=None):
        grid = thicken(self.points, k, schedule, dim=self.d)
        if domain is not None:
            grid = grid.intersection(domain)
        return grid

    def count_bound(self, schedule, k):
        return len(self.points) * 2**self.d

    def sample_points(self, rng, count):
        idx = rng.integers(0, len(self.points), size=count)
        return np.asarray([self.points[i] for i in idx], dtype=float)


def point_cover(points, d: int = 1, tag: str = "points") -> CoverOracle:
    """Oracle for a finite set of points in [0,1]^d."""
    return _PointCover(points, d=d, tag=tag)


class _SumsetCover(CoverOracle):
    """Cover of {(x,y): x+y in Y} union {(x,y): x or y in Y/2}.

    Index arithmetic with one slack cube per side: the sum of two cubes with
    startpoints a, b spans [(a+b)*l, (a+b+2)*l], so the pair is emitted when
    the window [a+b-1, a+b+2] meets Y's cover.  The halved branch is
    symmetrized over both coordinates, which over-covers harmlessly and lets
    the first-block deletion rule reach points of Y/2 directly.
    """

    def __init__(self, Y: CoverOracle, tag="sumset"):
        if Y.n != 1:
            raise ValueError("sumset cover expects an arity-1 oracle for Y")
        self.Y = Y
        self.n = 2
        self.d = Y.d
        self.s = Y.d + Y.s
        self.tag = tag
        if Y.d != 1:
            raise NotImplementedError("sumset cover is implemented for d = 1")

    def _windows(self, yvals: np.ndarray):
        """Admissible pair sums and halved coordinates from Y's cover."""
        sums = np.unique((yvals[:, None] + np.arange(-2, 2)[None, :]).ravel())
        halves = np.unique(
            np.concatenate([(yvals[:, None] + np.arange(-1, 2)[None, :]).ravel() // 2,
                            ((yvals[:, None] + np.arange(-1, 2)[None, :]).ravel() + 1) // 2])
        )
        return sums, halves

    def cover(self, schedule, k, domain=None):
        D = schedule.D(k)
        ycov = self.Y.cover(schedule, k)
        yvals = ycov.coords.ravel()
        if len(yvals) == 0:
            return self._empty(schedule, k)
        sums, halves = self._windows(yvals)
        halves = halves[(halves >= 0) & (halves < D)]
        rows = []
        if domain is None:
            if (len(sums) + 2 * len(halves)) * D > FULL_COVER_BUDGET:
                raise BudgetError("full sumset cover too large")
            a_all = np.arange(D, dtype=np.int64)
            for sig in sums:
                a = a_all[(a_all <= sig) & (sig - a_all < D) & (sig - a_all >= 0)]
                rows.append(np.stack([a, sig - a], axis=1))
            for h in halves:
                rows.append(np.stack([a_all, np.full(D, h, dtype=np.int64)], axis=1))
                rows.append(np.stack([np.full(D, h, dtype=np.int64), a_all], axis=1))
        else:
            avals = _domain_values(domain).ravel()
            for sig in sums:
                partner = sig - avals
                ok = (partner >= 0) & (partner < D)
                if not ok.any():
                    continue
                sub = avals[ok]
                part = partner[ok]
                member = np.isin(part, avals, assume_unique=False)
                if member.any():
                    rows.append(np.stack([sub[member], part[member]], axis=1))
            hsel = halves[np.isin(halves, avals)]
            for h in hsel:
                rows.append(np.stack([avals, np.full(len(avals), h, dtype=np.int64)], axis=1))
                rows.append(np.stack([np.full(len(avals), h, dtype=np.int64), avals], axis=1))
        if not rows:
            return self._empty(schedule, k)
        return self._restrict_rows(schedule, k, np.vstack(rows))

    def count_bound(self, schedule, k):
        ycnt = self.Y.count_bound(schedule, k)
        if ycnt is None:
            ycov = self.Y.cover(schedule, k)
            ycnt = len(ycov)
        return (4 * ycnt) * schedule.D(k) + (6 * ycnt) * schedule.D(k)

    def sample_points(self, rng, count):
        ypts = self.Y.sample_points(rng, count)
        if ypts is None:
            return None
        out = []
        for y in ypts.ravel():
            x = rng.uniform(max(0.0, y - 1.0), min(1.0, y))
            out.append((x, y - x))  # x + (y - x) = y lands in Y
        return np.asarray(out)


def sumset_cover(Y: CoverOracle, tag: str = "sumset") -> CoverOracle:
    """Arity-2 oracle whose avoidance forces (X+X) disjoint from Y."""
    return _SumsetCover(Y, tag=tag)


class _TranslateCover(CoverOracle):
    """4-point cover marking tuples whose startpoint gaps can match.

    A quadruple of cubes (c1,c2,c3,c4) is emitted when the startpoint gap
    mismatch |(c4-c3)-(c2-c1)| is at most 2, i.e. when points inside the
    cubes could satisfy x2-x1 = x4-x3.  Used by the verifier; the queue
    constructor works structurally and never consumes this cover.
    """

    def __init__(self, tag="translate"):
        self.n = 4
        self.d = 1
        self.s = 3.0
        self.tag = tag

    def cover(self, schedule, k, domain=None):
        D = schedule.D(k)
        if domain is None:
            vals = np.arange(D, dtype=np.int64)
        else:
            vals = _domain_values(domain).ravel()
        m = len(vals)
        if m ** 3 * 5 > FULL_COVER_BUDGET:
            raise BudgetError("translate cover too large; pass a domain")
        rows = []
        idx = np.indices((m, m, m)).reshape(3, -1)
        c1, c2, c3 = vals[idx[0]], vals[idx[1]], vals[idx[2]]
        for slack in range(-2, 3):
            c4 = c3 + (c2 - c1) + slack
            ok = (c4 >= 0) & (c4 < D)
            if domain is not None:
                ok &= np.isin(c4, vals)
            if ok.any():
                rows.append(np.stack([c1[ok], c2[ok], c3[ok], c4[ok]], axis=1))
        if not rows:
            return self._empty(schedule, k)
        return self._restrict_rows(schedule, k, np.vstack(rows))


def translate_config(tag: str = "translate") -> CoverOracle:
    """The 4-point translate configuration, presented for the verifier."""
    return _TranslateCover(tag=tag)
