"""Brute-force certification oracles, independent of the constructors.

Every avoidance claim made by a construction step is re-checkable here by
direct enumeration.  The oracles deliberately share no collision-counting
code with the step implementations; disagreement between a constructor's
report and an oracle is a bug by definition.

Budget exhaustion raises instead of passing silently.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from fracavoid.configs import CurveSpec
from fracavoid.dyadic import GridSet

__all__ = [
    "VerifyBudgetError",
    "VerifyReport",
    "assert_avoids",
    "difference_check",
    "sumset_check",
    "isosceles_check",
]

DEFAULT_BUDGET = 10_000_000


class VerifyBudgetError(RuntimeError):
    pass


@dataclass
class VerifyReport:
    checked: int
    violations: list = field(default_factory=list)
    elapsed: float = 0.0
    note: str = ""

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "checked": self.checked,
            "violations": [list(map(int, np.ravel(v))) for v in self.violations[:200]],
            "violation_count": len(self.violations),
            "passed": self.passed,
            "elapsed": self.elapsed,
            "note": self.note,
        }


def _row_keys(rows: np.ndarray, width: int) -> np.ndarray:
    """Sorted structured keys for row membership, local to the verifier."""
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    dt = np.dtype([(f"c{i}", np.int64) for i in range(width)])
    return np.sort(rows.view(dt).ravel())


def _row_in(keys: np.ndarray, rows: np.ndarray, width: int) -> np.ndarray:
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    dt = keys.dtype
    probe = rows.view(dt).ravel()
    pos = np.searchsorted(keys, probe)
    pos = np.minimum(pos, len(keys) - 1) if len(keys) else pos
    if len(keys) == 0:
        return np.zeros(len(probe), dtype=bool)
    return keys[pos] == probe


def assert_avoids(X: GridSet, B: GridSet, n: int,
                  budget: int = DEFAULT_BUDGET) -> VerifyReport:
    """Report every n-tuple of distinct X-cubes that lies in B.

    Enumerates |X|^n tuples when that fits the budget; otherwise scans the
    rows of B for members whose blocks are all distinct and all in X, which
    computes the same intersection from the other side.  Both directions
    are direct enumerations sharing no code with the constructors.
    """
    t0 = time.time()
    d = X.dim
    if B.dim != d * n:
        raise ValueError(f"B in R^{B.dim}, expected {d * n}")
    m = len(X)
    total = 1
    for i in range(n):
        total *= max(m - i, 0)
    if m**n > budget:
        if len(B) > budget:
            raise VerifyBudgetError(
                f"|X|^n = {m**n} and |B| = {len(B)} both exceed the budget {budget}"
            )
        xkeys = _row_keys(X.coords, d)
        blocks = B.coords.reshape(len(B), n, d)
        inside = np.ones(len(B), dtype=bool)
        for i in range(n):
            inside &= _row_in(xkeys, np.ascontiguousarray(blocks[:, i, :]), d)
        distinct = np.ones(len(B), dtype=bool)
        for i in range(n):
            for j in range(i + 1, n):
                distinct &= np.any(blocks[:, i, :] != blocks[:, j, :], axis=1)
        hits = B.coords[inside & distinct]
        return VerifyReport(checked=len(B), violations=[tuple(map(int, r)) for r in hits],
                            elapsed=time.time() - t0, note="scanned B rows")
    if m < n or len(B) == 0:
        return VerifyReport(checked=total, elapsed=time.time() - t0)
    keys = _row_keys(B.coords, d * n)
    violations = []
    chunk = 500_000
    idx_iter = itertools.product(range(m), repeat=n)
    while True:
        block = list(itertools.islice(idx_iter, chunk))
        if not block:
            break
        idx = np.asarray(block, dtype=np.int64)
        distinct = np.ones(len(idx), dtype=bool)
        for i in range(n):
            for j in range(i + 1, n):
                distinct &= idx[:, i] != idx[:, j]
        idx = idx[distinct]
        if len(idx) == 0:
            continue
        rows = np.hstack([X.coords[idx[:, i]] for i in range(n)])
        hit = _row_in(keys, rows, d * n)
        for r in rows[hit]:
            violations.append(tuple(map(int, r)))
    return VerifyReport(checked=total, violations=violations,
                        elapsed=time.time() - t0)


def _gap_bucket_equalities(vals: np.ndarray, budget: int):
    """Quadruples x1<x2<=x3<x4 with x2-x1 = x4-x3, via equal-gap buckets."""
    m = len(vals)
    pairs = []
    for i in range(m):
        for j in range(i + 1, m):
            pairs.append((vals[j] - vals[i], vals[i], vals[j]))
    pairs.sort()
    violations = []
    checked = 0
    i = 0
    while i < len(pairs):
        j = i
        while j < len(pairs) and pairs[j][0] == pairs[i][0]:
            j += 1
        bucket = pairs[i:j]
        checked += len(bucket) * (len(bucket) - 1)
        if checked > budget:
            raise VerifyBudgetError("equal-gap scan exceeded the budget")
        for (g1, a1, b1), (g2, a3, b3) in itertools.permutations(bucket, 2):
            if b1 <= a3:  # x2 <= x3 orders the two equal-gap pairs
                violations.append((int(a1), int(b1), int(a3), int(b3)))
        i = j
    return checked, violations


def difference_check(X: GridSet, trace=None, budget: int = DEFAULT_BUDGET) -> VerifyReport:
    """Certify the translate-avoidance gap law on a one-dimensional grid set.

    Without a trace, flags every quadruple of startpoints x1<x2<=x3<x4 with
    x2-x1 = x4-x3.  With a queue trace (pairs of (step, interval cube)), the
    check covers exactly the guaranteed scope: quadruples separated by a
    processed interval I (x1 in I, the rest above it) must satisfy the
    startpoint gap law |(x4-x3)-(x2-x1)| >= 5 l_M at the generation M built
    when I was processed.
    """
    t0 = time.time()
    if X.dim != 1:
        raise ValueError("difference check is one-dimensional")
    vals = X.coords.ravel()
    if len(vals) < 3:
        return VerifyReport(checked=0, elapsed=time.time() - t0, note="vacuous")
    sched = X.schedule
    if trace is None:
        if len(vals) ** 2 > budget:
            raise VerifyBudgetError("too many pairs for the equal-gap scan")
        checked, violations = _gap_bucket_equalities(vals, budget)
        return VerifyReport(checked=checked, violations=violations,
                            elapsed=time.time() - t0)

    checked = 0
    violations = []
    DK = sched.D(X.k)
    for step, interval in trace:
        gen_sep = step + 1
        if gen_sep > X.k:
            continue
        ratio_I = DK // sched.D(interval.k)
        inside = vals[(vals // ratio_I) == interval.coords[0]]
        above = vals[(vals // ratio_I) > interval.coords[0]]
        if len(inside) == 0 or len(above) < 2:
            continue
        ratio_M = DK // sched.D(gen_sep)
        cin = inside // ratio_M
        cout = above // ratio_M
        nout = len(cout)
        if nout**3 > budget:
            raise VerifyBudgetError("trace-scoped scan exceeded the budget")
        checked += (nout**3 // 3) * len(cin)
        if checked > budget:
            raise VerifyBudgetError("trace-scoped scan exceeded the budget")
        # T[i,j,k] = c4 - c3 - c2 over x2 <= x3 < x4 from the outside block
        i2, i3, i4 = np.meshgrid(np.arange(nout), np.arange(nout), np.arange(nout),
                                 indexing="ij")
        ok = (i2 <= i3) & (i3 < i4)
        combo = (cout[i4] - cout[i3] - cout[i2])[ok]
        for c1, x1 in zip(cin, inside):
            gaps = np.abs(combo + c1)
            bad = np.nonzero(gaps < 5)[0]
            if len(bad):
                sel2, sel3, sel4 = i2[ok][bad], i3[ok][bad], i4[ok][bad]
                for b in range(len(bad)):
                    violations.append(
                        (int(x1), int(above[sel2[b]]), int(above[sel3[b]]),
                         int(above[sel4[b]]), int(step))
                    )
    return VerifyReport(checked=checked, violations=violations,
                        elapsed=time.time() - t0)


def sumset_check(X: GridSet, ycov: GridSet, budget: int = DEFAULT_BUDGET) -> VerifyReport:
    """Certify that X + X stays clear of the covered set Y.

    Pair sums carry one slack cube per side; the halved branch checks
    X against Y/2, which also covers x = y.
    """
    t0 = time.time()
    if X.dim != 1 or ycov.dim != 1:
        raise ValueError("sumset check is one-dimensional")
    vals = X.coords.ravel()
    yvals = ycov.coords.ravel()
    D = X.denominator
    if ycov.denominator != D:
        raise ValueError("X and the Y cover must share a generation")
    violations = []
    checked = 0
    if len(vals) and len(yvals):
        sums = np.unique((yvals[:, None] + np.arange(-2, 2)[None, :]).ravel())
        for sig in sums:
            partner = sig - vals
            ok = (partner >= 0) & (partner < D)
            cand = vals[ok]
            part = partner[ok]
            checked += len(cand)
            if checked > budget:
                raise VerifyBudgetError("sum windows exceeded the budget")
            hit = np.isin(part, vals)
            for a, b in zip(cand[hit], part[hit]):
                if a != b:
                    violations.append((int(a), int(b)))
        halves = vals * 2
        checked += len(vals)
        hit = np.zeros(len(vals), dtype=bool)
        for off in (-1, 0, 1, 2):
            hit |= np.isin(halves + off, yvals)
        for x in vals[hit]:
            violations.append((int(x), int(x)))
    return VerifyReport(checked=checked, violations=violations,
                        elapsed=time.time() - t0)


def isosceles_check(X: GridSet, curve: CurveSpec, tau: float = 2.5,
                    budget: int = DEFAULT_BUDGET) -> VerifyReport:
    """Certify no near-isosceles triple among curve points over X's midpoints.

    For every triple of distinct cubes and every apex labeling the two apex
    distances must differ by more than tau * l_k.  The default gap tau = 2.5
    comes from the 3 l_k cover slack divided by the maximal distance sum
    2 sqrt(1 + L^2) < 2.4 of points over the unit parameter interval.
    """
    t0 = time.time()
    if X.dim != 1:
        raise ValueError("isosceles check is one-dimensional")
    m = len(X)
    if m < 3:
        return VerifyReport(checked=0, elapsed=time.time() - t0, note="vacuous")
    if m**3 > budget:
        raise VerifyBudgetError(f"|X|^3 = {m**3} exceeds the budget {budget}")
    D = X.denominator
    mids = (X.coords.ravel() + 0.5) / D
    pts = np.hstack([mids[:, None], curve(mids)])
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    gap = tau / D
    violations = []
    checked = 0
    vals = X.coords.ravel()
    for i in range(m):
        # vectorize over pairs j < k (both distinct from i)
        dj = dist[i]
        for j in range(i + 1, m):
            ks = np.arange(j + 1, m)
            if len(ks) == 0:
                continue
            checked += len(ks)
            a = np.abs(dj[j] - dj[ks])          # apex i
            b = np.abs(dj[j] - dist[j, ks])     # apex j
            c = np.abs(dj[ks] - dist[j, ks])    # apex k
            bad = np.nonzero((a <= gap) | (b <= gap) | (c <= gap))[0]
            for kk in ks[bad]:
                violations.append((int(vals[i]), int(vals[j]), int(vals[kk])))
    return VerifyReport(checked=checked, violations=violations,
                        elapsed=time.time() - t0)
