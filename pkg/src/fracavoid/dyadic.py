"""Exact bookkeeping for dyadic cube systems with variable branching factors.

All geometry lives on the unit cube [0,1]^dim.  A schedule fixes per-level
branching factors N_1..N_K (fine grid) and divisors M_k | N_k (intermediary
grid).  Fine cubes of generation k have sidelength 1/D_k with D_k = N_1*...*N_k;
intermediary cubes of generation k sit between generations k-1 and k and have
sidelength 1/R_k with R_k = D_{k-1}*M_k.

Cubes are stored as integer multi-indices (the startpoint numerator at the
grid denominator), so all set operations are exact.  Grid sets are immutable
values: every operation returns a fresh set, which makes them safe to share
across threads.

Conventions:
  * Point thickening uses closed cubes, so a point on a shared face belongs
    to every incident cube.
  * Grid-set thickening/refinement treats a discretized set as the union of
    half-open boxes [c/D, (c+1)/D); this makes thicken idempotent and makes
    the refinement of the full cube exactly D^dim cubes.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "BudgetError",
    "BranchingSchedule",
    "Cube",
    "GridSet",
    "make_schedule",
    "children",
    "parent_of",
    "intermediary_cells",
    "thicken",
    "refine",
    "coarsen",
    "product",
    "nondiagonal_filter",
    "write_gridset",
    "read_gridset",
]

BUDGET_ENV_VAR = "FRACTAL_AVOID_BUDGET_BITS"
DEFAULT_BUDGET_BITS = 62
# int64 coordinates are the storage format; budgets beyond this would
# silently overflow, so they are refused outright.
MAX_SUPPORTED_BITS = 62


class BudgetError(RuntimeError):
    """Raised when a denominator exceeds the configured integer-width budget."""


def budget_bits(default: int | None = None) -> int:
    """Integer-width budget in bits, from the environment or the default."""
    if default is None:
        default = DEFAULT_BUDGET_BITS
    raw = os.environ.get(BUDGET_ENV_VAR)
    if raw is None:
        return default
    try:
        bits = int(raw)
    except ValueError as exc:
        raise ValueError(f"{BUDGET_ENV_VAR} must be an integer, got {raw!r}") from exc
    return bits


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


class BranchingSchedule:
    """Branching factors {N_k}, intermediary divisors {M_k}, derived scales.

    Parameters
    ----------
    d : ambient point dimension.
    Ns : branching factors, N_k >= 2 for every level.
    Ms : intermediary divisors with M_k | N_k.  Defaults to Ms = Ns, in which
        case the intermediary grid coincides with the fine grid.
    max_bits : integer-width budget for D_K; levels whose denominator would
        exceed it are refused.
    require_power_of_two : reject non-power-of-two branching factors.  The
        randomized avoidance steps need powers of two; plain dyadic
        bookkeeping (classical base-N families) does not.
    """

    def __init__(
        self,
        d: int,
        Ns: Sequence[int],
        Ms: Sequence[int] | None = None,
        *,
        max_bits: int | None = None,
        require_power_of_two: bool = False,
    ):
        if d < 1:
            raise ValueError("ambient dimension must be positive")
        Ns = tuple(int(N) for N in Ns)
        if Ms is None:
            Ms = Ns
        Ms = tuple(int(M) for M in Ms)
        if len(Ms) != len(Ns):
            raise ValueError("Ns and Ms must have equal length")
        for k, (N, M) in enumerate(zip(Ns, Ms), start=1):
            if N < 2:
                raise ValueError(f"N_{k} = {N} < 2")
            if M < 1 or N % M != 0:
                raise ValueError(f"M_{k} = {M} does not divide N_{k} = {N}")
            if require_power_of_two and not (_is_power_of_two(N) and _is_power_of_two(M)):
                raise ValueError(f"N_{k} = {N}, M_{k} = {M}: powers of two required")
        bits = budget_bits() if max_bits is None else max_bits
        if bits > MAX_SUPPORTED_BITS:
            raise BudgetError(
                f"budget {bits} bits exceeds the {MAX_SUPPORTED_BITS}-bit storage limit"
            )
        self.d = d
        self.Ns = Ns
        self.Ms = Ms
        self.max_bits = bits
        self._D = [1]
        for N in Ns:
            self._D.append(self._D[-1] * N)
        if self._D[-1].bit_length() > bits:
            depth_ok = max(k for k in range(len(self._D)) if self._D[k].bit_length() <= bits)
            raise BudgetError(
                f"D_{len(Ns)} needs {self._D[-1].bit_length()} bits, budget is {bits};"
                f" deepest admissible generation is {depth_ok}"
            )

    @property
    def depth(self) -> int:
        return len(self.Ns)

    def N(self, k: int) -> int:
        """Branching factor N_k (1-indexed)."""
        return self.Ns[k - 1]

    def M(self, k: int) -> int:
        """Intermediary divisor M_k (1-indexed)."""
        return self.Ms[k - 1]

    def D(self, k: int) -> int:
        """Fine denominator D_k = N_1 ... N_k (D_0 = 1)."""
        return self._D[k]

    def R(self, k: int) -> int:
        """Intermediary denominator R_k = D_{k-1} * M_k, for k >= 1."""
        if k < 1:
            raise ValueError("intermediary grids start at generation 1")
        return self._D[k - 1] * self.Ms[k - 1]

    def l(self, k: int) -> Fraction:
        """Fine sidelength l_k = 1/D_k."""
        return Fraction(1, self.D(k))

    def r(self, k: int) -> Fraction:
        """Intermediary sidelength r_k = 1/R_k."""
        return Fraction(1, self.R(k))

    def denominator(self, k: int, kind: str) -> int:
        if kind == "DQ":
            return self.D(k)
        if kind == "DR":
            return self.R(k)
        raise ValueError(f"unknown grid kind {kind!r}")

    def growth_diagnostics(self) -> list[float]:
        """log N_{k+1} / log D_k for k = 1..K-1.

        Small values mean earlier levels dominate (the regime where dyadic
        scale measurements recover Minkowski dimension); large values mean
        the schedule decays rapidly between scales.
        """
        out = []
        for k in range(1, self.depth):
            out.append(math.log(self.N(k + 1)) / math.log(self.D(k)))
        return out

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BranchingSchedule)
            and self.d == other.d
            and self.Ns == other.Ns
            and self.Ms == other.Ms
        )

    def __hash__(self):
        return hash((self.d, self.Ns, self.Ms))

    def __repr__(self):
        return f"BranchingSchedule(d={self.d}, Ns={list(self.Ns)}, Ms={list(self.Ms)})"


def make_schedule(
    mode: str,
    *,
    d: int = 1,
    depth: int | None = None,
    Ns: Sequence[int] | None = None,
    Ms: Sequence[int] | None = None,
    N: int | None = None,
    M: int | None = None,
    psi: Callable[[int], float] | None = None,
    lower_bounds: Callable[[int, int], int] | None = None,
    max_bits: int | None = None,
    require_power_of_two: bool | None = None,
) -> BranchingSchedule:
    """Build a schedule in one of the supported growth modes.

    Modes
    -----
    explicit
        `Ns` (and optionally `Ms`) given outright.  Entries must be powers of
        two unless `require_power_of_two=False` (classical base-N bookkeeping,
        e.g. base 3 or Keleti's multiples of ten, needs the relaxation).
    constant
        N_k = N for `depth` levels; any N >= 2 is allowed.
    subhyperdyadic
        N_k = 2^floor(2^(k*psi(k))) for a supplied psi decreasing to zero
        with psi(k) >= log2(k)/k.
    rapid
        N_k = smallest power of two >= lower_bounds(k, D_{k-1}).

    Unless given, Ms defaults to Ns.
    """
    if mode == "explicit":
        if Ns is None:
            raise ValueError("explicit mode needs Ns")
        strict = True if require_power_of_two is None else require_power_of_two
        if strict:
            for k, val in enumerate(Ns, start=1):
                if not _is_power_of_two(int(val)):
                    raise ValueError(f"explicit N_{k} = {val} is not a power of two")
        return BranchingSchedule(d, Ns, Ms, max_bits=max_bits)
    if mode == "constant":
        if N is None or depth is None:
            raise ValueError("constant mode needs N and depth")
        Ms_seq = None if M is None else [M] * depth
        return BranchingSchedule(d, [N] * depth, Ms_seq, max_bits=max_bits)
    if mode == "subhyperdyadic":
        if psi is None or depth is None:
            raise ValueError("subhyperdyadic mode needs psi and depth")
        Ns_seq = []
        for k in range(1, depth + 1):
            val = psi(k)
            if k >= 2 and val < math.log2(k) / k - 1e-12:
                raise ValueError(f"psi({k}) = {val} < log2({k})/{k}")
            Ns_seq.append(2 ** int(math.floor(2 ** (k * val))))
        return BranchingSchedule(d, Ns_seq, Ms, max_bits=max_bits)
    if mode == "rapid":
        if lower_bounds is None or depth is None:
            raise ValueError("rapid mode needs lower_bounds and depth")
        Ns_seq = []
        D = 1
        for k in range(1, depth + 1):
            bound = max(2, int(lower_bounds(k, D)))
            Nk = 1 << (bound - 1).bit_length()
            Ns_seq.append(Nk)
            D *= Nk
        return BranchingSchedule(d, Ns_seq, Ms, max_bits=max_bits)
    raise ValueError(f"unknown schedule mode {mode!r}")


@dataclass(frozen=True)
class Cube:
    """A single dyadic cube: generation, grid kind and integer startpoint."""

    schedule: BranchingSchedule
    k: int
    kind: str
    coords: tuple[int, ...]

    def __post_init__(self):
        D = self.schedule.denominator(self.k, self.kind)
        for c in self.coords:
            if not (0 <= c < D):
                raise ValueError(f"coordinate {c} outside [0, {D})")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def startpoint(self) -> tuple[Fraction, ...]:
        D = self.schedule.denominator(self.k, self.kind)
        return tuple(Fraction(c, D) for c in self.coords)

    def sidelength(self) -> Fraction:
        return Fraction(1, self.schedule.denominator(self.k, self.kind))


def _sorted_unique_rows(coords: np.ndarray) -> np.ndarray:
    """Lexicographically sorted, duplicate-free copy of an index array."""
    if coords.size == 0:
        return coords.reshape(0, coords.shape[1] if coords.ndim == 2 else 1).astype(np.int64)
    coords = np.asarray(coords, dtype=np.int64)
    order = np.lexsort(coords.T[::-1])
    coords = coords[order]
    keep = np.ones(len(coords), dtype=bool)
    keep[1:] = np.any(coords[1:] != coords[:-1], axis=1)
    return coords[keep]


def _struct_view(coords: np.ndarray) -> np.ndarray:
    """1-D structured view of a contiguous 2-D int64 array, row order preserved."""
    coords = np.ascontiguousarray(coords, dtype=np.int64)
    dt = np.dtype([(f"f{i}", np.int64) for i in range(coords.shape[1])])
    return coords.view(dt).reshape(-1)


def rows_member(rows: np.ndarray, sorted_rows: np.ndarray) -> np.ndarray:
    """Boolean membership of `rows` in the lexicographically sorted `sorted_rows`."""
    if len(sorted_rows) == 0 or len(rows) == 0:
        return np.zeros(len(rows), dtype=bool)
    hay = _struct_view(sorted_rows)
    needles = _struct_view(rows)
    pos = np.searchsorted(hay, needles)
    pos = np.minimum(pos, len(hay) - 1)
    return hay[pos] == needles


class GridSet:
    """An immutable, duplicate-free set of same-generation cubes.

    coords is an (n_cubes, dim) int64 array in lexicographic row order; dim
    factors as d * n where d is the point dimension and n the tuple arity
    (n = 1 for plain subsets of [0,1]^d).
    """

    __slots__ = ("schedule", "d", "n", "k", "kind", "coords")

    def __init__(
        self,
        schedule: BranchingSchedule,
        k: int,
        coords,
        *,
        kind: str = "DQ",
        d: int | None = None,
        n: int = 1,
        _presorted: bool = False,
    ):
        coords = np.asarray(coords, dtype=np.int64)
        if coords.ndim == 1:
            coords = coords.reshape(-1, 1)
        if coords.size == 0:
            dim = coords.shape[1] if coords.ndim == 2 and coords.shape[1] else (d or schedule.d) * n
            coords = coords.reshape(0, dim)
        dim = coords.shape[1]
        if d is None:
            d = dim // n
        if d * n != dim:
            raise ValueError(f"dim {dim} != d*n = {d}*{n}")
        D = schedule.denominator(k, kind)
        if coords.size and (coords.min() < 0 or coords.max() >= D):
            raise ValueError(f"coordinates outside [0, {D}) at generation {k} ({kind})")
        if not _presorted:
            coords = _sorted_unique_rows(coords)
        coords.setflags(write=False)
        self.schedule = schedule
        self.d = d
        self.n = n
        self.k = k
        self.kind = kind
        self.coords = coords

    @property
    def dim(self) -> int:
        return self.d * self.n

    @property
    def denominator(self) -> int:
        return self.schedule.denominator(self.k, self.kind)

    def __len__(self) -> int:
        return len(self.coords)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GridSet)
            and self.k == other.k
            and self.kind == other.kind
            and self.dim == other.dim
            and np.array_equal(self.coords, other.coords)
        )

    def __repr__(self):
        return (
            f"GridSet(k={self.k}, kind={self.kind}, d={self.d}, n={self.n},"
            f" cubes={len(self)})"
        )

    def cubes(self) -> Iterable[Cube]:
        for row in self.coords:
            yield Cube(self.schedule, self.k, self.kind, tuple(int(c) for c in row))

    def member(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        if rows.ndim == 1:
            rows = rows.reshape(1, -1)
        return rows_member(rows, self.coords)

    def contains_cube(self, coords: Sequence[int]) -> bool:
        return bool(self.member(np.asarray(coords, dtype=np.int64))[0])

    def replace_coords(self, coords) -> "GridSet":
        return GridSet(
            self.schedule, self.k, coords, kind=self.kind, d=self.d, n=self.n
        )

    def union(self, other: "GridSet") -> "GridSet":
        self._check_compatible(other)
        return self.replace_coords(np.vstack([self.coords, other.coords]))

    def difference(self, other: "GridSet") -> "GridSet":
        self._check_compatible(other)
        if len(self) == 0 or len(other) == 0:
            return self
        keep = ~rows_member(self.coords, other.coords)
        return GridSet(
            self.schedule, self.k, self.coords[keep], kind=self.kind,
            d=self.d, n=self.n, _presorted=True,
        )

    def intersection(self, other: "GridSet") -> "GridSet":
        self._check_compatible(other)
        if len(self) == 0 or len(other) == 0:
            return self.replace_coords(np.zeros((0, self.dim), dtype=np.int64))
        keep = rows_member(self.coords, other.coords)
        return GridSet(
            self.schedule, self.k, self.coords[keep], kind=self.kind,
            d=self.d, n=self.n, _presorted=True,
        )

    def _check_compatible(self, other: "GridSet"):
        if self.k != other.k or self.kind != other.kind or self.dim != other.dim:
            raise ValueError("grid sets live on different grids")


def _require_fine(Q: Cube):
    if Q.kind != "DQ":
        raise ValueError("operation requires a fine (DQ) cube")


def children(Q: Cube, schedule: BranchingSchedule | None = None) -> GridSet:
    """All generation-(k+1) fine cubes contained in the fine cube Q."""
    sched = schedule or Q.schedule
    _require_fine(Q)
    k1 = Q.k + 1
    if k1 > sched.depth:
        raise BudgetError(f"schedule has no generation {k1}")
    N = sched.N(k1)
    dim = Q.dim
    base = np.asarray(Q.coords, dtype=np.int64) * N
    axes = [np.arange(N, dtype=np.int64)] * dim
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    return GridSet(sched, k1, base + mesh, kind="DQ", d=Q.dim, n=1)


def parent_of(Q: Cube, schedule: BranchingSchedule | None = None) -> Cube:
    """Unique coarser cube containing Q.

    Fine generation-k cubes map to fine generation-(k-1) cubes; intermediary
    DR_{k} cubes map to their fine generation-(k-1) parent.
    """
    sched = schedule or Q.schedule
    if Q.kind == "DQ":
        if Q.k < 1:
            raise ValueError("generation-0 cube has no parent")
        ratio = sched.N(Q.k)
    else:
        ratio = sched.M(Q.k)
    return Cube(sched, Q.k - 1, "DQ", tuple(c // ratio for c in Q.coords))


def intermediary_cells(Q: Cube, schedule: BranchingSchedule | None = None) -> GridSet:
    """The M_{k+1}^dim intermediary DR_{k+1} cubes inside the fine cube Q."""
    sched = schedule or Q.schedule
    _require_fine(Q)
    k1 = Q.k + 1
    if k1 > sched.depth:
        raise BudgetError(f"schedule has no generation {k1}")
    M = sched.M(k1)
    dim = Q.dim
    base = np.asarray(Q.coords, dtype=np.int64) * M
    axes = [np.arange(M, dtype=np.int64)] * dim
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    return GridSet(sched, k1, base + mesh, kind="DR", d=Q.dim, n=1)


def _point_axis_cubes(x: Fraction, D: int) -> list[int]:
    """Indices of closed generation cubes meeting a point coordinate."""
    num = x * D
    lo = math.floor(num)
    out = []
    if num == lo and lo - 1 >= 0:
        out.append(lo - 1)  # boundary point also meets the cube to its left
    if 0 <= lo < D:
        out.append(lo)
    elif num == D:  # right endpoint of [0,1]
        pass
    return out


def thicken(obj, k: int, schedule: BranchingSchedule | None = None, *, dim: int | None = None) -> GridSet:
    """Smallest generation-k discretized set containing the input.

    Points are matched against closed cubes (a shared-face point belongs to
    all incident cubes).  A GridSet input is treated as a union of half-open
    boxes, which makes the operation idempotent and monotone.
    """
    if isinstance(obj, GridSet):
        grid = obj
        sched = schedule or grid.schedule
        if grid.kind != "DQ":
            raise ValueError("thicken expects a fine grid set")
        if k == grid.k:
            return grid
        if k > grid.k:
            return refine(grid, k)
        return coarsen(grid, k)
    sched = schedule
    if sched is None:
        raise ValueError("thicken of points needs a schedule")
    pts = list(obj)
    if not pts:
        return GridSet(sched, k, np.zeros((0, dim or sched.d), dtype=np.int64))
    D = sched.D(k)
    rows = []
    for p in pts:
        if np.isscalar(p) or isinstance(p, Fraction):
            p = (p,)
        axes = []
        ok = True
        for x in p:
            x = Fraction(x) if not isinstance(x, Fraction) else x
            if x < 0 or x > 1:
                ok = False
                break
            axes.append(_point_axis_cubes(x, D))
        if not ok:
            continue
        if any(len(a) == 0 for a in axes):
            continue
        grids = np.meshgrid(*[np.asarray(a, dtype=np.int64) for a in axes], indexing="ij")
        rows.append(np.stack(grids, axis=-1).reshape(-1, len(axes)))
    if not rows:
        return GridSet(sched, k, np.zeros((0, dim or sched.d), dtype=np.int64))
    return GridSet(sched, k, np.vstack(rows))


def refine(grid: GridSet, k: int) -> GridSet:
    """All generation-k fine cubes inside a coarser fine grid set."""
    if k < grid.k:
        raise ValueError("refine goes to a deeper generation")
    sched = grid.schedule
    if k > sched.depth:
        raise BudgetError(f"schedule has no generation {k}")
    ratio = 1
    for j in range(grid.k + 1, k + 1):
        ratio *= sched.N(j)
    if ratio == 1:
        return grid
    count = ratio ** grid.dim
    if count * max(len(grid), 1) > 50_000_000:
        raise BudgetError("refinement would materialize too many cubes")
    dim = grid.dim
    base = grid.coords * ratio
    axes = [np.arange(ratio, dtype=np.int64)] * dim
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    out = (base[:, None, :] + mesh[None, :, :]).reshape(-1, dim)
    return GridSet(sched, k, out, kind="DQ", d=grid.d, n=grid.n)


def coarsen(grid: GridSet, k: int) -> GridSet:
    """Generation-k ancestors of every cube in a finer fine grid set."""
    if k > grid.k:
        raise ValueError("coarsen goes to a shallower generation")
    sched = grid.schedule
    ratio = 1
    for j in range(k + 1, grid.k + 1):
        ratio *= sched.N(j)
    if ratio == 1:
        return grid
    return GridSet(sched, k, grid.coords // ratio, kind="DQ", d=grid.d, n=grid.n)


def product(sets: Sequence[GridSet]) -> GridSet:
    """Cartesian product of same-generation grid sets, lexicographically sorted."""
    if not sets:
        raise ValueError("product of zero sets")
    first = sets[0]
    for s in sets[1:]:
        if s.k != first.k or s.kind != first.kind or s.schedule != first.schedule:
            raise ValueError("product requires equal generation and schedule")
    total_n = sum(s.n for s in sets)
    d = first.d
    if any(s.d != d for s in sets):
        raise ValueError("product requires equal point dimension")
    arrays = [s.coords for s in sets]
    if any(len(a) == 0 for a in arrays):
        dim = sum(a.shape[1] for a in arrays)
        return GridSet(first.schedule, first.k, np.zeros((0, dim), dtype=np.int64),
                       kind=first.kind, d=d, n=total_n)
    sizes = [len(a) for a in arrays]
    total = 1
    for s in sizes:
        total *= s
    if total > 50_000_000:
        raise BudgetError("product would materialize too many cubes")
    idx = np.indices(sizes).reshape(len(sizes), -1)
    blocks = [arrays[i][idx[i]] for i in range(len(arrays))]
    out = np.hstack(blocks)
    return GridSet(first.schedule, first.k, out, kind=first.kind, d=d, n=total_n)


def nondiagonal_filter(B: GridSet, n: int, d: int | None = None) -> GridSet:
    """Keep the strongly non-diagonal cubes: all n component blocks distinct."""
    if d is None:
        if B.dim % n != 0:
            raise ValueError(f"dimension {B.dim} not divisible by n = {n}")
        d = B.dim // n
    if d * n != B.dim:
        raise ValueError(f"dimension {B.dim} != d*n = {d}*{n}")
    if len(B) == 0 or n == 1:
        return GridSet(B.schedule, B.k, B.coords, kind=B.kind, d=d, n=n, _presorted=True)
    blocks = B.coords.reshape(len(B), n, d)
    keep = np.ones(len(B), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            keep &= np.any(blocks[:, i, :] != blocks[:, j, :], axis=1)
    return GridSet(B.schedule, B.k, B.coords[keep], kind=B.kind, d=d, n=n, _presorted=True)


def write_gridset(grid: GridSet, path) -> None:
    """Line-oriented text dump; bit-exact round trip with read_gridset."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(
            f"gridset v1 d={grid.d} n={grid.n} k={grid.k} kind={grid.kind}"
            f" D={grid.denominator}\n"
        )
        for row in grid.coords:
            fh.write(" ".join(str(int(c)) for c in row) + "\n")


def read_gridset(path, schedule: BranchingSchedule) -> GridSet:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) < 6 or header[0] != "gridset" or header[1] != "v1":
            raise ValueError(f"{path}: not a gridset v1 file")
        fields = dict(part.split("=", 1) for part in header[2:])
        d = int(fields["d"])
        n = int(fields["n"])
        k = int(fields["k"])
        kind = fields["kind"]
        D = int(fields["D"])
        if schedule.denominator(k, kind) != D:
            raise ValueError(
                f"{path}: denominator {D} does not match the schedule at k={k}"
            )
        rows = []
        for line in fh:
            line = line.strip()
            if line:
                rows.append([int(tok) for tok in line.split()])
    coords = np.asarray(rows, dtype=np.int64) if rows else np.zeros((0, d * n), dtype=np.int64)
    return GridSet(schedule, k, coords, kind=kind, d=d, n=n)
