"""Closed sets on the lattice, hit/miss predicates, excess, and Painleve-Kuratowski limits."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import ndimage

from epilab import carrier
from epilab.carrier import GridSpec, Point, ProductGrid, as_point


class ClosedSet:
    """A finite subset of a lattice (GridSpec or ProductGrid), stored as a boolean mask.

    Set algebra is exact at the member level.
    """

    __slots__ = ("grid", "mask")

    def __init__(self, grid, mask):
        m = np.array(mask, dtype=bool, copy=True).reshape(grid.shape)
        m.setflags(write=False)
        self.grid = grid
        self.mask = m

    @classmethod
    def empty(cls, grid) -> ClosedSet:
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    @classmethod
    def full(cls, grid) -> ClosedSet:
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @classmethod
    def from_indices(cls, grid, indices: Iterable[int]) -> ClosedSet:
        m = np.zeros(grid.size, dtype=bool)
        idx = np.asarray(list(indices), dtype=np.intp)
        if idx.size and (idx.min() < 0 or idx.max() >= grid.size):
            raise ValueError("lattice index out of range")
        m[idx] = True
        return cls(grid, m)

    @classmethod
    def from_points(cls, grid, points: Iterable) -> ClosedSet:
        if isinstance(grid, ProductGrid):
            return cls.from_indices(grid, [grid.index_of(p) for p in points])
        return cls.from_indices(grid, [as_point(grid, p).index for p in points])

    @property
    def flat(self) -> np.ndarray:
        return self.mask.reshape(-1)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()

    def points(self) -> list:
        return [self.grid.point(i) for i in self.indices]

    def coords(self) -> np.ndarray:
        return self.grid.coords[self.indices]

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __contains__(self, p) -> bool:
        if isinstance(self.grid, GridSpec):
            p = as_point(self.grid, p)
        return bool(self.flat[p.index])

    def _check(self, other: ClosedSet):
        if self.grid != other.grid:
            raise ValueError("sets live on different grids")

    def __eq__(self, other) -> bool:
        if not isinstance(other, ClosedSet):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash((self.grid, self.mask.tobytes()))

    def __or__(self, other: ClosedSet) -> ClosedSet:
        self._check(other)
        return ClosedSet(self.grid, self.mask | other.mask)

    def __and__(self, other: ClosedSet) -> ClosedSet:
        self._check(other)
        return ClosedSet(self.grid, self.mask & other.mask)

    def __sub__(self, other: ClosedSet) -> ClosedSet:
        self._check(other)
        return ClosedSet(self.grid, self.mask & ~other.mask)

    def __le__(self, other: ClosedSet) -> bool:
        self._check(other)
        return not (self.mask & ~other.mask).any()

    def __repr__(self):
        n = len(self)
        if n <= 6:
            return f"ClosedSet({[tuple(c) for c in self.coords().tolist()]})"
        return f"ClosedSet(<{n} points>)"

    # -- serialization ------------------------------------------------------
    def to_json(self) -> str:
        return json.dumps([int(i) for i in self.indices])

    @classmethod
    def from_json(cls, grid, text: str) -> ClosedSet:
        return cls.from_indices(grid, json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index"])
        for i in self.indices:
            w.writerow([int(i)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, grid, text: str) -> ClosedSet:
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["index"]:
            raise ValueError("expected a CSV with header 'index'")
        return cls.from_indices(grid, [int(r[0]) for r in rows[1:] if r])


def hits(F: ClosedSet, A: ClosedSet) -> bool:
    F._check(A)
    return bool((F.mask & A.mask).any())


def misses(F: ClosedSet, A: ClosedSet) -> bool:
    return not hits(F, A)


def excess_with_witness(F: ClosedSet, G: ClosedSet) -> tuple[float, int | None]:
    """sup_{x in F} dist(x, G) together with the flat index attaining it."""
    F._check(G)
    if F.is_empty:
        return 0.0, None
    outside = np.flatnonzero(F.flat & ~G.flat)
    if outside.size == 0:
        return 0.0, None
    d = carrier.distances_to(F.grid, G.indices, outside)
    k = int(np.argmax(d))
    return float(d[k]), int(outside[k])


def excess(F: ClosedSet, G: ClosedSet) -> float:
    """Excess of F over G; 0 for empty F, +inf for nonempty F and empty G."""
    return excess_with_witness(F, G)[0]


def dilate(F: ClosedSet, tol: float) -> ClosedSet:
    """All lattice points within tol of F."""
    if F.is_empty:
        return F
    st = carrier.stencil(F.grid, tol)
    return ClosedSet(F.grid, ndimage.binary_dilation(F.mask, structure=st))


def _resolution(grid) -> float:
    if isinstance(grid, ProductGrid):
        return max(grid.base.h, grid.base.h_v)
    return grid.h


def _tail(seq: Sequence[ClosedSet], tail_start: int | None, tol: float) -> Sequence[ClosedSet]:
    if not seq:
        raise ValueError("sequence must be nonempty")
    if tail_start is None:
        tail_start = len(seq) // 2
    if not 0 <= tail_start < len(seq):
        raise ValueError("tail_start must index into the sequence")
    grid = seq[0].grid
    if any(s.grid != grid for s in seq):
        raise ValueError("all sets must live on the same grid")
    if tol < _resolution(grid) - carrier.SNAP * _resolution(grid):
        raise ValueError(f"tol={tol} is below the lattice resolution {_resolution(grid)}")
    return seq[tail_start:]


def tail_union(seq: Sequence[ClosedSet], tail_start: int | None = None, tol: float = 0.01) -> ClosedSet:
    """Union of the tail elements, before any dilation."""
    tail = _tail(seq, tail_start, tol)
    union = np.zeros(tail[0].grid.shape, dtype=bool)
    for s in tail:
        union |= s.mask
    return ClosedSet(tail[0].grid, union)


def pk_limsup(seq: Sequence[ClosedSet], tail_start: int | None = None, tol: float = 0.01) -> ClosedSet:
    """Points within tol of some tail element (numerical outer limit)."""
    return dilate(tail_union(seq, tail_start, tol), tol)


def pk_liminf(seq: Sequence[ClosedSet], tail_start: int | None = None, tol: float = 0.01) -> ClosedSet:
    """Points within tol of every tail element (numerical inner limit)."""
    tail = _tail(seq, tail_start, tol)
    grid = tail[0].grid
    out = np.ones(grid.shape, dtype=bool)
    st = carrier.stencil(grid, tol)
    seen: set[int] = set()
    for s in tail:
        key = hash(s)
        if key in seen:
            continue
        seen.add(key)
        if s.is_empty:
            return ClosedSet.empty(grid)
        out &= ndimage.binary_dilation(s.mask, structure=st)
        if not out.any():
            break
    return ClosedSet(grid, out)


class UpperFellVerdict(NamedTuple):
    converges: bool
    excess: float
    witness: object  # lattice point or None


def upper_fell_converges(seq, F: ClosedSet, tail_start=None, tol: float = 0.01) -> UpperFellVerdict:
    """Upper Fell convergence: every tail point lies within tol of F.

    Equivalently the tol-outer limit sits inside the 2*tol neighbourhood of F,
    so tails that are off the lattice by less than tol still pass.
    """
    e, w = excess_with_witness(tail_union(seq, tail_start, tol), F)
    ok = e <= tol + carrier.SNAP * _resolution(F.grid)
    return UpperFellVerdict(ok, e, None if w is None else F.grid.point(w))


@dataclass
class FellReport:
    converges: bool
    upper_excess: float
    lower_excess: float
    upper_witness: object = None
    lower_witness: object = None
    tol: float = 0.0

    def to_dict(self) -> dict:
        def pt(p):
            return None if p is None else list(p.coords)

        return {
            "converges": self.converges,
            "upper_excess": self.upper_excess,
            "lower_excess": self.lower_excess,
            "upper_witness": pt(self.upper_witness),
            "lower_witness": pt(self.lower_witness),
            "tol": self.tol,
        }


def fell_converges(seq, F: ClosedSet, tail_start=None, tol: float = 0.01) -> FellReport:
    """PK (equivalently Fell) convergence: tail points within tol of F and F within tol of liminf."""
    li = pk_liminf(seq, tail_start, tol)
    up, wu = excess_with_witness(tail_union(seq, tail_start, tol), F)
    lo, wl = excess_with_witness(F, li)
    slack = carrier.SNAP * _resolution(F.grid)
    ok = up <= tol + slack and lo <= tol + slack
    g = F.grid
    return FellReport(
        ok,
        up,
        lo,
        None if wu is None else g.point(wu),
        None if wl is None else g.point(wl),
        tol,
    )


@dataclass(frozen=True)
class BaseElement:
    """Base set of the Fell topology: miss every closed C_i, hit every open D_j."""

    missing: tuple[tuple[Point, float], ...]
    hitting: tuple[tuple[Point, float], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "missing", tuple(self.missing))
        object.__setattr__(self, "hitting", tuple(self.hitting))
        if len(self.missing) < 1:
            raise ValueError("a base element needs at least one missing ball")
        for _, r in self.missing + self.hitting:
            if r <= 0:
                raise ValueError("radii must be positive")

    def to_json(self) -> str:
        return json.dumps(
            {
                "missing": [{"center": list(c.coords), "radius": r} for c, r in self.missing],
                "hitting": [{"center": list(c.coords), "radius": r} for c, r in self.hitting],
            }
        )

    @classmethod
    def from_json(cls, grid: GridSpec, text: str) -> BaseElement:
        d = json.loads(text)

        def balls(key):
            return tuple((Point(grid, tuple(b["center"])), float(b["radius"])) for b in d.get(key, []))

        return cls(balls("missing"), balls("hitting"))


def in_base_element(F: ClosedSet, B: BaseElement) -> bool:
    for c, r in B.missing:
        if hits(F, carrier.closed_ball(c, r)):
            return False
    for c, r in B.hitting:
        if misses(F, carrier.open_ball(c, r)):
            return False
    return True
