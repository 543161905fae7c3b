"""Discretized carrier space: lattice boxes in R^1/R^2 and the product space E x R.

Every lattice point is a member of the countable dense set; every subset of
the lattice is closed and compact. Computations are relative to the window,
so results approximate unbounded-space statements only when the relevant
sets stay inside it.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.spatial import cKDTree

if TYPE_CHECKING:
    from epilab.hyperspace import ClosedSet

# comparisons against radii/ordinates are snapped by this many lattice units
SNAP = 1e-9
_DECIMALS = 12

GRID_KEYS = ("dim", "lo", "hi", "h", "value_lo", "value_hi", "h_v")


def _as_tuple(v, dim: int) -> tuple[float, ...]:
    if np.ndim(v) == 0:
        return (float(v),) * dim
    out = tuple(float(x) for x in v)
    if len(out) != dim:
        raise ValueError(f"expected {dim} bounds, got {len(out)}")
    return out


def _steps(lo: float, hi: float, h: float) -> int:
    n = (hi - lo) / h
    k = round(n)
    if k < 1 or abs(n - k) > 1e-9 * max(1.0, abs(n)):
        raise ValueError(f"(hi - lo) / h must be a positive integer, got {n!r}")
    return k


@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice on an axis-aligned box plus an ordinate lattice for epigraphs."""

    dim: int = 1
    lo: tuple[float, ...] = (-4.0,)
    hi: tuple[float, ...] = (4.0,)
    h: float = 0.01
    value_lo: float = -4.0
    value_hi: float = 4.0
    h_v: float = 0.01

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        object.__setattr__(self, "lo", _as_tuple(self.lo, self.dim))
        object.__setattr__(self, "hi", _as_tuple(self.hi, self.dim))
        if self.h <= 0 or self.h_v <= 0:
            raise ValueError("spacings must be positive")
        for a, b in zip(self.lo, self.hi):
            if not b > a:
                raise ValueError("hi must exceed lo on every axis")
            _steps(a, b, self.h)
        if not self.value_hi > self.value_lo:
            raise ValueError("value_hi must exceed value_lo")
        _steps(self.value_lo, self.value_hi, self.h_v)

    # -- lattice geometry -------------------------------------------------
    @cached_property
    def shape(self) -> tuple[int, ...]:
        return tuple(_steps(a, b, self.h) + 1 for a, b in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            np.round(a + self.h * np.arange(n), _DECIMALS) for a, n in zip(self.lo, self.shape)
        )

    @cached_property
    def coords(self) -> np.ndarray:
        """Coordinates of all lattice points, shape (size, dim), in flat (C) order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        out = np.stack([m.ravel() for m in mesh], axis=1)
        out.setflags(write=False)
        return out

    @cached_property
    def ordinates(self) -> np.ndarray:
        n = _steps(self.value_lo, self.value_hi, self.h_v) + 1
        out = np.round(self.value_lo + self.h_v * np.arange(n), _DECIMALS)
        out.setflags(write=False)
        return out

    @cached_property
    def product(self) -> ProductGrid:
        return ProductGrid(self)

    @property
    def radius_snap(self) -> float:
        return SNAP * self.h

    @property
    def value_snap(self) -> float:
        return SNAP * self.h_v

    def index_of(self, coords) -> int:
        """Flat index of a lattice point; raises ValueError when off-lattice."""
        c = np.atleast_1d(np.asarray(coords, dtype=float))
        if c.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} coordinates, got {c.tolist()}")
        idx = []
        for x, a, n in zip(c, self.lo, self.shape):
            k = (x - a) / self.h
            kr = round(k)
            if abs(k - kr) > 1e-6 or not 0 <= kr < n:
                raise ValueError(f"{c.tolist()} is not a lattice point of this grid")
            idx.append(kr)
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    def nearest_index(self, coords) -> int:
        """Flat index of the nearest lattice point (half-steps round up, clipped to the window)."""
        c = np.atleast_1d(np.asarray(coords, dtype=float))
        idx = [
            int(np.clip(np.floor((x - a) / self.h + 0.5 + 1e-9), 0, n - 1))
            for x, a, n in zip(c, self.lo, self.shape)
        ]
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    def nearest_indices(self, x: np.ndarray) -> np.ndarray:
        """Vectorized nearest_index for 1-D grids."""
        if self.dim != 1:
            raise ValueError("nearest_indices is only defined for 1-D grids")
        k = np.floor((np.asarray(x, dtype=float) - self.lo[0]) / self.h + 0.5 + 1e-9)
        return np.clip(k, 0, self.shape[0] - 1).astype(np.intp)

    def point(self, index: int) -> Point:
        return Point(self, tuple(float(v) for v in self.coords[index]))

    def nearest(self, coords) -> Point:
        return self.point(self.nearest_index(coords))

    def ordinate_index(self, a: float) -> int:
        k = (a - self.value_lo) / self.h_v
        kr = round(k)
        if abs(k - kr) > 1e-6 or not 0 <= kr < len(self.ordinates):
            raise ValueError(f"{a} is not on the ordinate lattice")
        return int(kr)

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "lo": list(self.lo),
            "hi": list(self.hi),
            "h": self.h,
            "value_lo": self.value_lo,
            "value_hi": self.value_hi,
            "h_v": self.h_v,
        }

    def to_config(self, section: str = "grid") -> str:
        cp = configparser.ConfigParser()
        cp[section] = {
            "dim": str(self.dim),
            "lo": " ".join(repr(v) for v in self.lo),
            "hi": " ".join(repr(v) for v in self.hi),
            "h": repr(self.h),
            "value_lo": repr(self.value_lo),
            "value_hi": repr(self.value_hi),
            "h_v": repr(self.h_v),
        }
        from io import StringIO

        buf = StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_section(cls, section) -> GridSpec:
        unknown = set(section.keys()) - set(GRID_KEYS)
        if unknown:
            raise ValueError(f"unknown grid keys: {sorted(unknown)}")
        dim = int(section.get("dim", 1))
        kw: dict = {"dim": dim}
        for key in ("lo", "hi"):
            if key in section:
                kw[key] = tuple(float(t) for t in section[key].split())
        for key in ("h", "value_lo", "value_hi", "h_v"):
            if key in section:
                kw[key] = float(section[key])
        return cls(**kw)

    @classmethod
    def from_config(cls, text: str, section: str = "grid") -> GridSpec:
        cp = configparser.ConfigParser()
        cp.read_string(text)
        return cls.from_section(cp[section])


@dataclass(frozen=True)
class ProductGrid:
    """Lattice of E x R: base lattice times the ordinate lattice, with the max metric."""

    base: GridSpec

    @property
    def shape(self) -> tuple[int, ...]:
        return self.base.shape + (len(self.base.ordinates),)

    @property
    def size(self) -> int:
        return self.base.size * len(self.base.ordinates)

    @property
    def dim(self) -> int:
        return self.base.dim + 1

    @property
    def radius_snap(self) -> float:
        return SNAP * min(self.base.h, self.base.h_v)

    @cached_property
    def coords(self) -> np.ndarray:
        """Coordinates (x..., a) of all product lattice points in flat order."""
        n_ord = len(self.base.ordinates)
        base = np.repeat(self.base.coords, n_ord, axis=0)
        ords = np.tile(self.base.ordinates, self.base.size)[:, None]
        out = np.hstack([base, ords])
        out.setflags(write=False)
        return out

    def index_of(self, p: ProductPoint) -> int:
        return p.base.index * len(self.base.ordinates) + self.base.ordinate_index(p.ordinate)

    def point(self, index: int) -> ProductPoint:
        i, j = divmod(int(index), len(self.base.ordinates))
        return ProductPoint(self.base.point(i), float(self.base.ordinates[j]))


@dataclass(frozen=True)
class Point:
    grid: GridSpec = field(repr=False)
    coords: tuple[float, ...]

    def __post_init__(self):
        c = self.coords
        if np.ndim(c) == 0:
            c = (float(c),)
        object.__setattr__(self, "coords", tuple(float(v) for v in c))
        self.grid.index_of(self.coords)

    @cached_property
    def index(self) -> int:
        return self.grid.index_of(self.coords)


@dataclass(frozen=True)
class ProductPoint:
    base: Point
    ordinate: float

    def __post_init__(self):
        self.base.grid.ordinate_index(self.ordinate)

    @property
    def grid(self) -> ProductGrid:
        return self.base.grid.product

    @property
    def coords(self) -> tuple[float, ...]:
        return self.base.coords + (self.ordinate,)

    @cached_property
    def index(self) -> int:
        return self.grid.index_of(self)


def as_point(grid: GridSpec, p) -> Point:
    """Accept a Point, a scalar (1-D) or a coordinate tuple."""
    if isinstance(p, Point):
        if p.grid != grid:
            raise ValueError("point belongs to a different grid")
        return p
    return Point(grid, p)


def _check_same(p, q):
    if p.grid != q.grid:
        raise ValueError("points live on different grids")


def dist(p: Point, q: Point) -> float:
    """Euclidean distance between two lattice points."""
    _check_same(p, q)
    return float(math.dist(p.coords, q.coords))


def product_dist(p: ProductPoint, q: ProductPoint) -> float:
    """max{d(x, y), |alpha - beta|} on E x R."""
    _check_same(p.base, q.base)
    return max(dist(p.base, q.base), abs(p.ordinate - q.ordinate))


def _base_distances(grid: GridSpec, center: Point) -> np.ndarray:
    return np.sqrt(((grid.coords - np.asarray(center.coords)) ** 2).sum(axis=1))


def closed_ball(center: Point, r: float) -> ClosedSet:
    """All lattice points within distance r of center; empty for r < 0."""
    from epilab.hyperspace import ClosedSet

    grid = center.grid
    if r < 0:
        return ClosedSet.empty(grid)
    return ClosedSet(grid, _base_distances(grid, center) <= r + grid.radius_snap)


def open_ball(center: Point, r: float) -> ClosedSet:
    """Lattice points with dist < r (strict), the lattice stand-in for an open ball."""
    from epilab.hyperspace import ClosedSet

    grid = center.grid
    return ClosedSet(grid, _base_distances(grid, center) < r - grid.radius_snap)


def product_closed_ball(center: ProductPoint, r: float) -> ClosedSet:
    """Closed ball of the max metric on E x R."""
    from epilab.hyperspace import ClosedSet

    grid = center.base.grid
    pg = grid.product
    if r < 0:
        return ClosedSet.empty(pg)
    d_base = _base_distances(grid, center.base)
    d_ord = np.abs(grid.ordinates - center.ordinate)
    d = np.maximum.outer(d_base, d_ord)
    return ClosedSet(pg, d <= r + pg.radius_snap)


def ordinate_interval(grid: GridSpec, lo: float, hi: float) -> np.ndarray:
    """Boolean mask over the ordinate lattice for [lo, hi]."""
    snap = grid.value_snap
    a = grid.ordinates
    return (a >= lo - snap) & (a <= hi + snap)


def stencil(grid, r: float) -> np.ndarray:
    """Structuring element of lattice offsets inside the closed ball of radius r at the origin."""
    if isinstance(grid, ProductGrid):
        b = grid.base
        kb = int(math.floor(r / b.h + 1e-9))
        kv = int(math.floor(r / b.h_v + 1e-9))
        offs = [np.arange(-kb, kb + 1) * b.h] * b.dim
        mesh = np.meshgrid(*offs, indexing="ij")
        d_base = np.sqrt(sum(m**2 for m in mesh))
        ok_base = d_base <= r + grid.radius_snap
        ok_ord = np.abs(np.arange(-kv, kv + 1) * b.h_v) <= r + grid.radius_snap
        return ok_base[..., None] & ok_ord
    k = int(math.floor(r / grid.h + 1e-9))
    offs = [np.arange(-k, k + 1) * grid.h] * grid.dim
    mesh = np.meshgrid(*offs, indexing="ij")
    return np.sqrt(sum(m**2 for m in mesh)) <= r + grid.radius_snap


def distances_to(grid, target: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Distance from each queried flat index to the set of target flat indices.

    Returns +inf everywhere when target is empty.
    """
    query = np.asarray(query, dtype=np.intp)
    if len(target) == 0:
        return np.full(len(query), np.inf)
    if len(query) == 0:
        return np.zeros(0)
    pts = grid.coords
    if isinstance(grid, GridSpec):
        tree = cKDTree(pts[target])
        d, _ = tree.query(pts[query], k=1, p=2)
        return d
    tree = cKDTree(pts[target])
    cheb, _ = tree.query(pts[query], k=1, p=np.inf)
    if grid.base.dim == 1:
        return cheb
    # max(euclid(base), |da|) lies within [cheb, sqrt(2) * cheb]
    out = np.empty(len(query))
    tp = pts[target]
    for i, (q, c) in enumerate(zip(pts[query], cheb)):
        cand = tree.query_ball_point(q, math.sqrt(2.0) * c + 1e-12, p=np.inf)
        diff = tp[cand] - q
        out[i] = np.maximum(np.sqrt((diff[:, :-1] ** 2).sum(axis=1)), np.abs(diff[:, -1])).min()
    return out


def grid_from_dict(d: dict) -> GridSpec:
    return GridSpec(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


def as_points(grid: GridSpec, pts: Sequence) -> list[Point]:
    return [as_point(grid, p) for p in pts]
