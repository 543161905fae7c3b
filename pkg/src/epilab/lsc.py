"""Extended-real functions on the lattice, infimum functionals, and epigraphs.

Extended reals are IEEE floats; +inf and -inf are the two infinite values.
On a finite lattice every function is lower semicontinuous, so an
``LscFunction`` is a sample of an lsc function on E.
"""

from __future__ import annotations

import csv
import io
from typing import Callable, Sequence

import numpy as np

from epilab import carrier
from epilab.carrier import GridSpec, ProductPoint, as_point
from epilab.hyperspace import ClosedSet, FellReport, fell_converges, hits


class LscFunction:
    __slots__ = ("grid", "values")

    def __init__(self, grid: GridSpec, values):
        v = np.array(values, dtype=float, copy=True).reshape(-1)
        if v.shape != (grid.size,):
            raise ValueError(f"expected {grid.size} values, got {v.size}")
        if np.isnan(v).any():
            raise ValueError("NaN is not an extended real")
        v.setflags(write=False)
        self.grid = grid
        self.values = v

    @classmethod
    def from_callable(cls, grid: GridSpec, fn: Callable[[np.ndarray], np.ndarray]) -> LscFunction:
        """Evaluate fn on lattice coordinates (1-D: array of x; 2-D: array of shape (size, 2))."""
        x = grid.coords[:, 0] if grid.dim == 1 else grid.coords
        return cls(grid, np.broadcast_to(np.asarray(fn(x), dtype=float), (grid.size,)))

    @classmethod
    def constant(cls, grid: GridSpec, c: float) -> LscFunction:
        return cls(grid, np.full(grid.size, float(c)))

    def __call__(self, p) -> float:
        return float(self.values[as_point(self.grid, p).index])

    def __add__(self, c: float) -> LscFunction:
        return LscFunction(self.grid, self.values + float(c))

    def __eq__(self, other):
        if not isinstance(other, LscFunction):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    __hash__ = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "value"])
        for i, v in enumerate(self.values):
            w.writerow([i, _fmt(v)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, grid: GridSpec, text: str) -> LscFunction:
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["index", "value"]:
            raise ValueError("expected a CSV with header 'index,value'")
        vals = np.full(grid.size, np.nan)
        for idx, tok in rows[1:]:
            vals[int(idx)] = _parse(tok)
        if np.isnan(vals).any():
            raise ValueError("CSV does not cover every lattice point")
        return cls(grid, vals)


def _fmt(v: float) -> str:
    if v == np.inf:
        return "+inf"
    if v == -np.inf:
        return "-inf"
    return repr(float(v))


def _parse(tok: str) -> float:
    tok = tok.strip()
    if tok == "+inf":
        return np.inf
    if tok == "-inf":
        return -np.inf
    v = float(tok)
    if not np.isfinite(v):
        raise ValueError(f"bad value token {tok!r}")
    return v


def value_le(v, threshold, grid: GridSpec):
    """v <= threshold, with ties inside the ordinate snap counted as <=."""
    return v <= threshold + grid.value_snap


def inf_over(f: LscFunction, A: ClosedSet) -> float:
    """Infimum of f over A (attained on the lattice); +inf for empty A."""
    if A.grid != f.grid:
        raise ValueError("function and set live on different grids")
    if A.is_empty:
        return np.inf
    return float(f.values[A.flat].min())


def epigraph(f: LscFunction) -> ClosedSet:
    """{(x, a): f(x) <= a} on the product lattice.

    Values below value_lo are clipped to value_lo (so -inf fills the column);
    +inf columns are empty.
    """
    g = f.grid
    clipped = np.maximum(f.values, g.value_lo)
    mask = value_le(clipped[:, None], g.ordinates[None, :], g)
    return ClosedSet(g.product, mask)


def epi_hits_product_ball(f: LscFunction, x, r: float, alpha: float) -> bool:
    """epi(f) meets the closed product ball around (x, alpha), via inf over the base ball <= r + alpha."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    x = as_point(f.grid, x)
    return bool(value_le(inf_over(f, carrier.closed_ball(x, r)), r + alpha, f.grid))


def epi_misses_product_ball(f: LscFunction, x, r: float, alpha: float) -> bool:
    return not epi_hits_product_ball(f, x, r, alpha)


def epi_hits_direct(f: LscFunction, x, r: float, alpha: float) -> bool:
    """Direct test: epigraph(f) intersected with the product closed ball."""
    x = as_point(f.grid, x)
    return hits(epigraph(f), carrier.product_closed_ball(ProductPoint(x, alpha), r))


def epi_converges(
    seq: Sequence[LscFunction], f: LscFunction, tail_start: int | None = None, tol: float = 0.02
) -> FellReport:
    """Epi-convergence as Fell convergence of epigraphs on the product lattice."""
    g = f.grid
    if any(s.grid != g for s in seq):
        raise ValueError("all functions must share one grid")
    if tol < max(g.h, g.h_v) * (1 - carrier.SNAP):
        raise ValueError("tol must be at least max(h, h_v)")
    return fell_converges([epigraph(s) for s in seq], epigraph(f), tail_start, tol)
