"""Monte Carlo capacity functionals, the continuity-radius screen, and U(D) panels."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from epilab import carrier
from epilab.carrier import GridSpec, Point, as_point
from epilab.hyperspace import ClosedSet
from epilab.stochastic.samplers import BLOCK, Sampler, SetSampler, block_ranges


class ConfigError(ValueError):
    """A configuration that cannot produce a valid experiment."""


@dataclass(frozen=True)
class CapacityEstimate:
    value: float
    n_samples: int
    std_error: float

    @classmethod
    def from_count(cls, count: int, n: int) -> CapacityEstimate:
        p = count / n
        return cls(p, n, math.sqrt(p * (1.0 - p) / n))

    @classmethod
    def exact(cls, value: float, n: int = 1) -> CapacityEstimate:
        return cls(float(value), n, 0.0)

    def to_dict(self) -> dict:
        return {"value": self.value, "n_samples": self.n_samples, "std_error": self.std_error}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def scan(sampler: Sampler, seed: int, stream: int, n: int, fn: Callable, exact_ok: bool = True):
    """Sum fn(noise_block, block_id) over replicates 0..n-1 of one stream.

    Deterministic samplers are evaluated once and scaled when exact_ok is set.
    Returns (total, exact) where exact tells whether every replicate is identical.
    """
    if n < 1:
        raise ValueError("N must be at least 1")
    if sampler.deterministic and exact_ok:
        return np.asarray(fn(np.zeros((1, 0)), 0)) * n, True
    total = None
    for b, start, stop in block_ranges(n):
        noise = sampler.block_noise(seed, stream, b)[: stop - start]
        res = np.asarray(fn(noise, b))
        total = res if total is None else total + res
    return total, False


def _targets(grid, sets: Sequence[ClosedSet]) -> np.ndarray:
    for s in sets:
        if s.grid != grid:
            raise ValueError("target set lives on a different grid")
    return np.stack([s.flat for s in sets]) if sets else np.zeros((0, grid.size), dtype=bool)


def hit_counts(sampler: SetSampler, sets: Sequence[ClosedSet], n: int, seed: int, stream: int = 0):
    """Per-target counts of replicates whose set meets the target; returns (counts, exact)."""
    T = _targets(sampler.grid, sets)
    return scan(sampler, seed, stream, n, lambda noise, b: sampler.hit_matrix(noise, T).sum(axis=0))


def estimate_capacity(s: SetSampler, B: ClosedSet, N: int, seed: int, stream: int = 0) -> CapacityEstimate:
    """Fraction of replicates C_i with C_i meeting B."""
    counts, _ = hit_counts(s, [B], N, seed, stream)
    return CapacityEstimate.from_count(int(counts[0]), N)


def estimate_joint_hit(
    s: SetSampler,
    Bs: Sequence[ClosedSet],
    N: int,
    seed: int,
    miss: Sequence[bool] | None = None,
    stream: int = 0,
) -> CapacityEstimate:
    """Fraction of replicates hitting every B (or missing it, where miss[i] is set)."""
    if not Bs:
        raise ValueError("Bs must be nonempty")
    flags = np.zeros(len(Bs), dtype=bool) if miss is None else np.asarray(miss, dtype=bool)
    if flags.shape != (len(Bs),):
        raise ValueError("miss flags must match Bs")
    T = _targets(s.grid, Bs)

    def fn(noise, b):
        H = s.hit_matrix(noise, T)
        return np.count_nonzero((H != flags).all(axis=1))

    count, _ = scan(s, seed, stream, N, fn)
    return CapacityEstimate.from_count(int(count), N)


def inclusion_exclusion_union(joint: Mapping) -> float:
    """P(hit the union) from joint hitting probabilities of every nonempty index subset."""
    table = {frozenset(np.atleast_1d(k).tolist()): float(v) for k, v in joint.items()}
    universe = sorted(set().union(*table)) if table else []
    if not universe:
        raise ValueError("joint table is empty")
    total = 0.0
    for k in range(1, len(universe) + 1):
        for sub in itertools.combinations(universe, k):
            key = frozenset(sub)
            if key not in table:
                raise ValueError(f"missing joint probability for subset {sorted(sub)}")
            total += (-1) ** (k + 1) * table[key]
    return total


def joint_table(s: SetSampler, Bs: Sequence[ClosedSet], N: int, seed: int, stream: int = 0) -> dict:
    """Joint hitting estimates for every nonempty subset of Bs, from one replicate stream."""
    m = len(Bs)
    subsets = [sub for k in range(1, m + 1) for sub in itertools.combinations(range(m), k)]
    T = _targets(s.grid, Bs)

    def fn(noise, b):
        H = s.hit_matrix(noise, T)
        return np.array([np.count_nonzero(H[:, list(sub)].all(axis=1)) for sub in subsets])

    counts, _ = scan(s, seed, stream, N, fn)
    return {sub: CapacityEstimate.from_count(int(c), N) for sub, c in zip(subsets, counts)}


@dataclass(frozen=True)
class ScreenResult:
    radius: float
    accepted: bool
    outer: float
    inner: float
    std_error: float
    threshold: float


def screen_radii(
    s: SetSampler,
    center,
    candidate_radii: Sequence[float],
    delta: float,
    N: int,
    seed: int,
    kappa: float,
    use_analytic: bool = True,
    stream: int = 0,
) -> list[ScreenResult]:
    """Finite-difference continuity screen of r -> T(ball(center, r)) at each candidate radius."""
    g = s.grid
    if delta < g.h * (1 - carrier.SNAP):
        raise ValueError("delta must be at least the lattice resolution")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    c = as_point(g, center)
    outer = [carrier.closed_ball(c, r + delta) for r in candidate_radii]
    inner = [carrier.closed_ball(c, r - delta) for r in candidate_radii]
    analytic = use_analytic and s.analytic_capacity(outer[0]) is not None if candidate_radii else False
    if analytic:
        po = np.array([s.analytic_capacity(b) for b in outer])
        pi = np.array([s.analytic_capacity(b) for b in inner])
        se = np.zeros(len(candidate_radii))
    else:
        counts, _ = hit_counts(s, outer + inner, N, seed, stream)
        m = len(candidate_radii)
        po, pi = counts[:m] / N, counts[m:] / N
        d = np.clip(po - pi, 0.0, 1.0)
        se = np.sqrt(d * (1 - d) / N)
    out = []
    for r, a, b, e in zip(candidate_radii, po, pi, se):
        thr = kappa + 6.0 * e
        out.append(ScreenResult(float(r), bool(abs(a - b) <= thr), float(a), float(b), float(e), float(thr)))
    return out


def detect_continuity_radii(
    s: SetSampler,
    center,
    candidate_radii: Sequence[float],
    delta: float,
    N: int,
    seed: int,
    kappa: float,
    use_analytic: bool = True,
) -> list[float]:
    """Candidate radii whose closed balls pass the continuity screen for the law of s."""
    res = screen_radii(s, center, candidate_radii, delta, N, seed, kappa, use_analytic)
    return [r.radius for r in res if r.accepted]


@dataclass(frozen=True)
class RadiusLedger:
    base_radii: tuple[float, ...]
    offsets: tuple[float, ...]
    candidates: tuple[float, ...]
    accepted: tuple[float, ...]
    rejected: tuple[float, ...] = ()
    centers: tuple[tuple[float, ...], ...] = ()
    resolution: float = 0.0

    def __contains__(self, r: float) -> bool:
        return any(abs(r - a) <= 1e-9 for a in self.accepted)

    @property
    def offsets_below_resolution(self) -> bool:
        return bool(self.offsets) and self.offsets[-1] < self.resolution

    def to_dict(self) -> dict:
        return {
            "base_radii": list(self.base_radii),
            "offsets": list(self.offsets),
            "candidates": list(self.candidates),
            "accepted": list(self.accepted),
            "rejected": list(self.rejected),
            "centers": [list(c) for c in self.centers],
            "offsets_below_resolution": self.offsets_below_resolution,
        }


def candidate_radii(base_radii: Sequence[float], offsets: Sequence[float]) -> list[float]:
    """{r + s_k} then {r - s_k}, negative values dropped, duplicates removed in order."""
    offs = [float(s) for s in offsets]
    if any(s <= 0 for s in offs) or any(b >= a for a, b in zip(offs, offs[1:])):
        raise ValueError("offsets must be positive and strictly decreasing")
    raw = [r + s for r in base_radii for s in offs] + [r - s for r in base_radii for s in offs]
    out: list[float] = []
    for v in raw:
        v = round(v, 12)
        if v >= 0 and v not in out:
            out.append(v)
    return out


def build_D(
    base_radii: Sequence[float],
    offsets: Sequence[float],
    sampler: SetSampler,
    centers: Sequence,
    delta: float,
    N: int,
    seed: int,
    kappa: float,
    use_analytic: bool = True,
) -> RadiusLedger:
    """Screen the candidates {r +- s_k} against the law of sampler at every panel center."""
    cands = candidate_radii(base_radii, offsets)
    ok = np.ones(len(cands), dtype=bool)
    pts = [as_point(sampler.grid, c) for c in centers]
    for i, c in enumerate(pts):
        res = screen_radii(sampler, c, cands, delta, N, seed + i, kappa, use_analytic)
        ok &= np.array([r.accepted for r in res])
    accepted = tuple(r for r, a in zip(cands, ok) if a)
    if not accepted:
        raise ConfigError("continuity screen rejected every candidate radius")
    return RadiusLedger(
        tuple(float(r) for r in base_radii),
        tuple(float(s) for s in offsets),
        tuple(cands),
        accepted,
        tuple(r for r, a in zip(cands, ok) if not a),
        tuple(p.coords for p in pts),
        sampler.grid.h,
    )


@dataclass(frozen=True)
class DBallUnion:
    """Finite union of closed balls with lattice centers and ledger radii."""

    balls: tuple[tuple[Point, float], ...]
    label: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "balls", tuple(self.balls))
        if not self.balls:
            raise ValueError("a D-ball union needs at least one ball")

    @property
    def grid(self) -> GridSpec:
        return self.balls[0][0].grid

    def realize(self) -> ClosedSet:
        out = ClosedSet.empty(self.grid)
        for c, r in self.balls:
            out = out | carrier.closed_ball(c, r)
        return out

    def radii_in(self, ledger: RadiusLedger) -> bool:
        return all(r in ledger for _, r in self.balls)

    def describe(self) -> str:
        if self.label:
            return self.label
        return "+".join(f"{':'.join(f'{v:g}' for v in c.coords)}@{r:g}" for c, r in self.balls)


def random_panel(
    grid: GridSpec,
    ledger: RadiusLedger,
    centers: Sequence,
    size: int,
    max_union: int,
    seed: int,
) -> list[DBallUnion]:
    """Deterministic panel of D-ball unions drawn from the ledger."""
    rng = np.random.default_rng(seed)
    pts = [as_point(grid, c) for c in centers]
    out = []
    for _ in range(size):
        k = int(rng.integers(1, max_union + 1))
        balls = tuple(
            (pts[int(rng.integers(len(pts)))], float(ledger.accepted[int(rng.integers(len(ledger.accepted)))]))
            for _ in range(k)
        )
        out.append(DBallUnion(balls))
    return out


__all__ = [
    "BLOCK",
    "CapacityEstimate",
    "ConfigError",
    "DBallUnion",
    "RadiusLedger",
    "build_D",
    "candidate_radii",
    "detect_continuity_radii",
    "estimate_capacity",
    "estimate_joint_hit",
    "hit_counts",
    "inclusion_exclusion_union",
    "joint_table",
    "random_panel",
    "scan",
    "screen_radii",
]
