"""Seeded samplers of random closed sets and normal integrands.

Replicate ``rep`` of stream ``stream`` is drawn from the generator seeded by
``SeedSequence(seed, spawn_key=(stream, rep // BLOCK, purpose))`` at offset
``rep % BLOCK``, so every replicate is a pure function of
(seed, stream, replicate) no matter how replicates are batched.
"""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np
from scipy import stats

from epilab.argmin import eps_argmin_mask
from epilab.carrier import GridSpec
from epilab.hyperspace import ClosedSet
from epilab.lsc import LscFunction

BLOCK = 4096

NOISE = 0
SELECTION = 1


def block_rng(seed: int, stream: int, block: int, purpose: int = NOISE) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(block), int(purpose)))
    return np.random.Generator(np.random.PCG64(ss))


def block_ranges(n: int):
    """Yield (block, start, stop) covering replicates 0..n-1."""
    for b in range(math.ceil(n / BLOCK)):
        yield b, b * BLOCK, min(n, (b + 1) * BLOCK)


class Sampler:
    """Common machinery: per-replicate noise drawn block-wise from derived substreams."""

    kind = "abstract"
    deterministic = False

    def __init__(self, grid: GridSpec, name: str, **params):
        self.grid = grid
        self.name = name
        self.params = params

    def noise(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Raw randomness for ``count`` consecutive replicates, shape (count, k)."""
        return np.zeros((count, 0))

    def block_noise(self, seed: int, stream: int, block: int) -> np.ndarray:
        if self.deterministic:
            return np.zeros((BLOCK, 0))
        return self.noise(block_rng(seed, stream, block), BLOCK)

    def replicate_noise(self, seed: int, rep: int, stream: int = 0) -> np.ndarray:
        b, off = divmod(int(rep), BLOCK)
        return self.block_noise(seed, stream, b)[off : off + 1]

    def describe(self) -> dict:
        return {"name": self.name, "kind": self.kind, "params": dict(self.params)}

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class SetSampler(Sampler):
    kind = "set"

    def masks(self, noise: np.ndarray) -> np.ndarray:
        """Boolean membership matrix (replicates, lattice size)."""
        raise NotImplementedError

    def hit_matrix(self, noise: np.ndarray, targets: np.ndarray) -> np.ndarray:
        """(replicates, m) indicators of C_i meeting each of m target masks (m, size)."""
        m = self.masks(noise).astype(np.float32)
        return (m @ targets.T.astype(np.float32)) > 0.5

    def draw(self, seed: int, rep: int, stream: int = 0) -> ClosedSet:
        return ClosedSet(self.grid, self.masks(self.replicate_noise(seed, rep, stream))[0])

    def analytic_capacity(self, B: ClosedSet) -> float | None:
        return None


class DeterministicSet(SetSampler):
    deterministic = True

    def __init__(self, grid: GridSpec, members: ClosedSet, name: str = "deterministic", **params):
        super().__init__(grid, name, **params)
        self.members = members

    def masks(self, noise):
        return np.broadcast_to(self.members.flat, (len(noise), self.grid.size)).copy()

    def analytic_capacity(self, B: ClosedSet) -> float:
        return float((self.members.flat & B.flat).any())


class UniformSingleton(SetSampler):
    """C = {nearest lattice point to X}, X uniform on [a, b] (1-D grids)."""

    def __init__(self, grid: GridSpec, a: float = 0.0, b: float = 1.0, name: str = "uniform-singleton"):
        if grid.dim != 1:
            raise ValueError("uniform singleton sampler needs a 1-D grid")
        if not b > a:
            raise ValueError("need b > a")
        super().__init__(grid, name, a=a, b=b)
        self.a, self.b = float(a), float(b)

    def noise(self, rng, count):
        return rng.random((count, 1))

    def points(self, noise) -> np.ndarray:
        x = self.a + (self.b - self.a) * noise[:, 0]
        return self.grid.nearest_indices(x)

    def masks(self, noise):
        out = np.zeros((len(noise), self.grid.size), dtype=bool)
        out[np.arange(len(noise)), self.points(noise)] = True
        return out

    def hit_matrix(self, noise, targets):
        return targets[:, self.points(noise)].T

    def analytic_capacity(self, B: ClosedSet) -> float:
        # nearest(x) == k  iff  x in [x_k - h/2, x_k + h/2); end cells absorb the tails
        g = self.grid
        x = g.axes[0]
        left = x - g.h / 2
        right = x + g.h / 2
        left[0], right[-1] = -np.inf, np.inf
        lo = np.maximum(left, self.a)
        hi = np.minimum(right, self.b)
        mass = np.clip(hi - lo, 0.0, None) / (self.b - self.a)
        return float(mass[B.flat].sum())


class IntegrandSampler(Sampler):
    kind = "integrand"
    unique_argmin = False

    def values(self, noise: np.ndarray) -> np.ndarray:
        """Function values (replicates, lattice size)."""
        raise NotImplementedError

    def draw(self, seed: int, rep: int, stream: int = 0) -> LscFunction:
        return LscFunction(self.grid, self.values(self.replicate_noise(seed, rep, stream))[0])

    def argmin_pmf(self) -> np.ndarray | None:
        """Law of the (a.s. unique) lattice minimizer, when known in closed form."""
        return None

    def states(self, noise: np.ndarray):
        """(state index per replicate, value rows) when the law has finitely many outcomes, else None."""
        return None

    def infima(self, noise: np.ndarray, index_sets) -> np.ndarray:
        """(replicates, k) infima over each lattice index set; +inf for empty sets."""
        st = self.states(noise)
        vals = self.values(noise) if st is None else st[1]
        out = np.full((len(vals), len(index_sets)), np.inf)
        for j, ix in enumerate(index_sets):
            if len(ix):
                out[:, j] = vals[:, ix].min(axis=1)
        return out if st is None else out[st[0]]


class DeterministicIntegrand(IntegrandSampler):
    deterministic = True

    def __init__(self, f: LscFunction, name: str = "deterministic", unique_argmin: bool = False, **params):
        super().__init__(f.grid, name, **params)
        self.f = f
        self.unique_argmin = unique_argmin

    def values(self, noise):
        return np.broadcast_to(self.f.values, (len(noise), self.grid.size)).copy()


def _discretized_pmf(grid: GridSpec, cdf) -> np.ndarray:
    x = grid.axes[0]
    edges = np.concatenate([x - grid.h / 2, [x[-1] + grid.h / 2]])
    c = cdf(edges)
    c[0], c[-1] = 0.0, 1.0
    return np.diff(c)


class RandomQuadratic(IntegrandSampler):
    """Z(t) = t^2 - 2 t W with W the lattice rounding of a Student-t(df) or standard normal draw.

    The minimizer is W itself (clipped to the window), so it is a.s. unique.
    """

    unique_argmin = True

    def __init__(self, grid: GridSpec, df: float | None = None, name: str = "random-quadratic"):
        if grid.dim != 1:
            raise ValueError("random quadratic sampler needs a 1-D grid")
        super().__init__(grid, name, law="normal" if df is None else "student-t", df=df)
        self.df = df

    def noise(self, rng, count):
        if self.df is None:
            return rng.standard_normal((count, 1))
        return rng.standard_t(self.df, (count, 1))

    def minimizers(self, noise) -> np.ndarray:
        return self.grid.nearest_indices(noise[:, 0])

    def values(self, noise):
        w = self.grid.axes[0][self.minimizers(noise)]
        t = self.grid.axes[0]
        return t[None, :] ** 2 - 2.0 * w[:, None] * t[None, :]

    def infima(self, noise, index_sets):
        # t^2 - 2tw is minimized over a lattice interval at the member closest to w
        if not all(len(ix) == 0 or ix[-1] - ix[0] + 1 == len(ix) for ix in index_sets):
            return super().infima(noise, index_sets)
        k = self.minimizers(noise)
        t = self.grid.axes[0]
        w = t[k]
        out = np.full((len(k), len(index_sets)), np.inf)
        for j, ix in enumerate(index_sets):
            if len(ix):
                tk = t[np.clip(k, ix[0], ix[-1])]
                out[:, j] = tk**2 - 2.0 * w * tk
        return out

    def argmin_pmf(self):
        law = stats.norm if self.df is None else stats.t(self.df)
        return _discretized_pmf(self.grid, law.cdf)


class DoubleWellTilt(IntegrandSampler):
    """Z(t) = (t^2 - 1)^2 + S * eta * t with S = +-1 equiprobable; eta = 0 is deterministic."""

    def __init__(self, grid: GridSpec, eta: float, name: str = "double-well"):
        if grid.dim != 1:
            raise ValueError("double-well sampler needs a 1-D grid")
        super().__init__(grid, name, eta=eta)
        self.eta = float(eta)
        self.deterministic = self.eta == 0.0
        self.unique_argmin = self.eta != 0.0

    @cached_property
    def _base(self):
        t = self.grid.axes[0]
        return (t**2 - 1.0) ** 2

    def noise(self, rng, count):
        return (2 * rng.integers(0, 2, (count, 1)) - 1).astype(float)

    def values(self, noise):
        t = self.grid.axes[0]
        if self.deterministic:
            return np.broadcast_to(self._base, (len(noise), self.grid.size)).copy()
        return self._base[None, :] + self.eta * noise[:, :1] * t[None, :]

    @cached_property
    def _rows(self):
        return self.values(np.array([[-1.0], [1.0]]))

    def states(self, noise):
        if self.deterministic:
            return None
        return (noise[:, 0] > 0).astype(np.intp), self._rows


class ArgminSetSampler(SetSampler):
    """The random closed set A(Z, eps) of eps-optimal solutions of an integrand sampler."""

    def __init__(self, integrand: IntegrandSampler, eps: float = 0.0, name: str | None = None):
        super().__init__(integrand.grid, name or f"A({integrand.name}, {eps})", eps=eps)
        self.integrand = integrand
        self.eps = float(eps)
        self.deterministic = integrand.deterministic

    def noise(self, rng, count):
        return self.integrand.noise(rng, count)

    def block_noise(self, seed, stream, block):
        return self.integrand.block_noise(seed, stream, block)

    def masks(self, noise):
        st = self.integrand.states(noise)
        if st is not None:
            idx, rows = st
            return eps_argmin_mask(rows, self.eps, self.grid.value_snap)[idx]
        return eps_argmin_mask(self.integrand.values(noise), self.eps, self.grid.value_snap)

    def hit_matrix(self, noise, targets):
        if isinstance(self.integrand, RandomQuadratic) and self.eps == 0.0:
            return targets[:, self.integrand.minimizers(noise)].T
        st = self.integrand.states(noise)
        if st is not None:
            idx, rows = st
            m = eps_argmin_mask(rows, self.eps, self.grid.value_snap).astype(np.float32)
            return ((m @ targets.T.astype(np.float32)) > 0.5)[idx]
        return super().hit_matrix(noise, targets)

    def analytic_capacity(self, B: ClosedSet) -> float | None:
        if self.integrand.deterministic:
            m = self.masks(np.zeros((1, 0)))[0]
            return float((m & B.flat).any())
        pmf = self.integrand.argmin_pmf()
        if pmf is not None and self.eps == 0.0:
            return float(pmf[B.flat].sum())
        return None
