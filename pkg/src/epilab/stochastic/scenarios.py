"""Library of reference scenarios with their analytic oracles and default panels.

Index sets are chosen so that the second half of every sequence sits on
the lattice limit exactly (deterministic scenarios) or within a small
fraction of the default tolerance (random ones).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from epilab import carrier
from epilab.carrier import GridSpec
from epilab.hyperspace import ClosedSet
from epilab.lsc import LscFunction
from epilab.stochastic.estimators import DBallUnion, RadiusLedger, build_D, random_panel
from epilab.stochastic.samplers import (
    ArgminSetSampler,
    DeterministicIntegrand,
    DeterministicSet,
    DoubleWellTilt,
    RandomQuadratic,
    Sampler,
    UniformSingleton,
)
from epilab.stochastic.testers import EpiEvent, as_events

# descriptive tags for the convergence statements a scenario exercises
HITTING = "hitting-class-convergence"
EPI_DIST = "epi-dist-criterion"
UPPER_FELL = "argmin-upper-fell"
ARGMIN_FELL = "argmin-fell"
SELECTION = "selection-portmanteau"
INCL_EXCL = "inclusion-exclusion"
SCREEN = "continuity-screen"
OUTER_LIMIT = "outer-limit-inclusion"


@dataclass
class LedgerSpec:
    base_radii: tuple[float, ...]
    offsets: tuple[float, ...]
    centers: tuple[float, ...]
    panel_size: int = 20
    max_union: int = 3
    panel_seed: int = 20240601
    kappa: float = 0.02


@dataclass
class Scenario:
    id: str
    title: str
    kind: str  # "set" or "integrand"
    indices: list
    sequence: list[Sampler]
    limit: Sampler
    tags: tuple[str, ...]
    oracles: tuple[str, ...] = ()
    params: dict = field(default_factory=dict)
    eps_seq: list[float] | None = None
    eps: float = 0.0
    epi_convergent: bool = False
    unique_argmin: bool = False
    ledger_spec: LedgerSpec | None = None
    epi_panel: list[list[EpiEvent]] = field(default_factory=list)
    k_panel: list[list[ClosedSet]] = field(default_factory=list)
    f_panel: list[ClosedSet] = field(default_factory=list)
    explicit_u: list[DBallUnion] | None = None
    alt_limits: dict = field(default_factory=dict)
    deterministic_functions: Callable | None = None

    @property
    def grid(self) -> GridSpec:
        return self.limit.grid

    def hitting_limit(self):
        """Set-valued limit used by the hitting tests (argmin set for integrand scenarios)."""
        if self.kind == "set":
            return self.limit
        return ArgminSetSampler(self.limit, 0.0)

    def hitting_sequence(self):
        if self.kind == "set":
            return list(self.sequence)
        return [ArgminSetSampler(s, e) for s, e in zip(self.sequence, self.eps_seq)]

    def ledger(self, N: int = 200_000, seed: int = 0, kappa: float | None = None) -> RadiusLedger:
        ls = self.ledger_spec
        k = ls.kappa if kappa is None else kappa
        return build_D(ls.base_radii, ls.offsets, self.hitting_limit(), ls.centers, self.grid.h, N, seed, k)

    def u_panel(self, ledger: RadiusLedger) -> list[DBallUnion]:
        if self.explicit_u is not None:
            return list(self.explicit_u)
        ls = self.ledger_spec
        return random_panel(self.grid, ledger, ls.centers, ls.panel_size, ls.max_union, ls.panel_seed)

    def listing(self) -> str:
        par = ", ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        lines = [
            f"{self.id}  {self.title}",
            f"    kind: {self.kind}; indices: {_span(self.indices)}; params: {par or '-'}",
            f"    oracles: {', '.join(self.oracles) or '-'}",
            f"    exercises: {', '.join(self.tags)}",
        ]
        return "\n".join(lines)


def _span(ix) -> str:
    if len(ix) <= 4:
        return ", ".join(str(i) for i in ix)
    return f"{ix[0]}, {ix[1]}, ..., {ix[-1]} ({len(ix)} terms)"


def _ball(grid, c, r) -> ClosedSet:
    return carrier.closed_ball(carrier.as_point(grid, c), r)


def _singleton(grid, x) -> ClosedSet:
    return ClosedSet.from_indices(grid, [grid.nearest_index((x,))])


def shrinking_singletons(grid: GridSpec, n_max: int = 400) -> Scenario:
    ns = list(range(1, n_max + 1))
    seq = [DeterministicSet(grid, _singleton(grid, 1.0 / n), name=f"{{1/{n}}}") for n in ns]
    return Scenario(
        "S1",
        "deterministic shrinking singletons C_n = {1/n} -> {0}",
        "set",
        ns,
        seq,
        DeterministicSet(grid, _singleton(grid, 0.0), name="{0}"),
        (HITTING, SCREEN),
        ("exact hit indicators", "step-function capacity"),
        {"n_max": n_max},
        ledger_spec=LedgerSpec(
            tuple(round(0.1 * k, 12) for k in range(1, 11)), (0.05, 0.025), (-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0)
        ),
    )


def uniform_singletons(grid: GridSpec, k_max: int = 15) -> Scenario:
    ns = [2**k for k in range(k_max + 1)]
    seq = [UniformSingleton(grid, 0.0, 1.0 + 1.0 / n, name=f"U[0,1+1/{n}]") for n in ns]
    return Scenario(
        "S2",
        "uniform random singleton {X_n}, X_n ~ U[0, 1 + 1/n] -> U[0, 1]",
        "set",
        ns,
        seq,
        UniformSingleton(grid, 0.0, 1.0, name="U[0,1]"),
        (HITTING, INCL_EXCL, SCREEN),
        ("interval-overlap capacity",),
        {"k_max": k_max},
        ledger_spec=LedgerSpec((0.1, 0.25, 0.5), (0.05, 0.025), (0.0, 0.25, 0.5, 0.75, 1.0), kappa=0.05),
    )


def random_quadratics(grid: GridSpec, k_max: int = 10) -> Scenario:
    ns = [2**k for k in range(k_max + 1)]
    seq = [RandomQuadratic(grid, df=float(n), name=f"t^2-2tW, W~t({n})") for n in ns]
    return Scenario(
        "S3",
        "random quadratics Z_n(t) = t^2 - 2 t W_n, W_n ~ Student-t(n) -> standard normal",
        "integrand",
        ns,
        seq,
        RandomQuadratic(grid, None, name="t^2-2tW, W~N(0,1)"),
        (EPI_DIST, UPPER_FELL, ARGMIN_FELL, SELECTION, HITTING),
        ("argmin law = lattice-discretized noise law",),
        {"k_max": k_max},
        eps_seq=[0.0] * len(ns),
        eps=0.0,
        epi_convergent=True,
        unique_argmin=True,
        ledger_spec=LedgerSpec((0.25, 0.5, 1.0), (0.1, 0.05), (-1.0, 0.0, 0.5, 1.0), panel_size=12),
        epi_panel=[
            as_events(grid, [(0.0, 0.5, -0.3)]),
            as_events(grid, [(1.0, 0.25, -1.5)]),
            as_events(grid, [(-1.0, 0.5, 0.25)]),
            as_events(grid, [(0.0, 0.5, -0.3), (1.0, 0.25, -1.5)]),
        ],
        k_panel=[
            [_ball(grid, 0.0, 0.5)],
            [_ball(grid, 1.0, 0.25)],
            [_ball(grid, -1.0, 0.25), _ball(grid, 1.0, 0.25)],
            [ClosedSet.full(grid)],
        ],
        f_panel=[_ball(grid, 0.0, 0.5), _ball(grid, 1.0, 0.25), _ball(grid, 3.5, 0.1), ClosedSet.full(grid)],
    )


def double_well(grid: GridSpec, k_max: int = 8) -> Scenario:
    ns = [2**k for k in range(k_max + 1)]
    seq = [DoubleWellTilt(grid, 1.0 / n, name=f"double-well, tilt +-1/{n}") for n in ns]
    return Scenario(
        "S4",
        "double well (t^2 - 1)^2 with vanishing random tilt +-t/n",
        "integrand",
        ns,
        seq,
        DoubleWellTilt(grid, 0.0, name="double-well, no tilt"),
        (UPPER_FELL, SELECTION, ARGMIN_FELL, INCL_EXCL),
        ("limit argmin {-1, 1}", "tilt sign symmetry"),
        {"k_max": k_max},
        eps_seq=[0.0] * len(ns),
        eps=0.0,
        epi_convergent=True,
        unique_argmin=False,
        ledger_spec=LedgerSpec((0.1, 0.25, 0.5), (0.05, 0.025), (-1.0, 0.0, 1.0), panel_size=8),
        epi_panel=[
            as_events(grid, [(1.0, 0.25, -0.1)]),
            as_events(grid, [(0.0, 0.5, 0.2)]),
            as_events(grid, [(0.0, 0.5, -0.1)]),
            as_events(grid, [(2.0, 0.5, 0.5)]),
        ],
        k_panel=[
            [_ball(grid, 1.0, 0.1)],
            [_ball(grid, -1.0, 0.1)],
            [_ball(grid, 0.0, 0.1)],
            [_ball(grid, 3.5, 0.1)],
            [ClosedSet.full(grid)],
        ],
        f_panel=[_ball(grid, 1.0, 0.05), _ball(grid, -1.0, 0.05), _ball(grid, 0.0, 0.05), ClosedSet.full(grid)],
    )


def _dip(grid: GridSpec, n: int) -> LscFunction:
    v = np.zeros(grid.size)
    v[grid.nearest_index((1.0 / n,))] = -1.0
    return LscFunction(grid, v)


def localized_dips(grid: GridSpec, n_max: int = 400) -> Scenario:
    ns = list(range(1, n_max + 1))
    fs = [_dip(grid, n) for n in ns]
    g = _dip(grid, 10**9)
    zero = LscFunction.constant(grid, 0.0)
    return Scenario(
        "S5",
        "localized dips f_n = -1 at 1/n, 0 elsewhere: epi-limit differs from pointwise limit",
        "integrand",
        ns,
        [DeterministicIntegrand(f, name=f"dip at 1/{n}", unique_argmin=True) for f, n in zip(fs, ns)],
        DeterministicIntegrand(g, name="dip at 0", unique_argmin=True),
        (EPI_DIST, UPPER_FELL, OUTER_LIMIT),
        ("epi-limit: -1 at 0, 0 elsewhere", "pointwise limit: 0"),
        {"n_max": n_max},
        eps_seq=[0.0] * len(ns),
        eps=0.0,
        epi_convergent=True,
        unique_argmin=True,
        epi_panel=[as_events(grid, [(0.0, 0.1, -0.6)]), as_events(grid, [(0.5, 0.2, -0.3)])],
        k_panel=[[_ball(grid, 0.0, 0.1)], [_ball(grid, 1.0, 0.1)], [ClosedSet.full(grid)]],
        f_panel=[_ball(grid, 0.0, 0.05), _ball(grid, 1.0, 0.1), ClosedSet.full(grid)],
        alt_limits={"pointwise": DeterministicIntegrand(zero, name="zero")},
        deterministic_functions=lambda: (fs, g),
    )


def oscillation(grid: GridSpec, n_max: int = 40) -> Scenario:
    ns = list(range(1, n_max + 1))
    t = grid.axes[0]
    seq = [DeterministicIntegrand(LscFunction(grid, np.sin(n * t)), name=f"sin({n}t)") for n in ns]
    return Scenario(
        "S6",
        "oscillations sin(n t): epi-limit -1, not the constant 0",
        "integrand",
        ns,
        seq,
        DeterministicIntegrand(LscFunction.constant(grid, -1.0), name="-1"),
        (EPI_DIST,),
        ("brute-force infima over balls",),
        {"n_max": n_max},
        eps_seq=[0.0] * len(ns),
        epi_panel=[as_events(grid, [(0.0, 0.5, -1.2)]), as_events(grid, [(2.0, 0.25, -1.0)])],
        alt_limits={"zero": DeterministicIntegrand(LscFunction.constant(grid, 0.0), name="0")},
    )


def alternating(grid: GridSpec, n_max: int = 20) -> Scenario:
    ns = list(range(1, n_max + 1))
    seq = [DeterministicSet(grid, _singleton(grid, 1.0 if n % 2 == 0 else -1.0)) for n in ns]
    ls = LedgerSpec((0.2, 0.5), (0.1, 0.05), (-1.0, 0.0, 1.0))
    pt = lambda c: carrier.as_point(grid, c)  # noqa: E731
    return Scenario(
        "S7",
        "alternating singletons {-1}, {1} against the limit {1}",
        "set",
        ns,
        seq,
        DeterministicSet(grid, _singleton(grid, 1.0), name="{1}"),
        (HITTING,),
        ("exact hit indicators",),
        {"n_max": n_max},
        ledger_spec=ls,
        explicit_u=[
            DBallUnion(((pt(-1.0), 0.1),)),
            DBallUnion(((pt(1.0), 0.1),)),
            DBallUnion(((pt(0.0), 0.45),)),
            DBallUnion(((pt(-1.0), 0.3), (pt(1.0), 0.3))),
        ],
    )


def atom(grid: GridSpec, n_max: int = 10) -> Scenario:
    C = _singleton(grid, 0.5)
    ns = list(range(1, n_max + 1))
    return Scenario(
        "S8",
        "deterministic atom C = {0.5} (constant sequence)",
        "set",
        ns,
        [DeterministicSet(grid, C, name="{0.5}") for _ in ns],
        DeterministicSet(grid, C, name="{0.5}"),
        (SCREEN, HITTING),
        ("step-function capacity at r = |center - 0.5|",),
        {"n_max": n_max},
        ledger_spec=LedgerSpec((0.3, 0.5, 0.7), (0.1, 0.05), (0.0, 1.0), panel_size=10),
    )


BUILDERS: dict[str, Callable[..., Scenario]] = {
    "S1": shrinking_singletons,
    "S2": uniform_singletons,
    "S3": random_quadratics,
    "S4": double_well,
    "S5": localized_dips,
    "S6": oscillation,
    "S7": alternating,
    "S8": atom,
}


def get_scenario(sid: str, grid: GridSpec | None = None, **params) -> Scenario:
    if sid not in BUILDERS:
        raise KeyError(f"unknown scenario {sid!r}")
    return BUILDERS[sid](grid or GridSpec(), **params)


def scenario_library(grid: GridSpec | None = None) -> list[Scenario]:
    """All scenarios, sorted by id."""
    g = grid or GridSpec()
    return [BUILDERS[k](g) for k in sorted(BUILDERS)]
