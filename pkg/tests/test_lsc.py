import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import oracles
from epilab import carrier
from epilab.carrier import GridSpec, Point
from epilab.hyperspace import ClosedSet
from epilab.lsc import (
    LscFunction,
    epi_converges,
    epi_hits_direct,
    epi_hits_product_ball,
    epi_misses_product_ball,
    epigraph,
    inf_over,
)

G = GridSpec()
H05 = GridSpec(lo=(-1.0,), hi=(1.0,), h=0.5, value_lo=-1.0, value_hi=1.0, h_v=0.5)
H1 = GridSpec(lo=(-1.0,), hi=(1.0,), h=1.0, value_lo=-1.0, value_hi=1.0, h_v=1.0)


def sq(grid):
    return LscFunction.from_callable(grid, lambda x: x**2)


def test_inf_over_examples():
    f = sq(G)
    assert inf_over(f, carrier.closed_ball(Point(G, 0.0), 1.0)) == 0.0
    assert inf_over(f, ClosedSet.empty(G)) == math.inf
    v = np.zeros(G.size)
    v[G.index_of((0.0,))] = -np.inf
    assert inf_over(LscFunction(G, v), carrier.closed_ball(Point(G, 0.0), 0.1)) == -math.inf


def test_epigraph_examples():
    e = epigraph(LscFunction.constant(H1, 0.0))
    assert {tuple(c) for c in e.coords()} == {(x, a) for x in (-1.0, 0.0, 1.0) for a in (0.0, 1.0)}
    assert epigraph(LscFunction.constant(H1, math.inf)).is_empty
    e2 = epigraph(sq(H05))
    assert (0.5, 0.5) in {tuple(c) for c in e2.coords()}
    expect = {(x, a) for x in (-1.0, -0.5, 0.0, 0.5, 1.0) for a in oracles.ordinates(H05) if x * x <= a}
    assert {tuple(c) for c in e2.coords()} == expect


def test_minus_inf_fills_column():
    v = np.full(H05.size, 2.0)
    v[2] = -np.inf
    e = epigraph(LscFunction(H05, v))
    assert e.mask[2].all() and not e.mask[0].any()


def test_epi_hits_examples():
    f = sq(G)
    assert epi_hits_product_ball(f, 0.0, 1.0, -0.75)
    assert not epi_hits_product_ball(LscFunction.constant(G, math.inf), 0.0, 3.0, 0.0)
    assert epi_hits_product_ball(LscFunction.constant(G, 0.5), 1.0, 0.2, 0.3)
    assert epi_misses_product_ball(f, 0.0, 1.0, -2.0)
    assert epi_misses_product_ball(f, 0.0, 0.0, -0.5)


def test_epi_hits_agrees_with_direct_on_examples():
    f = sq(G)
    for x, r, a in [(0.0, 1.0, -0.75), (0.0, 1.0, -2.0), (2.0, 0.5, 1.0), (-3.0, 0.3, 2.0)]:
        assert epi_hits_product_ball(f, x, r, a) == epi_hits_direct(f, x, r, a)


def test_csv_roundtrip_with_infinities():
    v = np.linspace(-1, 1, H05.size)
    v[0], v[-1] = np.inf, -np.inf
    f = LscFunction(H05, v)
    text = f.to_csv()
    assert "+inf" in text and "-inf" in text
    assert LscFunction.from_csv(H05, text) == f


def test_epi_converges_examples():
    f = sq(G)
    seq = [LscFunction.from_callable(G, lambda x, n=n: x**2 + 1.0 / n) for n in range(1, 201)]
    assert epi_converges(seq, f, tol=0.02).converges
    assert epi_converges([f] * 6, f, tol=0.02).converges


def test_epi_converges_dips():
    def dip(n):
        v = np.zeros(G.size)
        v[G.nearest_index((1.0 / n,))] = -1.0
        return LscFunction(G, v)

    seq = [dip(n) for n in range(1, 401)]
    assert epi_converges(seq, dip(10**9), tol=0.02).converges
    assert not epi_converges(seq, LscFunction.constant(G, 0.0), tol=0.02).converges


def test_epi_converges_rejects_fine_tol():
    with pytest.raises(ValueError):
        epi_converges([sq(G)], sq(G), tol=0.001)


# -- properties -------------------------------------------------------------------------

SMALL = GridSpec(lo=(-1.0,), hi=(1.0,), h=0.25, value_lo=-2.0, value_hi=2.0, h_v=0.25)
values = hnp.arrays(
    float,
    SMALL.size,
    elements=st.one_of(st.floats(-3, 3), st.sampled_from([math.inf, -math.inf])),
)


@settings(max_examples=150)
@given(values, st.integers(0, SMALL.size - 1), st.integers(0, 12), st.integers(0, 16))
def test_epi_equivalence_against_scan(v, i, kr, ka):
    f = LscFunction(SMALL, v)
    r = 0.25 * kr
    ords = SMALL.ordinates
    top = [a for a in ords if a + r <= SMALL.value_hi + 1e-9]
    alpha = float(top[ka % len(top)])
    x = SMALL.point(i)
    fast = epi_hits_product_ball(f, x, r, alpha)
    assert fast == epi_hits_direct(f, x, r, alpha)
    assert fast == oracles.epi_hits(SMALL, list(v), x.coords, r, alpha)


@settings(max_examples=150)
@given(values, st.sets(st.integers(0, SMALL.size - 1)), st.sets(st.integers(0, SMALL.size - 1)))
def test_inf_antitone_and_union(v, a, b):
    f = LscFunction(SMALL, v)
    A, B = ClosedSet.from_indices(SMALL, a), ClosedSet.from_indices(SMALL, a | b)
    assert inf_over(f, A) >= inf_over(f, B)
    Bb = ClosedSet.from_indices(SMALL, b)
    assert inf_over(f, A | Bb) == min(inf_over(f, A), inf_over(f, Bb))
    assert inf_over(f, A) == oracles.inf_over(list(v), a)


@settings(max_examples=100)
@given(values, hnp.arrays(float, SMALL.size, elements=st.floats(0, 2)))
def test_epigraph_monotone(v, bump):
    f = LscFunction(SMALL, v)
    g = LscFunction(SMALL, v + bump)
    assert epigraph(g) <= epigraph(f)


@settings(max_examples=100)
@given(values, st.integers(0, SMALL.size - 1), st.integers(0, 8), st.floats(-2, 2))
def test_misses_is_negation(v, i, kr, alpha):
    f = LscFunction(SMALL, v)
    x = SMALL.point(i)
    r = 0.25 * kr
    assert epi_misses_product_ball(f, x, r, alpha) == (not epi_hits_product_ball(f, x, r, alpha))


def test_two_dimensional_epigraph():
    g = GridSpec(dim=2, lo=(-1.0, -1.0), hi=(1.0, 1.0), h=0.5, value_lo=-1.0, value_hi=2.0, h_v=0.5)
    f = LscFunction.from_callable(g, lambda p: p[:, 0] ** 2 + p[:, 1] ** 2)
    rng = np.random.default_rng(3)
    for _ in range(200):
        x = g.point(int(rng.integers(g.size)))
        r = 0.5 * int(rng.integers(0, 4))
        top = [a for a in g.ordinates if a + r <= g.value_hi + 1e-9]
        alpha = float(top[int(rng.integers(len(top)))])
        assert epi_hits_product_ball(f, x, r, alpha) == epi_hits_direct(f, x, r, alpha)
        assert epi_hits_product_ball(f, x, r, alpha) == oracles.epi_hits(g, list(f.values), x.coords, r, alpha)
