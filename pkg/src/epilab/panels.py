"""Text grammar for panels in experiment configs.

    ball        center@radius            (2-D centers as x:y)
    union       ball+ball+...
    set         union | full | empty
    U panel     union; union; ...
    K panel     set & set & ...; ...     (each entry is one collection)
    F panel     set; set; ...
    epi panel   center@r/alpha, ...; ... (each entry is one joint tuple)
"""

from __future__ import annotations

from epilab import carrier
from epilab.carrier import GridSpec
from epilab.hyperspace import ClosedSet
from epilab.stochastic.estimators import ConfigError, DBallUnion
from epilab.stochastic.testers import EpiEvent


def _num(tok: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ConfigError(f"not a number: {tok!r}") from None


def _entries(text: str) -> list[str]:
    out = [e.strip() for e in text.split(";")]
    if not all(out):
        raise ConfigError(f"empty entry in panel {text!r}")
    return out


def parse_center(grid: GridSpec, tok: str) -> carrier.Point:
    coords = tuple(_num(c) for c in tok.strip().split(":"))
    if len(coords) != grid.dim:
        raise ConfigError(f"center {tok!r} needs {grid.dim} coordinate(s)")
    try:
        return carrier.Point(grid, coords)
    except ValueError as e:
        raise ConfigError(f"center {tok!r}: {e}") from None


def parse_ball(grid: GridSpec, tok: str) -> tuple[carrier.Point, float]:
    if tok.count("@") != 1:
        raise ConfigError(f"ball must look like center@radius, got {tok!r}")
    c, r = tok.split("@")
    r = _num(r)
    if r < 0:
        raise ConfigError(f"negative radius in {tok!r}")
    return parse_center(grid, c), r


def parse_union(grid: GridSpec, text: str) -> DBallUnion:
    return DBallUnion(tuple(parse_ball(grid, t.strip()) for t in text.split("+")))


def parse_set(grid: GridSpec, text: str) -> ClosedSet:
    t = text.strip()
    if t == "full":
        return ClosedSet.full(grid)
    if t == "empty":
        return ClosedSet.empty(grid)
    return parse_union(grid, t).realize()


def parse_u_panel(grid: GridSpec, text: str) -> list[DBallUnion]:
    return [parse_union(grid, e) for e in _entries(text)]


def parse_f_panel(grid: GridSpec, text: str) -> list[ClosedSet]:
    return [parse_set(grid, e) for e in _entries(text)]


def parse_k_panel(grid: GridSpec, text: str) -> list[list[ClosedSet]]:
    return [[parse_set(grid, s) for s in e.split("&")] for e in _entries(text)]


def parse_event(grid: GridSpec, tok: str) -> EpiEvent:
    if tok.count("/") != 1:
        raise ConfigError(f"epi event must look like center@r/alpha, got {tok!r}")
    ball, alpha = tok.split("/")
    c, r = parse_ball(grid, ball.strip())
    return EpiEvent(c, r, _num(alpha))


def parse_epi_panel(grid: GridSpec, text: str) -> list[list[EpiEvent]]:
    return [[parse_event(grid, t.strip()) for t in e.split(",")] for e in _entries(text)]


def parse_floats(text: str) -> list[float]:
    return [_num(t) for t in text.replace(",", " ").split()]
