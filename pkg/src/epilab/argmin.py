"""Sets of eps-optimal solutions, selections, and the outer-limit inclusion check."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from epilab.hyperspace import ClosedSet, excess_with_witness, tail_union
from epilab.lsc import LscFunction, epi_converges

LEXICOGRAPHIC = "lexicographic-min"
RANDOM_UNIFORM = "random-uniform"

PASS = "pass"
FAIL = "fail"
HYPOTHESIS_NOT_MET = "hypothesis-not-met"


def eps_argmin_mask(values: np.ndarray, eps: float, value_snap: float = 0.0) -> np.ndarray:
    """Row-wise eps-optimal masks for a (replicates, lattice) value matrix.

    Rows with infimum +inf give the whole lattice; rows with infimum -inf give {f = -inf}.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    values = np.atleast_2d(values)
    inf = values.min(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        mask = values <= inf + eps + value_snap
    pos = np.isposinf(inf[:, 0])
    if pos.any():
        mask[pos] = True
    neg = np.isneginf(inf[:, 0])
    if neg.any():
        mask[neg] = np.isneginf(values[neg])
    return mask


def eps_argmin(f: LscFunction, eps: float) -> ClosedSet:
    """{t: f(t) <= inf f + eps}; the whole lattice when f is identically +inf."""
    return ClosedSet(f.grid, eps_argmin_mask(f.values[None, :], eps, f.grid.value_snap)[0])


def argmin(f: LscFunction) -> ClosedSet:
    return eps_argmin(f, 0.0)


@dataclass(frozen=True)
class SelectionRule:
    kind: str = LEXICOGRAPHIC
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in (LEXICOGRAPHIC, RANDOM_UNIFORM):
            raise ValueError(f"unknown selection rule {self.kind!r}")


def select_indices(masks: np.ndarray, rule: SelectionRule, rng: np.random.Generator | None = None) -> np.ndarray:
    """One member index per row of a boolean mask matrix (rows must be nonempty)."""
    if rule.kind == LEXICOGRAPHIC:
        return np.argmax(masks, axis=1)
    if rng is None:
        raise ValueError("random selection needs a generator")
    counts = masks.sum(axis=1)
    pick = np.floor(rng.random(len(masks)) * counts).astype(np.intp)
    csum = np.cumsum(masks, axis=1)
    return np.argmax(csum > pick[:, None], axis=1)


def select(f: LscFunction, eps: float, rule: SelectionRule = SelectionRule(), seed: int | None = None):
    """A member of eps_argmin(f, eps) chosen by rule; deterministic per seed."""
    mask = eps_argmin(f, eps).flat[None, :]
    s = rule.seed if seed is None else seed
    rng = np.random.default_rng(s) if rule.kind == RANDOM_UNIFORM else None
    return f.grid.point(int(select_indices(mask, rule, rng)[0]))


@dataclass
class InclusionReport:
    verdict: str
    excess: float | None = None
    witness: list | None = None
    tol: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness": self.witness,
            "excess": self.excess,
            "tol": self.tol,
            "hypothesis": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def left_order_ok(eps_seq: Sequence[float], eps: float, tail_start: int, tol: float) -> tuple[bool, float]:
    """limsup of the tail of eps_seq <= eps + tol (convergence in the left-order topology)."""
    tail_max = float(max(eps_seq[tail_start:]))
    return tail_max <= eps + tol, tail_max


def check_pk_inclusion(
    f_seq: Sequence[LscFunction],
    eps_seq: Sequence[float],
    f: LscFunction,
    eps: float,
    tail_start: int | None = None,
    tol: float = 0.02,
) -> InclusionReport:
    """Outer limit of eps_n-optimal sets lies in A(f, eps), given epi-convergence and limsup eps_n <= eps."""
    if len(f_seq) != len(eps_seq) or not f_seq:
        raise ValueError("f_seq and eps_seq must be nonempty and of equal length")
    if tail_start is None:
        tail_start = len(f_seq) // 2
    ok_eps, tail_max = left_order_ok(eps_seq, eps, tail_start, tol)
    epi = epi_converges(f_seq, f, tail_start, tol)
    diag = {
        "eps_tail_max": tail_max,
        "eps_limit": eps,
        "left_order_ok": ok_eps,
        "epi_converges": epi.converges,
        "epi_upper_excess": epi.upper_excess,
        "epi_lower_excess": epi.lower_excess,
        "tail_start": tail_start,
    }
    if not (ok_eps and epi.converges):
        return InclusionReport(HYPOTHESIS_NOT_MET, tol=tol, diagnostics=diag)
    sets = [eps_argmin(fn, e) for fn, e in zip(f_seq, eps_seq)]
    limit = eps_argmin(f, eps)
    e, w = excess_with_witness(tail_union(sets, tail_start, tol), limit)
    ok = e <= tol + 1e-9 * f.grid.h
    witness = None if w is None else list(f.grid.point(w).coords)
    return InclusionReport(PASS if ok else FAIL, e, witness, tol, diag)
