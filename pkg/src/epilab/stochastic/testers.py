"""Convergence-in-distribution testers for random closed sets, normal integrands and argmin sets.

Stream layout: the limit law uses stream 0 and sequence element i uses
stream i + 1, so different indices model independent probability spaces.
Tail window is the second half of the sequence. Thresholds are
``tol + 3 * pooled SE`` (largest pooled SE over the tail and panel).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from epilab import carrier
from epilab.argmin import SelectionRule, eps_argmin_mask, left_order_ok, select_indices
from epilab.carrier import Point, as_point
from epilab.hyperspace import ClosedSet
from epilab.lsc import value_le
from epilab.stochastic.estimators import DBallUnion, RadiusLedger, _targets, scan
from epilab.stochastic.report import (
    FAIL,
    HYPOTHESIS_NOT_MET,
    PASS,
    Estimate,
    PanelResult,
    TestReport,
    combine,
    not_met,
)
from epilab.stochastic.samplers import (
    SELECTION,
    ArgminSetSampler,
    IntegrandSampler,
    RandomQuadratic,
    SetSampler,
    block_rng,
)

LIMIT_STREAM = 0


def _stream(i: int) -> int:
    return i + 1


def _tail_start(n: int) -> int:
    return n // 2


def _labels(seq, indices):
    if indices is None:
        return list(range(len(seq)))
    if len(indices) != len(seq):
        raise ValueError("indices must match the sequence length")
    return list(indices)


def _estimates(sampler, stream, N, seed, fn, exact_ok=True):
    counts, exact = scan(sampler, seed, stream, N, fn, exact_ok)
    p = np.asarray(counts, dtype=float) / N
    se = np.zeros_like(p) if exact else np.sqrt(p * (1 - p) / N)
    return p, se


def _compare(
    tester: str,
    ids: Sequence[str],
    descs: Sequence[str],
    labels: list,
    seq_p: list[np.ndarray],
    seq_se: list[np.ndarray],
    lim_p: np.ndarray,
    lim_se: np.ndarray,
    tol: float,
    one_sided: bool,
    N: int,
    seed: int,
    excluded: dict | None = None,
) -> TestReport:
    excluded = excluded or {}
    tail = _tail_start(len(labels))
    panel = []
    max_disc = -math.inf
    max_se = 0.0
    for j, (pid, desc) in enumerate(zip(ids, descs)):
        series = [(labels[i], Estimate(float(seq_p[i][j]), float(seq_se[i][j]))) for i in range(len(labels))]
        res = PanelResult(pid, desc, Estimate(float(lim_p[j]), float(lim_se[j])), series)
        if pid in excluded:
            res.excluded = True
            res.note = excluded[pid]
            panel.append(res)
            continue
        d = [
            (seq_p[i][j] - lim_p[j]) if one_sided else abs(seq_p[i][j] - lim_p[j])
            for i in range(tail, len(labels))
        ]
        res.tail_discrepancy = float(max(d))
        max_disc = max(max_disc, res.tail_discrepancy)
        max_se = max(max_se, max(float(seq_se[i][j] + lim_se[j]) for i in range(tail, len(labels))))
        panel.append(res)
    threshold = tol + 3.0 * max_se
    if max_disc == -math.inf:
        verdict, max_disc = HYPOTHESIS_NOT_MET, 0.0
    else:
        verdict = PASS if max_disc <= threshold else FAIL
    return TestReport(
        tester,
        verdict,
        float(max_disc),
        float(threshold),
        tol,
        N,
        seed,
        panel=panel,
        diagnostics={"tail_start": tail, "one_sided": one_sided},
    )


def test_rcs_convergence(
    seq: Sequence[SetSampler],
    limit: SetSampler,
    panel: Sequence[DBallUnion],
    N: int,
    seed: int,
    tol: float,
    ledger: RadiusLedger | None = None,
    indices: Sequence | None = None,
) -> TestReport:
    """Two-sided check of P_n(C_n meets U) -> P(C meets U) over a U(D) panel."""
    labels = _labels(seq, indices)
    if ledger is not None:
        bad = [u.describe() for u in panel if not u.radii_in(ledger)]
        if bad:
            return not_met(
                "rcs-convergence", tol, N, seed, {"radii_outside_ledger": bad, "ledger": ledger.to_dict()}
            )
    sets = [u.realize() for u in panel]
    T = _targets(limit.grid, sets)

    def fn_for(s):
        return lambda noise, b: s.hit_matrix(noise, T).sum(axis=0)

    lim_p, lim_se = _estimates(limit, LIMIT_STREAM, N, seed, fn_for(limit))
    seq_p, seq_se = [], []
    for i, s in enumerate(seq):
        p, se = _estimates(s, _stream(i), N, seed, fn_for(s))
        seq_p.append(p)
        seq_se.append(se)
    ids = [f"U{j}" for j in range(len(panel))]
    rep = _compare("rcs-convergence", ids, [u.describe() for u in panel], labels, seq_p, seq_se, lim_p, lim_se,
                   tol, False, N, seed)
    if ledger is not None:
        rep.diagnostics["ledger"] = ledger.to_dict()
    return rep


test_rcs_convergence.__test__ = False


@dataclass(frozen=True)
class EpiEvent:
    """The event {inf over the closed ball B(x, r) <= r + alpha}."""

    x: Point
    r: float
    alpha: float

    @property
    def threshold(self) -> float:
        return self.r + self.alpha

    def describe(self) -> str:
        c = ":".join(f"{v:g}" for v in self.x.coords)
        return f"{c}@{self.r:g}/{self.alpha:g}"


def _ball_indices(events: Sequence[EpiEvent]):
    closed = [carrier.closed_ball(e.x, e.r).indices for e in events]
    opened = [carrier.open_ball(e.x, e.r).indices for e in events]
    return closed, opened


def test_epi_convergence_dist(
    seq: Sequence[IntegrandSampler],
    limit: IntegrandSampler,
    panel: Sequence[Sequence[EpiEvent]],
    N: int,
    seed: int,
    tol: float,
    mode: str = "le",
    screen_kappa: float = 0.02,
    indices: Sequence | None = None,
) -> TestReport:
    """Joint infimum events over a panel of ball tuples, sequence versus limit (two-sided).

    Tuples containing an event that fails the closed-versus-interior
    continuity screen under the limit law are excluded and reported.
    """
    if mode not in ("le", "gt"):
        raise ValueError("mode must be 'le' or 'gt'")
    labels = _labels(seq, indices)
    grid = limit.grid
    events: list[EpiEvent] = []
    where: list[list[int]] = []
    for tup in panel:
        pos = []
        for e in tup:
            if e not in events:
                events.append(e)
            pos.append(events.index(e))
        where.append(pos)
    closed, opened = _ball_indices(events)
    thr = np.array([e.threshold for e in events])
    snap = grid.value_snap

    def le_matrix(s, noise):
        return value_le(s.infima(noise, closed), thr[None, :], grid)

    def screen_fn(noise, b):
        inf = limit.infima(noise, closed + opened)
        k = len(closed)
        n_ev = value_le(inf[:, :k], thr[None, :], grid)
        m_ev = inf[:, k:] < thr[None, :] - snap
        return np.concatenate([n_ev.sum(axis=0), (n_ev & ~m_ev).sum(axis=0)])

    sc, exact = scan(limit, seed, LIMIT_STREAM, N, screen_fn)
    k = len(events)
    d = sc[k:] / N
    d_se = np.zeros(k) if exact else np.sqrt(d * (1 - d) / N)
    screen_ok = d <= screen_kappa + 6 * d_se
    screen_diag = [
        {"event": e.describe(), "closed": float(sc[i] / N), "gap": float(d[i]), "accepted": bool(screen_ok[i])}
        for i, e in enumerate(events)
    ]

    def fn_for(s):
        def fn(noise, b):
            L = le_matrix(s, noise)
            le = np.array([np.count_nonzero(L[:, pos].all(axis=1)) for pos in where])
            gt = np.array([np.count_nonzero((~L[:, pos]).all(axis=1)) for pos in where])
            return np.concatenate([le, gt])

        return fn

    lim_p, lim_se = _estimates(limit, LIMIT_STREAM, N, seed, fn_for(limit))
    seq_p, seq_se = [], []
    for i, s in enumerate(seq):
        p, se = _estimates(s, _stream(i), N, seed, fn_for(s))
        seq_p.append(p)
        seq_se.append(se)

    ids = [f"E{j}" for j in range(len(panel))]
    descs = [", ".join(e.describe() for e in tup) for tup in panel]
    excluded = {
        ids[j]: "continuity screen failed under the limit law"
        for j, pos in enumerate(where)
        if not all(screen_ok[p] for p in pos)
    }
    m = len(panel)

    def part(sl):
        return _compare(
            "epi-dist", ids, descs, labels,
            [p[sl] for p in seq_p], [s[sl] for s in seq_se], lim_p[sl], lim_se[sl],
            tol, False, N, seed, excluded,
        )

    le_rep, gt_rep = part(slice(0, m)), part(slice(m, 2 * m))
    rep, other = (le_rep, gt_rep) if mode == "le" else (gt_rep, le_rep)
    singles = [ids[j] for j, tup in enumerate(panel) if len(tup) == 1 and ids[j] not in excluded]
    complement_ok = all(
        abs(le_rep.panel[j].limit.value + gt_rep.panel[j].limit.value - 1.0) < 1e-12
        and all(
            abs(a.value + b.value - 1.0) < 1e-12
            for (_, a), (_, b) in zip(le_rep.panel[j].series, gt_rep.panel[j].series)
        )
        for j, pid in enumerate(ids)
        if pid in singles
    )
    single_disc = {
        r: max([p.tail_discrepancy for p in rr.panel if p.panel_id in singles] or [0.0])
        for r, rr in (("le", le_rep), ("gt", gt_rep))
    }
    rep.diagnostics.update(
        {
            "mode": mode,
            "screen": screen_diag,
            "screen_kappa": screen_kappa,
            "complementation_ok": bool(complement_ok),
            "other_mode_verdict": other.verdict,
            "single_event_modes_agree": bool(abs(single_disc["le"] - single_disc["gt"]) < 1e-12),
        }
    )
    return rep


test_epi_convergence_dist.__test__ = False


def _argmin_sampler(s: IntegrandSampler, eps: float) -> ArgminSetSampler:
    return ArgminSetSampler(s, eps)


def _left_order(eps_seq, eps, tol):
    ok, tail_max = left_order_ok(list(eps_seq), eps, _tail_start(len(eps_seq)), tol)
    return ok, {"eps_tail_max": tail_max, "eps_limit": eps, "left_order_ok": ok}


def test_argmin_upper_fell(
    seq: Sequence[IntegrandSampler],
    eps_seq: Sequence[float],
    limit: IntegrandSampler,
    eps: float,
    K_panel: Sequence[Sequence[ClosedSet]],
    N: int,
    seed: int,
    tol: float,
    epi_verified: bool = True,
    indices: Sequence | None = None,
) -> TestReport:
    """One-sided check: limsup P_n(A_n meets every K in K*) <= P(A meets every K in K*)."""
    if len(eps_seq) != len(seq):
        raise ValueError("eps_seq must match seq")
    labels = _labels(seq, indices)
    ok, diag = _left_order(eps_seq, eps, tol)
    diag["epi_verified"] = bool(epi_verified)
    if not (ok and epi_verified):
        return not_met("argmin-upper-fell", tol, N, seed, diag)
    flat = [K for coll in K_panel for K in coll]
    T = _targets(limit.grid, flat)
    groups, start = [], 0
    for coll in K_panel:
        groups.append(list(range(start, start + len(coll))))
        start += len(coll)

    def fn_for(a: ArgminSetSampler):
        def fn(noise, b):
            H = a.hit_matrix(noise, T)
            return np.array([np.count_nonzero(H[:, g].all(axis=1)) for g in groups])

        return fn

    lim_a = _argmin_sampler(limit, eps)
    lim_p, lim_se = _estimates(lim_a, LIMIT_STREAM, N, seed, fn_for(lim_a))
    seq_p, seq_se = [], []
    for i, (s, e) in enumerate(zip(seq, eps_seq)):
        a = _argmin_sampler(s, e)
        p, se = _estimates(a, _stream(i), N, seed, fn_for(a))
        seq_p.append(p)
        seq_se.append(se)
    ids = [f"K{j}" for j in range(len(K_panel))]
    descs = [" & ".join(_set_label(K) for K in coll) for coll in K_panel]
    rep = _compare("argmin-upper-fell", ids, descs, labels, seq_p, seq_se, lim_p, lim_se, tol, True, N, seed)
    rep.diagnostics.update(diag)
    return rep


test_argmin_upper_fell.__test__ = False


def _set_label(K: ClosedSet) -> str:
    if len(K) == K.grid.size:
        return "full"
    c = K.coords()
    if len(c) == 0:
        return "empty"
    lo, hi = c.min(axis=0), c.max(axis=0)
    return "[" + ", ".join(f"{a:g}..{b:g}" for a, b in zip(lo, hi)) + f"] ({len(c)} pts)"


def test_tightness(
    seq: Sequence[IntegrandSampler],
    eps_seq: Sequence[float],
    K: ClosedSet,
    N: int,
    seed: int,
    eta: float,
    indices: Sequence | None = None,
) -> tuple[bool, TestReport]:
    """liminf over the tail of P_n(A_n nonempty and inside K) >= 1 - eta - 3 SE."""
    labels = _labels(seq, indices)
    outside = ~K.flat

    def fn_for(a: ArgminSetSampler):
        def fn(noise, b):
            if isinstance(a.integrand, RandomQuadratic) and a.eps == 0.0:
                return np.array([np.count_nonzero(K.flat[a.integrand.minimizers(noise)])])
            M = a.masks(noise)
            return np.array([np.count_nonzero(M.any(axis=1) & ~(M & outside).any(axis=1))])

        return fn

    ps, ses = [], []
    for i, (s, e) in enumerate(zip(seq, eps_seq)):
        a = _argmin_sampler(s, e)
        p, se = _estimates(a, _stream(i), N, seed, fn_for(a))
        ps.append(float(p[0]))
        ses.append(float(se[0]))
    tail = _tail_start(len(seq))
    shortfall = [(1 - eta) - ps[i] for i in range(tail, len(seq))]
    max_disc = max(shortfall)
    thr = 3.0 * max(ses[tail:])
    ok = max_disc <= thr
    panel = [
        PanelResult(
            "tight",
            f"A_n nonempty and inside {_set_label(K)}",
            None,
            [(labels[i], Estimate(ps[i], ses[i])) for i in range(len(seq))],
            float(max_disc),
        )
    ]
    rep = TestReport(
        "tightness", PASS if ok else FAIL, float(max_disc), float(thr), eta, N, seed, panel,
        {"eta": eta, "tail_start": tail, "tail_min_probability": float(min(ps[tail:]))},
    )
    return ok, rep


test_tightness.__test__ = False


def _selected(a: ArgminSetSampler, noise, rule: SelectionRule, rng):
    if isinstance(a.integrand, RandomQuadratic) and a.eps == 0.0:
        return a.integrand.minimizers(noise)
    return select_indices(a.masks(noise), rule, rng)


def _selection_histogram(a: ArgminSetSampler, stream, N, seed, rule: SelectionRule):
    size = a.grid.size

    def fn(noise, b):
        rng = block_rng(seed, stream, b, SELECTION) if rule.kind != "lexicographic-min" else None
        return np.bincount(_selected(a, noise, rule, rng), minlength=size)

    counts, _ = scan(a, seed, stream, N, fn, exact_ok=rule.kind == "lexicographic-min")
    return counts


def ks_distance(counts: np.ndarray, pmf: np.ndarray) -> float:
    """Sup distance between the empirical lattice CDF and the CDF of pmf."""
    emp = np.cumsum(counts) / counts.sum()
    return float(np.max(np.abs(emp - np.cumsum(pmf))))


def test_argmin_fell(
    seq: Sequence[IntegrandSampler],
    eps_seq: Sequence[float],
    limit: IntegrandSampler,
    K: ClosedSet,
    eta: float,
    N: int,
    seed: int,
    tol: float,
    u_panel: Sequence[DBallUnion],
    ks_tol: float | None = None,
    unique_argmin: bool | None = None,
    limit_law: np.ndarray | None = None,
    epi_verified: bool = True,
    indices: Sequence | None = None,
    rule: SelectionRule = SelectionRule(),
) -> TestReport:
    """Fell convergence of A(Z_n, eps_n) to Argmin(Z) under tightness and a.s. uniqueness.

    Components: upper-Fell inequalities and two-sided hitting probabilities on
    the U(D) panel, plus a KS comparison of the selected minimizer at the
    largest index against the limit law when one is available.
    """
    ks_tol = tol if ks_tol is None else ks_tol
    unique = limit.unique_argmin if unique_argmin is None else unique_argmin
    ok_eps, diag = _left_order(eps_seq, 0.0, tol)
    diag.update({"unique_argmin": bool(unique), "epi_verified": bool(epi_verified)})
    if not unique:
        diag["reason"] = "limit has more than one minimizing point"
        return not_met("argmin-fell", tol, N, seed, diag)
    if not (ok_eps and epi_verified):
        return not_met("argmin-fell", tol, N, seed, diag)
    tight_ok, tight = test_tightness(seq, eps_seq, K, N, seed, eta, indices)
    diag["tightness"] = tight.verdict
    if not tight_ok:
        diag["reason"] = "tightness failed"
        return combine("argmin-fell", [tight, not_met("argmin-fell", tol, N, seed, {})], tol, N, seed, diag)
    sets = [u.realize() for u in u_panel]
    upper = test_argmin_upper_fell(seq, eps_seq, limit, 0.0, [[s] for s in sets], N, seed, tol, True, indices)
    hit = test_rcs_convergence(
        [_argmin_sampler(s, e) for s, e in zip(seq, eps_seq)], _argmin_sampler(limit, 0.0), u_panel, N, seed, tol,
        indices=indices,
    )
    parts = [tight, upper, hit]
    law = limit.argmin_pmf() if limit_law is None else limit_law
    if law is not None:
        last = len(seq) - 1
        counts = _selection_histogram(_argmin_sampler(seq[last], eps_seq[last]), _stream(last), N, seed, rule)
        ks = ks_distance(counts, law)
        diag["ks_distance"] = ks
        parts.append(
            TestReport("ks-selection", PASS if ks <= ks_tol else FAIL, ks, ks_tol, ks_tol, N, seed,
                       diagnostics={"index": _labels(seq, indices)[last], "rule": rule.kind})
        )
    else:
        diag["ks_distance"] = None
    return combine("argmin-fell", parts, tol, N, seed, diag)


test_argmin_fell.__test__ = False


def test_selection_portmanteau(
    seq: Sequence[IntegrandSampler],
    eps_seq: Sequence[float],
    selection_rule: SelectionRule,
    limit: IntegrandSampler,
    eps: float,
    F_panel: Sequence[ClosedSet],
    N: int,
    seed: int,
    tol: float,
    K: ClosedSet | None = None,
    eta: float = 0.01,
    indices: Sequence | None = None,
) -> TestReport:
    """limsup P_n(xi_n in F) <= T(F) for the capacity T of A(Z, eps); also checks T(E) = 1."""
    labels = _labels(seq, indices)
    grid = limit.grid
    ok_eps, diag = _left_order(eps_seq, eps, tol)
    if not ok_eps:
        return not_met("selection", tol, N, seed, diag)
    K = ClosedSet.full(grid) if K is None else K
    full = ClosedSet.full(grid)
    F_mat = _targets(grid, list(F_panel) + [K])
    nF = len(F_panel)

    seq_p, seq_se = [], []
    for i, (s, e) in enumerate(zip(seq, eps_seq)):
        a = _argmin_sampler(s, e)
        counts = _selection_histogram(a, _stream(i), N, seed, selection_rule)
        c = F_mat.astype(np.int64) @ counts
        p = c / N
        exact = a.deterministic and selection_rule.kind == "lexicographic-min"
        seq_p.append(p)
        seq_se.append(np.zeros_like(p) if exact else np.sqrt(p * (1 - p) / N))

    tail = _tail_start(len(seq))
    k_probs = [float(p[nF]) for p in seq_p]
    k_short = max((1 - eta) - k_probs[i] for i in range(tail, len(seq)))
    k_thr = 3.0 * max(float(s[nF]) for s in seq_se[tail:])
    diag.update({"selection_tightness_shortfall": k_short, "selection_tight": bool(k_short <= k_thr)})
    if k_short > k_thr:
        return not_met("selection", tol, N, seed, diag)

    lim_a = _argmin_sampler(limit, eps)
    T_all = _targets(grid, list(F_panel) + [full])
    lim_p, lim_se = _estimates(lim_a, LIMIT_STREAM, N, seed, lambda noise, b: lim_a.hit_matrix(noise, T_all).sum(axis=0))
    ids = [f"F{j}" for j in range(nF)]
    rep = _compare(
        "selection-portmanteau", ids, [_set_label(F) for F in F_panel], labels,
        [p[:nF] for p in seq_p], [s[:nF] for s in seq_se], lim_p[:nF], lim_se[:nF],
        tol, True, N, seed,
    )
    rep.diagnostics.update(diag)
    tE, tE_se = float(lim_p[nF]), float(lim_se[nF])
    cap = TestReport(
        "capacity-of-E", PASS if 1.0 - tE <= 3.0 * tE_se else FAIL, 1.0 - tE, 3.0 * tE_se, tol, N, seed,
        diagnostics={"capacity_of_E": tE, "std_error": tE_se},
    )
    out = combine("selection", [rep, cap], tol, N, seed, {**diag, "capacity_of_E": tE, "rule": selection_rule.kind})
    return out


test_selection_portmanteau.__test__ = False


def as_events(grid, triples) -> list[EpiEvent]:
    """Build a tuple of EpiEvents from (center, r, alpha) triples."""
    return [EpiEvent(as_point(grid, x), float(r), float(a)) for x, r, a in triples]
