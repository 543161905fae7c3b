"""Experiment configs: loading, dispatch to the testers, and artifact output.

A config is an INI file::

    [grid]          optional; GridSpec keys (dim, lo, hi, h, value_lo, value_hi, h_v)
    [experiment]    scenario, tester, N, seed, tol, eta, eps, mode, rule, kappa, ks_tol, limit
    [scenario]      optional integer parameters passed to the scenario builder
    [panel]         optional u / k / f / epi / set / center / radii / delta overrides (see epilab.panels)
    [output]        optional dir
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

from epilab import panels
from epilab.argmin import SelectionRule
from epilab.carrier import GridSpec
from epilab.hyperspace import ClosedSet
from epilab.stochastic import testers
from epilab.stochastic.estimators import ConfigError, candidate_radii, screen_radii
from epilab.stochastic.report import FAIL, HYPOTHESIS_NOT_MET, PASS, Estimate, PanelResult, TestReport
from epilab.stochastic.scenarios import BUILDERS, Scenario, get_scenario

TESTERS = (
    "rcs-convergence",
    "epi-dist",
    "argmin-upper-fell",
    "argmin-fell",
    "selection",
    "tightness",
    "continuity-screen",
)
EXPERIMENT_KEYS = {"scenario", "tester", "n", "seed", "tol", "eta", "eps", "mode", "rule", "kappa", "ks_tol", "limit"}
PANEL_KEYS = {"u", "k", "f", "epi", "set", "center", "radii", "delta"}
SECTIONS = {"grid", "experiment", "scenario", "panel", "output"}
OUTPUT_ENV = "EPILAB_OUTPUT_DIR"
EXIT_CODES = {PASS: 0, FAIL: 1, HYPOTHESIS_NOT_MET: 2}
EXIT_CONFIG = 3


@dataclass
class ExperimentConfig:
    scenario: str
    tester: str
    grid: GridSpec = field(default_factory=GridSpec)
    N: int = 200_000
    seed: int = 0
    tol: float = 0.01
    eta: float = 0.01
    eps: float | None = None
    mode: str = "le"
    rule: str = "lexicographic-min"
    kappa: float | None = None
    ks_tol: float | None = None
    limit: str | None = None
    scenario_params: dict = field(default_factory=dict)
    panel: dict = field(default_factory=dict)
    output_dir: str | None = None

    def __post_init__(self):
        if self.tester not in TESTERS:
            raise ConfigError(f"unknown tester {self.tester!r}; expected one of {', '.join(TESTERS)}")
        if self.scenario not in BUILDERS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; known: {', '.join(sorted(BUILDERS))}")
        if self.N < 1:
            raise ConfigError("N must be at least 1")
        if self.mode not in ("le", "gt"):
            raise ConfigError("mode must be le or gt")
        try:
            SelectionRule(self.rule)
        except ValueError as e:
            raise ConfigError(str(e)) from None


def _get(section, key, conv, default):
    if key not in section:
        return default
    try:
        return conv(section[key])
    except ValueError:
        raise ConfigError(f"bad value for {key}: {section[key]!r}") from None


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    unknown = set(cp.sections()) - SECTIONS
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    if "experiment" not in cp:
        raise ConfigError("missing [experiment] section")
    ex = cp["experiment"]
    bad = set(ex.keys()) - EXPERIMENT_KEYS
    if bad:
        raise ConfigError(f"unknown experiment keys: {sorted(bad)}")
    for key in ("scenario", "tester"):
        if key not in ex:
            raise ConfigError(f"missing experiment key {key!r}")
    try:
        grid = GridSpec.from_section(cp["grid"]) if "grid" in cp else GridSpec()
    except (ValueError, TypeError) as e:
        raise ConfigError(f"bad grid: {e}") from None
    params = {}
    if "scenario" in cp:
        for k, v in cp["scenario"].items():
            params[k] = _get(cp["scenario"], k, int, None)
    pan = dict(cp["panel"]) if "panel" in cp else {}
    bad = set(pan) - PANEL_KEYS
    if bad:
        raise ConfigError(f"unknown panel keys: {sorted(bad)}")
    return ExperimentConfig(
        scenario=ex["scenario"].strip(),
        tester=ex["tester"].strip(),
        grid=grid,
        N=_get(ex, "n", int, 200_000),
        seed=_get(ex, "seed", int, 0),
        tol=_get(ex, "tol", float, 0.01),
        eta=_get(ex, "eta", float, 0.01),
        eps=_get(ex, "eps", float, None),
        mode=ex.get("mode", "le").strip(),
        rule=ex.get("rule", "lexicographic-min").strip(),
        kappa=_get(ex, "kappa", float, None),
        ks_tol=_get(ex, "ks_tol", float, None),
        limit=ex.get("limit"),
        scenario_params=params,
        panel=pan,
        output_dir=cp["output"].get("dir") if "output" in cp else None,
    )


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    return parse_config(text)


def build_scenario(cfg: ExperimentConfig, library=None) -> Scenario:
    if library and cfg.scenario in library:
        return library[cfg.scenario]
    try:
        return get_scenario(cfg.scenario, cfg.grid, **cfg.scenario_params)
    except TypeError as e:
        raise ConfigError(f"bad scenario parameters: {e}") from None
    except ValueError as e:
        raise ConfigError(f"scenario does not fit the grid: {e}") from None


def _need_integrand(sc: Scenario, tester: str):
    if sc.kind != "integrand":
        raise ConfigError(f"tester {tester} needs an integrand scenario; {sc.id} is a set scenario")


def _limit(sc: Scenario, cfg: ExperimentConfig):
    if cfg.limit is None:
        return sc.limit
    if cfg.limit not in sc.alt_limits:
        raise ConfigError(f"scenario {sc.id} has no alternative limit {cfg.limit!r}")
    return sc.alt_limits[cfg.limit]


def _ledger(sc: Scenario, cfg: ExperimentConfig):
    if sc.ledger_spec is None:
        raise ConfigError(f"scenario {sc.id} has no radius ledger")
    return sc.ledger(cfg.N, cfg.seed, cfg.kappa)


def run_experiment(cfg: ExperimentConfig, library=None) -> TestReport:
    """Execute one configured tester and return its report.

    library optionally maps scenario ids to prebuilt Scenario objects.
    """
    sc = build_scenario(cfg, library)
    g = sc.grid
    p = cfg.panel
    t = cfg.tester
    eps = sc.eps if cfg.eps is None else cfg.eps
    K = panels.parse_set(g, p["set"]) if "set" in p else ClosedSet.full(g)
    if t == "rcs-convergence":
        ledger = _ledger(sc, cfg)
        u = panels.parse_u_panel(g, p["u"]) if "u" in p else sc.u_panel(ledger)
        rep = testers.test_rcs_convergence(
            sc.hitting_sequence(), sc.hitting_limit(), u, cfg.N, cfg.seed, cfg.tol, ledger, sc.indices
        )
    elif t == "epi-dist":
        _need_integrand(sc, t)
        epi = panels.parse_epi_panel(g, p["epi"]) if "epi" in p else sc.epi_panel
        if not epi:
            raise ConfigError(f"scenario {sc.id} has no default epi panel")
        rep = testers.test_epi_convergence_dist(
            sc.sequence, _limit(sc, cfg), epi, cfg.N, cfg.seed, cfg.tol, cfg.mode,
            0.02 if cfg.kappa is None else cfg.kappa, sc.indices,
        )
    elif t == "argmin-upper-fell":
        _need_integrand(sc, t)
        kp = panels.parse_k_panel(g, p["k"]) if "k" in p else sc.k_panel
        rep = testers.test_argmin_upper_fell(
            sc.sequence, sc.eps_seq, _limit(sc, cfg), eps, kp, cfg.N, cfg.seed, cfg.tol,
            sc.epi_convergent, sc.indices,
        )
    elif t == "argmin-fell":
        _need_integrand(sc, t)
        lim = _limit(sc, cfg)
        if lim.unique_argmin and sc.ledger_spec is not None:
            ledger = _ledger(sc, cfg)
            u = panels.parse_u_panel(g, p["u"]) if "u" in p else sc.u_panel(ledger)
        else:
            u = panels.parse_u_panel(g, p["u"]) if "u" in p else []
        rep = testers.test_argmin_fell(
            sc.sequence, sc.eps_seq, lim, K, cfg.eta, cfg.N, cfg.seed, cfg.tol, u, cfg.ks_tol,
            lim.unique_argmin, epi_verified=sc.epi_convergent, indices=sc.indices, rule=SelectionRule(cfg.rule),
        )
    elif t == "selection":
        _need_integrand(sc, t)
        fp = panels.parse_f_panel(g, p["f"]) if "f" in p else sc.f_panel
        rep = testers.test_selection_portmanteau(
            sc.sequence, sc.eps_seq, SelectionRule(cfg.rule), _limit(sc, cfg), eps, fp, cfg.N, cfg.seed,
            cfg.tol, K, cfg.eta, sc.indices,
        )
    elif t == "tightness":
        _need_integrand(sc, t)
        _, rep = testers.test_tightness(sc.sequence, sc.eps_seq, K, cfg.N, cfg.seed, cfg.eta, sc.indices)
    else:
        rep = continuity_screen_report(sc, cfg)
    rep.scenario = sc.id
    return rep


def continuity_screen_report(sc: Scenario, cfg: ExperimentConfig) -> TestReport:
    """Screen candidate radii around one center against the hitting limit of the scenario."""
    g = sc.grid
    p = cfg.panel
    center = panels.parse_center(g, p.get("center", "0"))
    if "radii" in p:
        radii = panels.parse_floats(p["radii"])
    elif sc.ledger_spec is not None:
        radii = candidate_radii(sc.ledger_spec.base_radii, sc.ledger_spec.offsets)
    else:
        raise ConfigError("continuity-screen needs radii")
    delta = float(p.get("delta", g.h))
    kappa = 0.02 if cfg.kappa is None else cfg.kappa
    try:
        res = screen_radii(sc.hitting_limit(), center, radii, delta, cfg.N, cfg.seed, kappa)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    accepted = [r.radius for r in res if r.accepted]
    rows = [
        PanelResult(
            f"r{i}",
            f"{r.radius:g}: outer {r.outer:.6g}, inner {r.inner:.6g}",
            None,
            [("outer", Estimate(r.outer, r.std_error)), ("inner", Estimate(r.inner, r.std_error))],
            abs(r.outer - r.inner),
            not r.accepted,
            "accepted" if r.accepted else "rejected",
        )
        for i, r in enumerate(res)
    ]
    kept = [r for r in res if r.accepted]
    return TestReport(
        "continuity-screen",
        PASS if accepted else HYPOTHESIS_NOT_MET,
        float(max((abs(r.outer - r.inner) for r in kept), default=0.0)),
        float(max((r.threshold for r in kept), default=kappa)),
        kappa,
        cfg.N,
        cfg.seed,
        rows,
        {
            "center": list(center.coords),
            "delta": delta,
            "accepted": accepted,
            "rejected": [r.radius for r in res if not r.accepted],
        },
    )


def output_dir(cfg: ExperimentConfig, override=None) -> Path:
    if override is not None:
        return Path(override)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return Path(os.environ.get(OUTPUT_ENV, "epilab-output"))


def write_artifacts(report: TestReport, out: Path, plot: bool = True) -> list[Path]:
    """report.json, series.csv, summary.txt and (if matplotlib is importable) series.png."""
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for name, text in (
        ("report.json", report.to_json()),
        ("series.csv", report.series_csv()),
        ("summary.txt", report.summary()),
    ):
        path = out / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        files.append(path)
    if plot:
        try:
            from epilab.plotting import plot_series

            fig = plot_series(report, out / "series.png")
        except ImportError:
            fig = None
        if fig is not None:
            files.append(fig)
    return files


def exit_code(report: TestReport) -> int:
    return EXIT_CODES[report.verdict]
