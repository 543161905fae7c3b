"""Structured verdicts of the convergence testers."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

PASS = "pass"
FAIL = "fail"
HYPOTHESIS_NOT_MET = "hypothesis-not-met"
VERDICTS = (PASS, FAIL, HYPOTHESIS_NOT_MET)


@dataclass
class Estimate:
    value: float
    std_error: float

    def to_dict(self) -> dict:
        return {"estimate": self.value, "std_error": self.std_error}


@dataclass
class PanelResult:
    panel_id: str
    description: str
    limit: Estimate | None
    series: list[tuple[object, Estimate]] = field(default_factory=list)
    tail_discrepancy: float | None = None
    excluded: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "panel_id": self.panel_id,
            "description": self.description,
            "limit": None if self.limit is None else self.limit.to_dict(),
            "series": [{"index": i, **e.to_dict()} for i, e in self.series],
            "tail_discrepancy": self.tail_discrepancy,
            "excluded": self.excluded,
            "note": self.note,
        }


@dataclass
class TestReport:
    """Verdict is pass iff max_discrepancy <= threshold (hypothesis failures aside)."""

    __test__ = False

    tester: str
    verdict: str
    max_discrepancy: float
    threshold: float
    tol: float
    n_samples: int
    seed: int
    panel: list[PanelResult] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    components: list[TestReport] = field(default_factory=list)
    scenario: str | None = None

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        return {
            "tester": self.tester,
            "scenario": self.scenario,
            "verdict": self.verdict,
            "max_discrepancy": self.max_discrepancy,
            "threshold": self.threshold,
            "tol": self.tol,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "panel": [p.to_dict() for p in self.panel],
            "diagnostics": self.diagnostics,
            "components": [c.to_dict() for c in self.components],
        }

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def series_rows(self, prefix: str = ""):
        for p in self.panel:
            pid = prefix + p.panel_id
            for i, e in p.series:
                yield (i, pid, e.value, e.std_error)
            if p.limit is not None:
                yield ("limit", pid, p.limit.value, p.limit.std_error)
        for c in self.components:
            yield from c.series_rows(prefix=f"{prefix}{c.tester}:")

    def series_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "panel_id", "estimate", "std_error"])
        for row in self.series_rows():
            w.writerow([row[0], row[1], repr(float(row[2])), repr(float(row[3]))])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [
            f"tester      : {self.tester}",
            f"scenario    : {self.scenario}",
            f"verdict     : {self.verdict}",
            f"discrepancy : {self.max_discrepancy:.6g} (threshold {self.threshold:.6g}, tol {self.tol:g})",
            f"replicates  : {self.n_samples}  seed {self.seed}",
        ]
        for c in self.components:
            lines.append(
                f"  - {c.tester}: {c.verdict} (discrepancy {c.max_discrepancy:.6g}, threshold {c.threshold:.6g})"
            )
        excluded = [p.panel_id for p in self.panel if p.excluded]
        if excluded:
            lines.append(f"excluded panel elements: {', '.join(excluded)}")
        for k in sorted(self.diagnostics):
            lines.append(f"{k}: {self.diagnostics[k]}")
        return "\n".join(lines) + "\n"


def _clean(obj):
    """Replace non-finite floats by strings so the JSON stays strict."""
    if isinstance(obj, float):
        if obj != obj:
            return "nan"
        if obj in (float("inf"), float("-inf")):
            return "+inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def not_met(tester: str, tol: float, n: int, seed: int, diagnostics: dict, scenario=None) -> TestReport:
    return TestReport(tester, HYPOTHESIS_NOT_MET, 0.0, tol, tol, n, seed, diagnostics=diagnostics, scenario=scenario)


def combine(tester: str, parts: list[TestReport], tol: float, n: int, seed: int, diagnostics: dict) -> TestReport:
    """Composite report; headline numbers come from the component with the worst margin."""
    if any(p.verdict == HYPOTHESIS_NOT_MET for p in parts):
        verdict = HYPOTHESIS_NOT_MET
    else:
        verdict = PASS if all(p.passed for p in parts) else FAIL
    worst = max(parts, key=lambda p: p.max_discrepancy - p.threshold)
    return TestReport(
        tester, verdict, worst.max_discrepancy, worst.threshold, tol, n, seed,
        diagnostics=diagnostics, components=parts,
    )


def report_schema() -> dict:
    """The published JSON schema for report.json."""
    from importlib import resources

    return json.loads(resources.files("epilab").joinpath("schemas", "report.schema.json").read_text("utf-8"))
