"""Figures of per-index estimate series; matplotlib is imported only when a figure is drawn."""

from __future__ import annotations

from pathlib import Path

from epilab.stochastic.report import TestReport


def _panels(report: TestReport, prefix: str = ""):
    for p in report.panel:
        yield prefix + p.panel_id, p
    for c in report.components:
        yield from _panels(c, f"{prefix}{c.tester}:")


def plot_series(report: TestReport, path, max_panels: int = 24) -> Path | None:
    """Draw estimate-vs-index curves with limit bands; returns None when there is nothing to plot."""
    items = [(pid, p) for pid, p in _panels(report) if p.series][:max_panels]
    if not items:
        return None
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cols = min(4, len(items))
    rows = -(-len(items) // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.6 * rows), squeeze=False)
    for ax, (pid, p) in zip(axes.flat, items):
        labels = [i for i, _ in p.series]
        numeric = all(isinstance(i, (int, float)) for i in labels)
        x = [float(i) for i in labels] if numeric else list(range(len(labels)))
        y = [e.value for _, e in p.series]
        se = [3 * e.std_error for _, e in p.series]
        ax.errorbar(x, y, yerr=se, fmt="o-", ms=2.5, lw=0.8, capsize=1.5)
        if p.limit is not None:
            lo = p.limit.value - report.tol
            ax.axhline(p.limit.value, color="k", lw=0.8)
            ax.axhspan(lo, p.limit.value + report.tol, color="0.85", zorder=0)
        if not numeric:
            ax.set_xticks(x, [str(i) for i in labels])
        elif min(x) > 0 and max(x) / min(x) > 50:
            ax.set_xscale("log")
        title = f"{pid}: {p.description}"
        ax.set_title(title if len(title) < 40 else title[:37] + "...", fontsize=7)
        ax.tick_params(labelsize=6)
        if p.excluded:
            ax.set_facecolor("0.95")
    for ax in list(axes.flat)[len(items):]:
        ax.axis("off")
    fig.suptitle(f"{report.tester} / {report.scenario}: {report.verdict}", fontsize=9)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return out
