"""CSV, JSON and SVG artifacts for experiment reports and simulated datasets."""

import csv
import json
import math
from pathlib import Path

import numpy as np
from matplotlib import rc_context
from matplotlib.figure import Figure

from .harness import METHODS, METRICS

REPLICATION_COLUMNS = ("experiment_id", "train_idx", "test_idx", "method", "cutoff", "fi", "pmd", "mape")
SUMMARY_COLUMNS = ("experiment_id", "method", "cutoff", "metric", "mean", "ci_low", "ci_high", "n")
TEST_COLUMNS = ("experiment_id", "cutoff", "metric", "t_stat", "dof", "significant", "better_method")

_SVG_METADATA = {"Date": None, "Creator": "cganeb"}
_COLORS = {METHODS[0]: "#c0392b", METHODS[1]: "#2c3e50"}


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def _write_csv(path, columns, rows):
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_fmt(row[c]) for c in columns])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _save_svg(fig, path):
    # fixed hash salt keeps clip-path ids stable between runs
    with rc_context({"svg.hashsalt": "cganeb", "svg.fonttype": "path"}):
        try:
            fig.savefig(path, format="svg", metadata=_SVG_METADATA)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc


def replication_rows(reports):
    for report in reports:
        for r in report.rows:
            train_idx, test_idx = r.replication_id
            yield dict(
                experiment_id=r.experiment_id,
                train_idx=train_idx,
                test_idx=test_idx,
                method=r.method,
                cutoff=r.cutoff_fraction,
                fi=float(r.fi),
                pmd=float(r.pmd),
                mape=float(r.mape),
            )


def emit_histogram(dataset, path):
    """Bar chart of observed counts with one bin per integer ``0..max(y)``.

    Returns the bar heights, which always sum to the number of sites.
    """
    y = np.asarray(dataset.y)
    if y.size == 0:
        raise ValueError("dataset is empty")
    counts = np.bincount(y, minlength=int(y.max()) + 1)
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    ax.bar(np.arange(counts.size), counts, width=0.9, color="#2c3e50")
    cfg = dataset.config
    ax.set_title(f"alpha={cfg.dispersion_alpha}, beta0={cfg.intercept_beta0}, n={cfg.n_sites}")
    ax.set_xlabel("observed crash count")
    ax.set_ylabel("sites")
    fig.tight_layout()
    _save_svg(fig, path)
    return counts


def plot_ci(reports, metric, path):
    """One panel per experiment: mean and CI per cutoff for both methods.

    A ``*`` above a cutoff marks a significant paired test; each marker is
    written as an SVG group with id ``sig-{experiment}-{metric}-{cutoff}``.
    """
    reports = list(reports)
    fig = Figure(figsize=(4 * max(1, len(reports)), 4))
    axes = fig.subplots(1, max(1, len(reports)), squeeze=False)[0]
    for ax, report in zip(axes, reports):
        spec = report.spec
        x = np.arange(len(spec.cutoffs))
        top = 0.0
        for k, method in enumerate(METHODS):
            stats = {s["cutoff"]: s for s in report.summaries if s["method"] == method and s["metric"] == metric}
            pos, mean, lo, hi = [], [], [], []
            for i, c in enumerate(spec.cutoffs):
                if c in stats:
                    s = stats[c]
                    pos.append(x[i] + (k - 0.5) * 0.3)
                    mean.append(s["mean"])
                    lo.append(s["mean"] - s["ci_low"] if s["n"] > 1 else 0.0)
                    hi.append(s["ci_high"] - s["mean"] if s["n"] > 1 else 0.0)
            if pos:
                ax.errorbar(pos, mean, yerr=[lo, hi], fmt="o", capsize=3, color=_COLORS[method], label=method)
                top = max(top, max(m + h for m, h in zip(mean, hi)))
        for t in report.tests:
            if t["metric"] == metric and t["significant"]:
                i = spec.cutoffs.index(t["cutoff"])
                ax.text(x[i], top * 1.05 + 1e-3, "*", ha="center", gid=f"sig-{spec.id}-{metric}-{t['cutoff']}")
        ax.set_xticks(x, [f"{100 * c:g}%" for c in spec.cutoffs])
        ax.set_title(spec.id)
        ax.set_xlabel("hotspot cutoff")
        ax.set_ylabel(metric.upper())
        if ax.get_legend_handles_labels()[0]:
            ax.legend(fontsize="small")
    fig.tight_layout()
    _save_svg(fig, path)


def emit_report(reports, directory):
    """Write replications.csv, summary.csv, tests.csv, metadata.json and one
    ``ci_plot_{metric}.svg`` per metric.

    ``reports`` may be a single report or a list.  Everything except
    metadata.json (timings) is byte-identical for identical inputs.
    """
    if not isinstance(reports, (list, tuple)):
        reports = [reports]
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "replications.csv", REPLICATION_COLUMNS, replication_rows(reports))
    _write_csv(
        out / "summary.csv",
        SUMMARY_COLUMNS,
        ({"experiment_id": r.spec.id, **s} for r in reports for s in r.summaries),
    )
    _write_csv(out / "tests.csv", TEST_COLUMNS, ({"experiment_id": r.spec.id, **t} for r in reports for t in r.tests))
    for metric in METRICS:
        plot_ci(reports, metric, out / f"ci_plot_{metric}.svg")
    meta = {
        r.spec.id: {
            "spec": r.spec.to_dict(),
            "replications_completed": len(r.replication_ids),
            "replications_expected": r.spec.n_replications,
            "partial": r.partial,
            "failures": [list(f) for f in r.failures],
            "timings_s": r.timings,
        }
        for r in reports
    }
    try:
        with open(out / "metadata.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
    except OSError as exc:
        raise OSError(f"cannot write {out / 'metadata.json'}: {exc}") from exc
    return out
