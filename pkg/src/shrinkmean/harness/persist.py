"""Writing results to disk: raw per-trial CSV, summary CSV/markdown and figure series."""

from __future__ import annotations

import contextlib
import csv
import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..estimators import EstimatorSpec, Kind
from ..simulate import parse_distribution
from .core import TrialRecord
from .tables import SummaryTable


class PersistError(OSError):
    pass


@contextlib.contextmanager
def _open(path: Path, mode: str = "w"):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, mode, newline="", encoding="utf-8") as fh:
            yield fh
    except OSError as exc:
        raise PersistError(f"cannot {'write' if 'w' in mode else 'read'} {path}: {exc}") from exc


def _fmt(x: float) -> str:
    # repr round-trips exactly; missing values are empty cells
    return "" if math.isnan(x) else repr(float(x))


def _parse(s: str) -> float:
    return math.nan if s == "" else float(s)


# -- raw records -------------------------------------------------------------

def write_records(records: list[TrialRecord], path) -> Path:
    """Plain records: ``trial_index`` then one column per estimator id."""
    path = Path(path)
    ids = list(records[0].errors) if records else []
    with _open(path) as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["trial_index", *ids])
        for r in records:
            out.writerow([r.trial_index, *(_fmt(r.errors[k]) for k in ids)])
    return path


def read_records(path) -> list[TrialRecord]:
    path = Path(path)
    with _open(path, "r") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["trial_index"]:
        raise PersistError(f"{path} is not a records file")
    header = rows[0]
    keys = [k for k in header[1:] if k not in ("distribution", "setting")]
    start = len(header) - len(keys)
    return [
        TrialRecord(int(row[0]), {k: _parse(v) for k, v in zip(keys, row[start:])})
        for row in rows[1:]
    ]


def write_raw(table: SummaryTable, path) -> Path:
    """All trials of a table; grouping columns identify the distribution and setting."""
    path = Path(path)
    ids = [e.id for e in table.estimators]
    with _open(path) as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["trial_index", "distribution", "setting", *ids])
        for block in table.raw:
            cols = [block.estimator_ids.index(i) for i in ids]
            for t, row in enumerate(block.errors):
                out.writerow(
                    [block.first_trial + t, block.distribution, block.setting, *(_fmt(row[c]) for c in cols)]
                )
    return path


def read_raw(path) -> list[tuple[str, str, TrialRecord]]:
    path = Path(path)
    with _open(path, "r") as fh:
        rows = list(csv.reader(fh))
    if rows[0][:3] != ["trial_index", "distribution", "setting"]:
        raise PersistError(f"{path} is not a raw results file")
    ids = rows[0][3:]
    return [
        (row[1], row[2], TrialRecord(int(row[0]), {k: _parse(v) for k, v in zip(ids, row[3:])}))
        for row in rows[1:]
    ]


# -- summaries ---------------------------------------------------------------

SUMMARY_COLUMNS = [
    "distribution",
    "setting",
    "estimator",
    "reference",
    "quantile",
    "relative_difference",
    "log10_quantile",
    "missing",
]


def write_summary_csv(table: SummaryTable, path) -> Path:
    path = Path(path)
    with _open(path) as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SUMMARY_COLUMNS)
        for rec in table.rows():
            out.writerow(
                [_fmt(v) if isinstance(v, float) else v for v in (rec[c] for c in SUMMARY_COLUMNS)]
            )
    return path


def _short_dist(dist_id: str) -> str:
    try:
        return parse_distribution(dist_id).short
    except ValueError:
        return dist_id


def _row_label(spec: EstimatorSpec) -> str:
    if not spec.is_shrinkage:
        return spec.id
    label = f"w={spec.weight.label}"
    if spec.kind is Kind.SHRINK_W:
        label = "weighted " + label
    return label


def _line_key(spec: EstimatorSpec) -> tuple:
    return (spec.kind, spec.weight, str(spec.eta_rule))


def _cell_text(table: SummaryTable, value: float) -> str:
    if math.isnan(value):
        return "NA"
    return f"{value:.1f}" if table.value == "log10" else f"{value:.0f}"


def grid(table: SummaryTable) -> tuple[list[str], list[list[str]]]:
    """Header and body of the summary grid (strings, before alignment)."""
    settings = table.settings
    multi = len(settings) > 1
    if table.layout == "by-weight" and any(e.is_shrinkage for e in table.estimators):
        shrink = [e for e in table.estimators if e.is_shrinkage]
        bases = list(dict.fromkeys(e.base.id for e in shrink))
        # one line per (kind, weight, eta) shared across bases
        line_keys = list(dict.fromkeys(_line_key(e) for e in shrink))
        by_key = {(e.base.id, _line_key(e)): e for e in shrink}
        cols = [(b, d, s) for b in bases for d in table.distributions for s in settings]
        header = [""] + [
            f"{b}/{_short_dist(d)}" + (f"/{s}" if multi else "") for b, d, s in cols
        ]
        body = []
        for key in line_keys:
            first = next(e for e in shrink if _line_key(e) == key)
            line = [_row_label(first)]
            for b, d, s in cols:
                spec = by_key.get((b, key))
                line.append("" if spec is None else _cell_text(table, table.cell(d, spec.id, s)))
            body.append(line)
        return header, body

    cols = [(d, s) for d in table.distributions for s in settings]
    header = [""] + [f"{_short_dist(d)}" + (f" {s}" if s else "") for d, s in cols]
    order: list[EstimatorSpec] = []
    for spec in table.estimators:
        if spec.is_shrinkage or spec in order:
            continue
        order.append(spec)
        order.extend(e for e in table.estimators if e.is_shrinkage and e.base.id == spec.id)
    order.extend(e for e in table.estimators if e not in order)
    body = []
    for spec in order:
        label = _row_label(spec) if not spec.is_shrinkage else "  " + _row_label(spec)
        body.append([label] + [_cell_text(table, table.cell(d, spec.id, s)) for d, s in cols])
    return header, body


def to_markdown(table: SummaryTable) -> str:
    header, body = grid(table)
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]

    def line(cells):
        parts = [c.ljust(widths[0]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(cells)]
        return "| " + " | ".join(parts) + " |"

    rule = "|" + "|".join(
        "-" * (w + 2) if i == 0 else "-" * (w + 1) + ":" for i, w in enumerate(widths)
    ) + "|"
    return "\n".join([line(header), rule, *(line(r) for r in body)]) + "\n"


def write_summary_markdown(table: SummaryTable, path, title: str | None = None) -> Path:
    path = Path(path)
    what = "log10 of the" if table.value == "log10" else "relative difference (%) of the"
    intro = f"{what} {table.level:g}-quantile of the absolute errors\n\n"
    with _open(path) as fh:
        if title:
            fh.write(f"# {title}\n\n")
        fh.write(intro)
        fh.write(to_markdown(table))
        if table.weight_sum_checks:
            fh.write(
                f"\nweight-sum bound violations: {table.weight_sum_violations}"
                f" of {table.weight_sum_checks} solved trials\n"
            )
    return path


# -- figures -----------------------------------------------------------------

@dataclass
class Series:
    label: str
    x: list[float]
    y: list[float]
    lower: list[float] | None = None
    upper: list[float] | None = None


@dataclass
class Figure:
    """Line-chart data: one panel per key, several labelled series each."""

    name: str
    xlabel: str
    ylabel: str
    panels: dict[str, list[Series]] = field(default_factory=dict)
    logx: bool = False
    logy: bool = False


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9.=-]+", "_", text).strip("_")


def write_figure_csv(fig: Figure, directory) -> list[Path]:
    """One CSV per panel: ``series, x, y, lower, upper``."""
    paths = []
    for panel, series in fig.panels.items():
        path = Path(directory) / f"fig_{fig.name}_{_slug(panel)}.csv"
        with _open(path) as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["series", "x", "y", "lower", "upper"])
            for s in series:
                for i, (x, y) in enumerate(zip(s.x, s.y)):
                    lo = _fmt(s.lower[i]) if s.lower is not None else ""
                    hi = _fmt(s.upper[i]) if s.upper is not None else ""
                    out.writerow([s.label, _fmt(x), _fmt(y), lo, hi])
        paths.append(path)
    return paths


def write_figure_svg(fig: Figure, directory) -> Path:
    """Grid of line charts, saved without timestamps so reruns are byte-identical."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    panels = list(fig.panels.items())
    ncols = min(4, len(panels)) or 1
    nrows = math.ceil(len(panels) / ncols) or 1
    with matplotlib.rc_context({"svg.hashsalt": "shrinkmean", "svg.fonttype": "none"}):
        f, axes = plt.subplots(nrows, ncols, figsize=(3.2 * ncols, 2.6 * nrows), squeeze=False)
        for ax in axes.flat[len(panels):]:
            ax.set_visible(False)
        for ax, (panel, series) in zip(axes.flat, panels):
            for s in series:
                ax.plot(s.x, s.y, marker="o", markersize=2.5, linewidth=1.0, label=s.label)
                if s.lower is not None and s.upper is not None:
                    ax.fill_between(s.x, s.lower, s.upper, alpha=0.2)
            ax.set_title(panel, fontsize=8)
            ax.set_xlabel(fig.xlabel, fontsize=7)
            ax.set_ylabel(fig.ylabel, fontsize=7)
            ax.tick_params(labelsize=6)
            if fig.logx:
                ax.set_xscale("log")
            if fig.logy:
                ax.set_yscale("log")
        handles, labels = axes.flat[0].get_legend_handles_labels()
        if handles:
            f.legend(handles, labels, loc="lower center", ncol=min(6, len(labels)), fontsize=6)
        f.tight_layout(rect=(0, 0.06, 1, 1))
        buf = io.StringIO()
        f.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(f)
    path = Path(directory) / f"fig_{fig.name}.svg"
    with _open(path) as fh:
        fh.write(buf.getvalue())
    return path


def persist(obj, path, **kwargs):
    """Write records, a table or a figure according to its type.

    A list of :class:`TrialRecord` goes to ``path`` as CSV; a
    :class:`SummaryTable` goes to ``path`` (``.csv`` or ``.md``); a
    :class:`Figure` goes into the directory ``path``.
    """
    if isinstance(obj, list):
        return write_records(obj, path)
    if isinstance(obj, SummaryTable):
        if str(path).endswith(".md"):
            return write_summary_markdown(obj, path, **kwargs)
        return write_summary_csv(obj, path)
    if isinstance(obj, Figure):
        paths = write_figure_csv(obj, path)
        if kwargs.get("svg", True):
            paths.append(write_figure_svg(obj, path))
        return paths
    raise TypeError(f"cannot persist {type(obj).__name__}")
