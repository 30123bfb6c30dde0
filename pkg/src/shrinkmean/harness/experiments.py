"""Named benchmark experiments and their on-disk outputs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..estimators import EstimatorSpec, EtaRule, parse_estimator, shrink_spec
from ..simulate import CONTAMINATION_VALUE, DistributionSpec, SeedPlan, benchmark_distributions
from ..weights import make_weight
from . import persist
from .core import ExperimentConfig, Split
from .tables import BestSplit, SummaryTable, best_split, sweep_contamination, sweep_splits, table_relative

EXPERIMENTS = ("table1", "splits", "best-split", "contamination", "violations")
EXPERIMENT_IDS = {name: i + 1 for i, name in enumerate(EXPERIMENTS)}
SIZES_EXPERIMENT_ID = len(EXPERIMENTS) + 1

BASES = ("mean", "median", "tm", "mom")
TABLE1_WEIGHTS = ("exp", "rational", "winsorize", "indicator", "lee-valiant")
VIOLATION_WEIGHTS = ("winsorize", "rational", "log1", "log2", "circle", "invsqrt")
CONTAMINATION_WEIGHTS = ("indicator", "winsorize", "lee-valiant", "exp", "rational")
BEST_SPLIT_BASES = ("mean", "median")

DEFAULT_SPLITS = ("NA", "0.05", "0.5", "0.95")
DEFAULT_EPSILONS = (0.0, 0.05, 0.1, 0.2)
DEFAULT_N_GRID = (100, 200, 300, 400, 500, 600, 700, 800, 900, 1000)
DEFAULT_M_GRID = (2, 5, 10, 15, 20, 25, 30, 40, 50)
DEFAULT_SIZES = (100, 200, 300, 400, 500, 600, 700, 800, 900, 1000)


@dataclass
class BenchOptions:
    """Shared experiment settings; defaults are the standard benchmark constants."""

    distributions: list[DistributionSpec] = field(default_factory=benchmark_distributions)
    N: int = 500
    m: int = 25
    delta: float = 0.05
    epsilon: float = 0.0
    contamination_value: float = CONTAMINATION_VALUE
    trials: int = 10_000
    seed: int = 0
    threads: int = 1
    p: float = 2.0
    # None picks the experiment default: log, or theory for the contamination sweep
    eta_rule: EtaRule | None = None
    # trimming/bucket level rule; None means log, or eps for the contamination sweep
    levels: str | None = None
    estimators: list[EstimatorSpec] | None = None

    def config(self, estimators: list[EstimatorSpec], experiment: str, **changes) -> ExperimentConfig:
        cfg = ExperimentConfig(
            distributions=list(self.distributions),
            estimators=list(self.estimators or estimators),
            N=self.N,
            split=Split.absolute(self.m),
            delta=self.delta,
            epsilon=self.epsilon,
            contamination_value=self.contamination_value,
            trials=self.trials,
            seed_plan=SeedPlan(self.seed, EXPERIMENT_IDS.get(experiment, SIZES_EXPERIMENT_ID)),
            threads=self.threads,
        )
        return cfg.with_(**changes) if changes else cfg


_LEVEL_PARAM = {"tm": "k", "wm": "k", "mom": "K"}


def shrinkage_grid(
    bases, weights, p: float = 2.0, eta_rule: EtaRule | None = None, levels: str = "log"
) -> list[EstimatorSpec]:
    """Each base estimator followed by its shrunk versions, one per weight.

    With ``levels="eps"`` bare ``tm``, ``wm`` and ``mom`` bases use the
    contamination-aware trimming level and bucket count.
    """
    if levels not in ("log", "eps"):
        raise ValueError(f"unknown level rule {levels!r}; expected log or eps")
    out = []
    for b in bases:
        if levels == "eps" and b in _LEVEL_PARAM:
            b = f"{b}:{_LEVEL_PARAM[b]}=eps"
        base = parse_estimator(b)
        out.append(base)
        out.extend(shrink_spec(base, make_weight(w, p), eta_rule or EtaRule()) for w in weights)
    return out


@dataclass
class ExperimentResult:
    name: str
    table: SummaryTable | None = None
    best: list[BestSplit] | None = None
    figures: list[persist.Figure] = field(default_factory=list)

    def summary_markdown(self) -> str:
        if self.table is not None:
            return persist.to_markdown(self.table)
        return _best_split_markdown(self.best or [])

    def save(self, directory, raw: bool = True, svg: bool = True) -> list[Path]:
        out = Path(directory)
        paths = []
        if self.table is not None:
            if raw:
                paths.append(persist.write_raw(self.table, out / "raw.csv"))
            paths.append(persist.write_summary_csv(self.table, out / "summary.csv"))
            paths.append(persist.write_summary_markdown(self.table, out / "summary.md", title=self.name))
        if self.best is not None:
            paths.extend(_write_best_split(self.best, out, raw))
        for fig in self.figures:
            paths.extend(persist.persist(fig, out, svg=svg))
        return paths


# -- experiments -------------------------------------------------------------

def run_table1(opts: BenchOptions, sizes: list[int] | None = None) -> ExperimentResult:
    """Relative difference of every shrunk base estimator against the base on the full sample."""
    specs = shrinkage_grid(BASES, TABLE1_WEIGHTS, opts.p, opts.eta_rule, opts.levels or "log")
    table = table_relative(opts.config(specs, "table1"))
    table.layout = "by-weight"
    result = ExperimentResult("table1", table)
    if sizes:
        result.figures.append(_sizes_figure(opts, sizes))
    return result


def run_violations(opts: BenchOptions) -> ExperimentResult:
    """Same comparison for weights outside the analyzed class, with two reference weights."""
    specs = shrinkage_grid(BASES, VIOLATION_WEIGHTS, opts.p, opts.eta_rule, opts.levels or "log")
    table = table_relative(opts.config(specs, "violations"))
    table.layout = "by-weight"
    return ExperimentResult("violations", table)


def run_splits(
    opts: BenchOptions, splits: list[str] | None = None, ratios: list[float] | None = None
) -> ExperimentResult:
    """Split-ratio sweep; ``ratios`` adds extra points to the figure only."""
    specs = shrinkage_grid(BASES, TABLE1_WEIGHTS, opts.p, opts.eta_rule, opts.levels or "log")
    cfg = opts.config(specs, "splits")
    table = sweep_splits(cfg, [Split.parse(s) for s in (splits or DEFAULT_SPLITS)])
    curve = table
    extra = [r for r in (ratios or []) if f"{r:g}" not in table.settings]
    if extra:
        more = sweep_splits(cfg, [Split.fraction(r) for r in extra], keep_raw=False)
        curve = table.merge(more)
    return ExperimentResult("splits", table, figures=[_split_figure(curve, cfg)])


def run_contamination(opts: BenchOptions, epsilons: list[float] | None = None) -> ExperimentResult:
    eta = opts.eta_rule or EtaRule("theory")
    specs = shrinkage_grid(BASES, CONTAMINATION_WEIGHTS, opts.p, eta, opts.levels or "eps")
    table = sweep_contamination(
        opts.config(specs, "contamination"), list(epsilons if epsilons is not None else DEFAULT_EPSILONS)
    )
    return ExperimentResult("contamination", table)


def run_best_split(
    opts: BenchOptions,
    m_grid: list[int] | None = None,
    N_grid: list[int] | None = None,
    replications: int = 50,
) -> ExperimentResult:
    specs = shrinkage_grid(BEST_SPLIT_BASES, TABLE1_WEIGHTS, opts.p, opts.eta_rule, opts.levels or "log")
    cfg = opts.config(specs, "best-split")
    best = best_split(
        cfg, list(m_grid or DEFAULT_M_GRID), list(N_grid or DEFAULT_N_GRID), replications
    )
    return ExperimentResult("best-split", best=best, figures=[_best_split_figure(best, cfg)])


# -- figures -----------------------------------------------------------------

def _sizes_figure(opts: BenchOptions, sizes: list[int]) -> persist.Figure:
    """Error quantile against N for the base estimators and the shrunk median."""
    bases = [parse_estimator(b) for b in BASES]
    shrunk = shrink_spec(bases[1], make_weight("rational", opts.p), opts.eta_rule or EtaRule())
    specs = [*bases, shrunk]
    ratio = opts.m / opts.N
    fig = persist.Figure("sizes", "N", f"{1 - opts.delta:g}-quantile error", logy=True)
    curves: dict[str, dict[str, list]] = {}
    for N in sizes:
        cfg = opts.config(specs, "sizes", N=N, split=Split.fraction(ratio))
        table = table_relative(cfg, keep_raw=False)
        for d in table.distributions:
            for spec in specs:
                xs, ys = curves.setdefault(d, {}).setdefault(spec.id, ([], []))
                xs.append(N)
                ys.append(table.quantile(d, spec.id))
    for d, series in curves.items():
        fig.panels[d] = [persist.Series(k, xs, ys) for k, (xs, ys) in series.items()]
    return fig


def _split_figure(table: SummaryTable, cfg: ExperimentConfig) -> persist.Figure:
    fig = persist.Figure("split_eval", "split ratio m/N", f"{table.level:g}-quantile error")
    ratios = []
    for s in table.settings:
        split = Split.parse(s)
        if split.aliased:
            continue
        ratios.append((split.base_size(cfg.N) / cfg.N, s))
    ratios.sort()
    for base in (e for e in table.estimators if not e.is_shrinkage):
        shrunk = [e for e in table.estimators if e.is_shrinkage and e.base.id == base.id]
        if not shrunk:
            continue
        for d in table.distributions:
            xs = [r for r, _ in ratios]
            series = [
                persist.Series(e.weight.name, xs, [table.quantile(d, e.id, s) for _, s in ratios])
                for e in shrunk
            ]
            ref = table.quantile(d, base.id, ratios[0][1]) if ratios else math.nan
            series.append(persist.Series(f"{base.id} (full sample)", xs, [ref] * len(xs)))
            fig.panels[f"{base.id} {d}"] = series
    return fig


def _best_split_figure(best: list[BestSplit], cfg: ExperimentConfig) -> persist.Figure:
    fig = persist.Figure("best_split", "N", "m*")
    groups: dict[str, dict[str, list[BestSplit]]] = {}
    by_id = {e.id: e for e in cfg.estimators}
    for b in best:
        spec = by_id[b.estimator]
        groups.setdefault(f"{spec.base.id} {b.distribution}", {}).setdefault(spec.weight.name, []).append(b)
    for panel, series in groups.items():
        fig.panels[panel] = []
        for label, items in series.items():
            items.sort(key=lambda b: b.N)
            bands = [b.band() for b in items]
            fig.panels[panel].append(
                persist.Series(
                    label,
                    [b.N for b in items],
                    [b.mean for b in items],
                    [lo for lo, _ in bands],
                    [hi for _, hi in bands],
                )
            )
    return fig


# -- best-split output ---------------------------------------------------------

def _best_split_rows(best: list[BestSplit]) -> list[list[str]]:
    rows = []
    for b in best:
        lo, hi = b.band()
        rows.append([b.distribution, b.estimator, str(b.N), f"{b.mean:g}", f"{lo:g}", f"{hi:g}"])
    return rows


BEST_SPLIT_COLUMNS = ["distribution", "estimator", "N", "m_star_mean", "m_star_lower", "m_star_upper"]


def _best_split_markdown(best: list[BestSplit]) -> str:
    rows = [BEST_SPLIT_COLUMNS, *_best_split_rows(best)]
    widths = [max(len(r[i]) for r in rows) for i in range(len(BEST_SPLIT_COLUMNS))]
    lines = ["| " + " | ".join(c.ljust(w) for c, w in zip(r, widths)) + " |" for r in rows]
    lines.insert(1, "|" + "|".join("-" * (w + 2) for w in widths) + "|")
    return "\n".join(lines) + "\n"


def _write_best_split(best: list[BestSplit], out: Path, raw: bool) -> list[Path]:
    paths = []
    if raw:
        path = out / "raw.csv"
        with persist._open(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replication", "distribution", "estimator", "N", "m_star"])
            for b in best:
                for r, m in enumerate(b.m_star):
                    w.writerow([r, b.distribution, b.estimator, b.N, int(m)])
        paths.append(path)
    path = out / "summary.csv"
    with persist._open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BEST_SPLIT_COLUMNS)
        w.writerows(_best_split_rows(best))
    paths.append(path)
    path = out / "summary.md"
    with persist._open(path) as fh:
        fh.write("# best-split\n\nbase size minimizing the error quantile, with a 95% replication band\n\n")
        fh.write(_best_split_markdown(best))
    paths.append(path)
    return paths
