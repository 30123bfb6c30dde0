"""Summaries over trials: relative-difference tables, sweeps and the best-split search."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..estimators import EstimatorSpec, order_rank
from .core import CellResult, ExperimentConfig, Split, quantile_of_errors, run

log = logging.getLogger(__name__)


@dataclass
class RawBlock:
    """Per-trial errors of one (distribution, setting) cell."""

    distribution: str
    setting: str
    first_trial: int
    estimator_ids: list[str]
    errors: np.ndarray


@dataclass
class SummaryTable:
    """``(1 - delta)``-quantile errors per (distribution, setting, estimator).

    ``value`` selects what the grid shows: ``relative`` differences in
    percent or ``log10`` of the quantiles. ``layout`` is either ``by-weight``
    (one line per weight function, columns grouped by base estimator) or
    ``blocks`` (one block of lines per base estimator, columns grouped by
    distribution then setting).
    """

    level: float
    distributions: list[str]
    settings: list[str]
    estimators: list[EstimatorSpec]
    references: dict[str, str]
    quantiles: dict[tuple[str, str, str], float] = field(default_factory=dict)
    missing: dict[tuple[str, str, str], int] = field(default_factory=dict)
    value: str = "relative"
    layout: str = "blocks"
    raw: list[RawBlock] = field(default_factory=list)
    weight_sum_checks: int = 0
    weight_sum_violations: int = 0

    def quantile(self, distribution: str, estimator: str, setting: str = "") -> float:
        return self.quantiles[(distribution, setting, estimator)]

    def relative(self, distribution: str, estimator: str, setting: str = "") -> float:
        q = self.quantile(distribution, estimator, setting)
        q_ref = self.quantile(distribution, self.references[estimator], setting)
        return relative_difference(q, q_ref)

    def log10(self, distribution: str, estimator: str, setting: str = "") -> float:
        q = self.quantile(distribution, estimator, setting)
        return math.log10(q) if q > 0 else math.nan

    def cell(self, distribution: str, estimator: str, setting: str = "") -> float:
        if self.value == "log10":
            return self.log10(distribution, estimator, setting)
        return self.relative(distribution, estimator, setting)

    def rows(self) -> list[dict]:
        """Long-format records, one per (distribution, setting, estimator)."""
        out = []
        for dist in self.distributions:
            for setting in self.settings:
                for spec in self.estimators:
                    key = (dist, setting, spec.id)
                    out.append(
                        {
                            "distribution": dist,
                            "setting": setting,
                            "estimator": spec.id,
                            "reference": self.references[spec.id],
                            "quantile": self.quantiles[key],
                            "relative_difference": self.relative(dist, spec.id, setting),
                            "log10_quantile": self.log10(dist, spec.id, setting),
                            "missing": self.missing.get(key, 0),
                        }
                    )
        return out

    def merge(self, other: SummaryTable) -> SummaryTable:
        """Union of two tables over disjoint settings (same estimators and distributions)."""
        if [e.id for e in other.estimators] != [e.id for e in self.estimators]:
            raise ValueError("cannot merge tables with different estimator lists")
        clash = set(self.settings) & set(other.settings)
        if clash:
            raise ValueError(f"settings {sorted(clash)} appear in both tables")
        return SummaryTable(
            level=self.level,
            distributions=self.distributions,
            settings=self.settings + other.settings,
            estimators=self.estimators,
            references=self.references,
            quantiles={**self.quantiles, **other.quantiles},
            missing={**self.missing, **other.missing},
            value=self.value,
            layout=self.layout,
            raw=self.raw + other.raw,
            weight_sum_checks=self.weight_sum_checks + other.weight_sum_checks,
            weight_sum_violations=self.weight_sum_violations + other.weight_sum_violations,
        )


def relative_difference(q: float, q_ref: float) -> float:
    if not q_ref > 0 or math.isnan(q):
        return math.nan
    return 100.0 * (q - q_ref) / q_ref


def _with_references(
    estimators: list[EstimatorSpec], reference: EstimatorSpec | None
) -> tuple[list[EstimatorSpec], dict[str, str]]:
    """Estimator list extended with any missing references, and the reference of each id."""
    specs = list(estimators)
    ids = {e.id for e in specs}

    def ensure(spec: EstimatorSpec) -> None:
        if spec.id not in ids:
            specs.append(spec)
            ids.add(spec.id)

    refs: dict[str, str] = {}
    if reference is not None:
        if reference.is_shrinkage:
            raise ValueError("the reference must be a base estimator evaluated on the full sample")
        ensure(reference)
    for spec in list(specs):
        if reference is not None:
            refs[spec.id] = reference.id
        elif spec.is_shrinkage:
            ensure(spec.base)
            refs[spec.id] = spec.base.id
        else:
            refs[spec.id] = spec.id
    for spec in specs:
        refs.setdefault(spec.id, spec.id if reference is None else reference.id)
    return specs, refs


def summarize(
    config: ExperimentConfig,
    cells: list[CellResult],
    references: dict[str, str],
    setting: str = "",
    keep_raw: bool = True,
) -> SummaryTable:
    level = 1.0 - config.delta
    table = SummaryTable(
        level=level,
        distributions=[c.distribution.id for c in cells],
        settings=[setting],
        estimators=list(config.estimators),
        references=references,
    )
    for cell in cells:
        q, missing = quantile_of_errors(cell.errors, level)
        for spec, qj, mj in zip(config.estimators, q, missing):
            key = (cell.distribution.id, setting, spec.id)
            table.quantiles[key] = float(qj)
            table.missing[key] = int(mj)
        table.weight_sum_checks += cell.weight_sum_checks
        table.weight_sum_violations += cell.weight_sum_violations
        if keep_raw:
            table.raw.append(
                RawBlock(cell.distribution.id, setting, config.first_trial, cell.estimator_ids, cell.errors)
            )
    return table


def table_relative(
    config: ExperimentConfig,
    reference: EstimatorSpec | None = None,
    setting: str = "",
    keep_raw: bool = True,
) -> SummaryTable:
    """Run ``config`` and compare every estimator with its reference.

    Without ``reference`` each shrinkage estimator is compared with its own
    base estimator, evaluated on the full sample; base rows compare with
    themselves. References missing from the estimator list are added.
    """
    specs, refs = _with_references(config.estimators, reference)
    cfg = config.with_(estimators=specs)
    table = summarize(cfg, run(cfg), refs, setting, keep_raw)
    if table.weight_sum_violations:
        log.warning(
            "weight-sum bounds violated in %d of %d solved trials",
            table.weight_sum_violations,
            table.weight_sum_checks,
        )
    return table


def sweep_splits(
    config: ExperimentConfig, splits: list[Split], keep_raw: bool = True
) -> SummaryTable:
    """:func:`table_relative` per split mode; the setting column holds the split label."""
    table = None
    for split in splits:
        part = table_relative(config.with_(split=split), setting=split.label, keep_raw=keep_raw)
        table = part if table is None else table.merge(part)
    return table


def sweep_contamination(
    config: ExperimentConfig, epsilons: list[float], keep_raw: bool = True
) -> SummaryTable:
    """:func:`table_relative` per contamination level, shown as ``log10`` quantiles."""
    table = None
    for eps in epsilons:
        part = table_relative(config.with_(epsilon=float(eps)), setting=f"{eps:g}", keep_raw=keep_raw)
        table = part if table is None else table.merge(part)
    table.value = "log10"
    return table


def argmin_split(m_grid, errors) -> int:
    """``m`` with the smallest error; ties go to the smallest ``m``."""
    m = np.asarray(m_grid)
    e = np.asarray(errors, dtype=float)
    if m.shape != e.shape or m.size == 0:
        raise ValueError("m_grid and errors must be non-empty and of equal length")
    order = np.argsort(m, kind="stable")
    m, e = m[order], e[order]
    if np.all(np.isnan(e)):
        raise ValueError("every error is missing")
    return int(m[np.nanargmin(e)])


@dataclass(frozen=True)
class BestSplit:
    distribution: str
    estimator: str
    N: int
    m_star: np.ndarray  # one entry per replication

    @property
    def mean(self) -> float:
        return float(self.m_star.mean())

    def band(self, lower: float = 0.025, upper: float = 0.975) -> tuple[float, float]:
        s = np.sort(self.m_star)
        n = s.size
        # smallest value with at least the given mass at or below it
        return float(s[order_rank(lower, n) - 1]), float(s[order_rank(upper, n) - 1])


def best_split(
    config: ExperimentConfig,
    m_grid: list[int],
    N_grid: list[int] | None = None,
    replications: int = 50,
) -> list[BestSplit]:
    """Error-minimizing base size per (distribution, shrinkage estimator, N).

    Replication ``r`` uses trial indices ``r*T .. (r+1)*T - 1``, so
    replications are independent while every ``m`` within a replication sees
    the same draws.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    Ns = [config.N] if N_grid is None else [int(N) for N in N_grid]
    shrink = [e for e in config.estimators if e.is_shrinkage]
    if not shrink:
        raise ValueError("best_split needs at least one shrinkage estimator")
    out = []
    T = config.trials
    for N in Ns:
        bad = [m for m in m_grid if not 1 <= m <= N - 1]
        if bad:
            raise ValueError(f"m values {bad} lie outside [1, N-1] for N={N}")
        # (replication, m, dist, estimator)
        q = np.empty((replications, len(m_grid), len(config.distributions), len(shrink)))
        for r in range(replications):
            for i, m in enumerate(m_grid):
                cfg = config.with_(N=N, split=Split.absolute(m), estimators=shrink, first_trial=r * T)
                for j, cell in enumerate(run(cfg)):
                    q[r, i, j], _ = quantile_of_errors(cell.errors, 1.0 - config.delta)
        for j, dist in enumerate(config.distributions):
            for k, spec in enumerate(shrink):
                stars = np.array([argmin_split(m_grid, q[r, :, j, k]) for r in range(replications)])
                out.append(BestSplit(dist.id, spec.id, N, stars))
    return out
