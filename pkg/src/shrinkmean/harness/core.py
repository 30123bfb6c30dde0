"""Monte Carlo engine: draws trials, evaluates estimators and records absolute errors.

Trials are processed in fixed-size chunks. Each trial draws from its own
stream, and every estimator works row by row, so the recorded errors do not
depend on the chunk size or on the number of worker threads.

Per trial ``i`` with distribution index ``j``, the stream
``seed_plan.stream(i, j)`` yields, in this order:

1. ``N`` clean points;
2. ``floor(eps N)`` positions contaminated in the full-sample copy;
3. ``floor(eps m)`` positions in the base part (first ``m`` points);
4. ``floor(eps n)`` positions in the main part (remaining ``n = N - m``).

Non-shrinkage estimators always see the contaminated full sample. Shrinkage
estimators compute their base estimate on the base part and shrink the main
part, or use the contaminated full sample for both under the ``NA`` split.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..estimators import EstimatorSpec, Kind, base_rows, shrink_rows
from ..estimators import order_rank
from ..simulate import (
    CONTAMINATION_VALUE,
    DistributionSpec,
    SeedPlan,
    contamination_count,
    sample,
)

log = logging.getLogger(__name__)

CHUNK_TRIALS = 1024
# floating-point slack on the weight-sum bounds
SUM_SLACK = 1e-9


@dataclass(frozen=True)
class Split:
    """How the ``N`` points are divided between the base and main estimates."""

    kind: str  # "fraction", "absolute" or "na"
    value: float = 0.0

    @classmethod
    def fraction(cls, ratio: float) -> Split:
        return cls("fraction", float(ratio))

    @classmethod
    def absolute(cls, m: int) -> Split:
        return cls("absolute", int(m))

    @classmethod
    def na(cls) -> Split:
        return cls("na")

    @classmethod
    def parse(cls, text: str) -> Split:
        t = str(text).strip().lower()
        if t in ("na", "full"):
            return cls.na()
        if t.startswith("m="):
            return cls.absolute(int(t[2:]))
        value = float(t)
        if value >= 1.0 and value.is_integer():
            return cls.absolute(int(value))
        return cls.fraction(value)

    @property
    def aliased(self) -> bool:
        return self.kind == "na"

    def base_size(self, N: int) -> int:
        if self.kind == "na":
            return N
        m = int(self.value) if self.kind == "absolute" else int(math.floor(round(self.value * N, 9)))
        if not 1 <= m <= N - 1:
            raise ValueError(f"split {self.label} gives base size m={m}, outside [1, N-1] for N={N}")
        return m

    @property
    def label(self) -> str:
        if self.kind == "na":
            return "NA"
        if self.kind == "absolute":
            return f"m={int(self.value)}"
        return f"{self.value:g}"


@dataclass
class ExperimentConfig:
    distributions: list[DistributionSpec]
    estimators: list[EstimatorSpec]
    N: int = 500
    split: Split = field(default_factory=lambda: Split.absolute(25))
    delta: float = 0.05
    epsilon: float = 0.0
    contamination_value: float = CONTAMINATION_VALUE
    trials: int = 10_000
    seed_plan: SeedPlan = field(default_factory=SeedPlan)
    threads: int = 1
    # trial indices run from first_trial to first_trial + trials - 1
    first_trial: int = 0

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.first_trial < 0:
            raise ValueError("first_trial must be >= 0")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if not self.estimators:
            raise ValueError("at least one estimator is required")
        ids = [e.id for e in self.estimators]
        if len(set(ids)) != len(ids):
            raise ValueError("estimator ids must be unique")
        self.split.base_size(self.N)

    @property
    def m(self) -> int:
        return self.split.base_size(self.N)

    @property
    def n(self) -> int:
        return self.N if self.split.aliased else self.N - self.m

    def with_(self, **changes) -> ExperimentConfig:
        return replace(self, **changes)


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    errors: dict[str, float]


@dataclass
class CellResult:
    """All trials of one distribution under one configuration.

    ``errors`` has shape (trials, estimators); NaN marks a failed evaluation.
    """

    distribution: DistributionSpec
    estimator_ids: list[str]
    errors: np.ndarray
    weight_sum_checks: int = 0
    weight_sum_violations: int = 0
    first_trial: int = 0

    def records(self) -> list[TrialRecord]:
        return [
            TrialRecord(self.first_trial + i, dict(zip(self.estimator_ids, row.tolist())))
            for i, row in enumerate(self.errors)
        ]

    def column(self, estimator_id: str) -> np.ndarray:
        return self.errors[:, self.estimator_ids.index(estimator_id)]


def draw_chunk(config: ExperimentConfig, dist_index: int, trials: range):
    """Clean and contaminated sample matrices for a contiguous range of trials."""
    dist = config.distributions[dist_index]
    N, m, eps = config.N, config.m, config.epsilon
    split = not config.split.aliased
    n = N - m
    counts = (
        contamination_count(N, eps),
        contamination_count(m, eps) if split else 0,
        contamination_count(n, eps) if split else 0,
    )
    full = np.empty((len(trials), N))
    parts = np.empty((len(trials), N)) if split else full
    for row, t in enumerate(trials):
        rng = config.seed_plan.stream(t, dist_index)
        x = sample(dist, N, rng)
        full[row] = x
        if split:
            parts[row] = x
        if counts[0]:
            full[row, rng.choice(N, size=counts[0], replace=False)] = config.contamination_value
        if counts[1]:
            parts[row, rng.choice(m, size=counts[1], replace=False)] = config.contamination_value
        if counts[2]:
            parts[row, m + rng.choice(n, size=counts[2], replace=False)] = config.contamination_value
    if split:
        return full, parts[:, :m], parts[:, m:]
    return full, full, full


def _evaluate_chunk(config: ExperimentConfig, dist_index: int, trials: range):
    dist = config.distributions[dist_index]
    mu = dist.true_mean
    full, base, main = draw_chunk(config, dist_index, trials)
    n = main.shape[1]
    out = np.full((len(trials), len(config.estimators)), np.nan)
    kappas: dict[str, np.ndarray] = {}
    checks = violations = 0
    slack = contamination_count(n, config.epsilon)
    for j, spec in enumerate(config.estimators):
        try:
            if not spec.is_shrinkage:
                values = base_rows(spec, full, config.delta, config.epsilon)
            else:
                key = spec.base.id
                if key not in kappas:
                    kappas[key] = base_rows(spec.base, base, config.delta, config.epsilon)
                eta = spec.eta_rule.resolve(config.delta, config.epsilon, n)
                r = shrink_rows(
                    spec.weight, main, kappas[key], eta, normalized=spec.kind is Kind.SHRINK_W
                )
                values = r.values
                if 0.0 < eta < n:
                    a = r.solution.alpha
                    ok = np.isfinite(a) & (a > 0)
                    s = r.solution.weight_sum[ok]
                    checks += int(ok.sum())
                    violations += int(
                        np.count_nonzero(
                            (s > n - eta + SUM_SLACK * n) | (s < n - eta - 1 - slack - SUM_SLACK * n)
                        )
                    )
        except ValueError as exc:
            log.warning("estimator %s failed on trials %s-%s: %s", spec.id, trials.start, trials.stop - 1, exc)
            continue
        out[:, j] = np.abs(values - mu)
    return out, checks, violations


def run_distribution(config: ExperimentConfig, dist_index: int) -> CellResult:
    T, t0 = config.trials, config.first_trial
    errors = np.empty((T, len(config.estimators)))
    chunks = [range(s, min(s + CHUNK_TRIALS, T)) for s in range(0, T, CHUNK_TRIALS)]

    def work(chunk: range):
        return chunk, _evaluate_chunk(config, dist_index, range(t0 + chunk.start, t0 + chunk.stop))

    checks = violations = 0
    workers = max(1, int(config.threads))
    if workers == 1 or len(chunks) == 1:
        results = map(work, chunks)
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        results = pool.map(work, chunks)
    for chunk, (block, c, v) in results:
        errors[chunk.start : chunk.stop] = block
        checks += c
        violations += v
    if workers > 1 and len(chunks) > 1:
        pool.shutdown()
    if violations:
        log.warning("%d weight-sum bound violations out of %d checks", violations, checks)
    return CellResult(
        config.distributions[dist_index],
        [e.id for e in config.estimators],
        errors,
        checks,
        violations,
        t0,
    )


def run(config: ExperimentConfig) -> list[CellResult]:
    return [run_distribution(config, j) for j in range(len(config.distributions))]


def run_trial(config: ExperimentConfig, trial_index: int, dist_index: int = 0) -> TrialRecord:
    """Errors of every estimator on one trial; identical to that trial's row in a full run."""
    if trial_index < 0:
        raise ValueError("trial index must be nonnegative")
    block, _, _ = _evaluate_chunk(config, dist_index, range(trial_index, trial_index + 1))
    return TrialRecord(trial_index, dict(zip([e.id for e in config.estimators], block[0].tolist())))


def quantile_of_errors(errors, level: float) -> tuple[np.ndarray, np.ndarray]:
    """Order statistic of rank ``ceil(level * T)`` per column, ignoring NaN.

    Accepts a (T, E) array or a list of :class:`TrialRecord`. Returns the
    quantiles and the number of missing values per column.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level!r}")
    if isinstance(errors, list):
        if not errors:
            raise ValueError("need at least one record")
        keys = list(errors[0].errors)
        errors = np.array([[r.errors[k] for k in keys] for r in errors], dtype=float)
    e = np.asarray(errors, dtype=float)
    if e.ndim == 1:
        e = e[:, None]
    if e.shape[0] == 0:
        raise ValueError("need at least one record")
    missing = np.count_nonzero(np.isnan(e), axis=0)
    q = np.full(e.shape[1], np.nan)
    for j in range(e.shape[1]):
        col = e[~np.isnan(e[:, j]), j]
        if col.size:
            r = order_rank(level, col.size) - 1
            q[j] = np.partition(col, r)[r]
    if missing.any():
        log.warning("excluded %d missing values from the error quantiles", int(missing.sum()))
    return q, missing
