"""Base location estimators and the two shrinkage estimators built on top of them.

The ``*_rows`` functions take a 2-D array and estimate each row independently;
the single-sample functions return an :class:`Estimate`.

Shrinkage estimates around a base value ``kappa`` with weights
``w_i = w(alpha_hat |X_i - kappa|)``:

* ``shrink``:  ``kappa + (1/n) sum_i (X_i - kappa) w_i``
* ``shrinkw``: ``sum_i X_i w_i / sum_i w_i``
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .scaling import RowSolution, ScalingSolution, solve_rows
from .weights import WeightFn, make_weight


class DegenerateEstimateError(ValueError):
    """The estimate is undefined for this input (e.g. every weight is zero)."""


class Kind(enum.Enum):
    MEAN = "mean"
    QUANTILE = "quantile"
    MEDIAN = "median"
    TRIMMED = "tm"
    WINSORIZED = "wm"
    MEDIAN_OF_MEANS = "mom"
    SHRINK = "shrink"
    SHRINK_W = "shrinkw"


SHRINKAGE_KINDS = (Kind.SHRINK, Kind.SHRINK_W)


@dataclass(frozen=True)
class EtaRule:
    """How the shrinkage level is chosen from ``(delta, epsilon, n)``.

    ``fixed`` uses ``value``; ``log`` is ``ln(1/delta)``; ``theory`` is
    ``ln(4/delta) + (1 + xi) * epsilon * n``.
    """

    kind: str = "log"
    value: float = 0.0
    xi: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in ("fixed", "log", "theory"):
            raise ValueError(f"unknown eta rule {self.kind!r}")
        if self.kind == "fixed" and not (math.isfinite(self.value) and self.value >= 0):
            raise ValueError(f"fixed eta must be finite and >= 0, got {self.value!r}")
        if self.kind == "theory" and not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi!r}")

    def resolve(self, delta: float, epsilon: float, n: int) -> float:
        if self.kind == "fixed":
            return float(self.value)
        _check_delta(delta)
        if self.kind == "log":
            return math.log(1.0 / delta)
        return math.log(4.0 / delta) + (1.0 + self.xi) * epsilon * n

    def __str__(self) -> str:
        if self.kind == "fixed":
            return f"{self.value:g}"
        if self.kind == "theory":
            return f"theory,xi={self.xi:g}"
        return "log"


@dataclass(frozen=True)
class EstimatorSpec:
    """A named estimator configuration.

    ``k`` (trimming) and ``K`` (buckets) may be left as ``None``; they then
    resolve at evaluation time according to ``level``: ``log`` gives
    ``ceil(ln(1/delta))``, while ``eps`` adds room for the contaminated points
    (see :func:`resolve_level`).
    """

    kind: Kind
    gamma: float | None = None
    k: int | None = None
    K: int | None = None
    base: EstimatorSpec | None = None
    weight: WeightFn | None = None
    eta_rule: EtaRule = field(default_factory=EtaRule)
    level: str = "log"

    def __post_init__(self) -> None:
        if self.level not in ("log", "eps"):
            raise ValueError(f"unknown level rule {self.level!r}; expected log or eps")
        if self.kind is Kind.QUANTILE:
            if self.gamma is None or not 0.0 < self.gamma < 1.0:
                raise ValueError(f"quantile level must lie in (0, 1), got {self.gamma!r}")
        if self.kind in SHRINKAGE_KINDS:
            if self.base is None or self.weight is None:
                raise ValueError("shrinkage estimators need a base estimator and a weight function")
            if self.base.is_shrinkage:
                raise ValueError("the base of a shrinkage estimator cannot itself be a shrinkage estimator")

    @property
    def is_shrinkage(self) -> bool:
        return self.kind in SHRINKAGE_KINDS

    @property
    def id(self) -> str:
        if self.kind is Kind.QUANTILE:
            return f"quantile:gamma={self.gamma:g}"
        if self.kind in (Kind.TRIMMED, Kind.WINSORIZED):
            if self.k is None:
                return self.kind.value if self.level == "log" else f"{self.kind.value}:k=eps"
            return f"{self.kind.value}:k={self.k}"
        if self.kind is Kind.MEDIAN_OF_MEANS:
            if self.K is None:
                return "mom" if self.level == "log" else "mom:K=eps"
            return f"mom:K={self.K}"
        if self.is_shrinkage:
            base = self.base.id.replace(":", ",")
            w = self.weight
            parts = [f"base={base}", f"w={w.name}"]
            if w.name in ("lee-valiant", "rational", "exp"):
                parts.append(f"p={w.p:g}")
            parts.append(f"eta={self.eta_rule}")
            return f"{self.kind.value}:" + ",".join(parts)
        return self.kind.value

    def __str__(self) -> str:
        return self.id


@dataclass(frozen=True)
class Estimate:
    value: float
    diagnostics: ScalingSolution | None = None
    kappa: float | None = None
    eta: float | None = None
    # False when the base estimate was computed on the same points it shrinks
    independent_base: bool = True


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")


def default_level(delta: float) -> int:
    """``ceil(ln(1/delta))``: trimming level and bucket count used by default."""
    _check_delta(delta)
    return math.ceil(math.log(1.0 / delta))


def resolve_level(spec: EstimatorSpec, delta: float, epsilon: float, n: int) -> int:
    """Trimming level or bucket count of ``spec`` on a sample of size ``n``.

    The ``eps`` rule adds the number of contaminated points ``floor(eps n)``
    to the trimming level, and twice that number to the bucket count, so a
    majority of buckets stays clean; the bucket count is capped at ``n``.
    """
    fixed = spec.K if spec.kind is Kind.MEDIAN_OF_MEANS else spec.k
    if fixed is not None:
        return fixed
    base = default_level(delta)
    if spec.level == "log":
        return base
    bad = int(math.floor(round(epsilon * n, 9)))
    if spec.kind is Kind.MEDIAN_OF_MEANS:
        return min(base + 2 * bad, n)
    return base + bad


def _rows(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] == 0:
        raise ValueError("empty sample")
    return a


def order_rank(level: float, n: int) -> int:
    """1-indexed rank ``ceil(level * n)``, clamped to ``[1, n]``."""
    # rounding guards products such as 0.95 * 100 against representation error
    return min(max(math.ceil(round(level * n, 9)), 1), n)


# -- row-wise base estimators ----------------------------------------------

def mean_rows(x) -> np.ndarray:
    return _rows(x).mean(axis=1)


def quantile_rows(x, gamma: float) -> np.ndarray:
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {gamma!r}")
    a = _rows(x)
    r = order_rank(gamma, a.shape[1]) - 1
    return np.partition(a, r, axis=1)[:, r]


def median_rows(x) -> np.ndarray:
    return quantile_rows(x, 0.5)


def _check_trim(k: int, n: int) -> None:
    if k < 0 or 2 * k >= n:
        raise ValueError(f"trimming level k={k} needs 0 <= 2k < n={n}")


def trimmed_rows(x, k: int) -> np.ndarray:
    a = _rows(x)
    n = a.shape[1]
    _check_trim(k, n)
    if k == 0:
        return a.mean(axis=1)
    return np.sort(a, axis=1)[:, k : n - k].mean(axis=1)


def winsorized_rows(x, k: int) -> np.ndarray:
    a = _rows(x)
    n = a.shape[1]
    _check_trim(k, n)
    if k == 0:
        return a.mean(axis=1)
    s = np.sort(a, axis=1)
    return np.clip(s, s[:, k : k + 1], s[:, n - k - 1 : n - k]).mean(axis=1)


def bucket_bounds(n: int, K: int) -> np.ndarray:
    """Start offsets of ``K`` contiguous buckets; the ``n mod K`` larger ones come first."""
    if not 1 <= K <= n:
        raise ValueError(f"number of buckets K={K} must lie in [1, n={n}]")
    q, r = divmod(n, K)
    sizes = np.full(K, q)
    sizes[:r] += 1
    return np.concatenate([[0], np.cumsum(sizes)[:-1]])


def mom_rows(x, K: int) -> np.ndarray:
    a = _rows(x)
    n = a.shape[1]
    if K == 1:
        return a.mean(axis=1)
    starts = bucket_bounds(n, K)
    sizes = np.diff(np.append(starts, n))
    means = np.add.reduceat(a, starts, axis=1) / sizes
    return median_rows(means)


# -- single-sample base estimators ------------------------------------------

def _sample(sample) -> np.ndarray:
    x = np.asarray(sample, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("sample must be a non-empty 1-D array")
    return x


def empirical_mean(sample) -> Estimate:
    return Estimate(float(mean_rows(_sample(sample))[0]))


def empirical_quantile(sample, gamma: float) -> Estimate:
    """Order statistic ``X_(ceil(gamma n))``; no interpolation."""
    return Estimate(float(quantile_rows(_sample(sample), gamma)[0]))


def median(sample) -> Estimate:
    return empirical_quantile(sample, 0.5)


def trimmed_mean(sample, k: int) -> Estimate:
    return Estimate(float(trimmed_rows(_sample(sample), k)[0]))


def winsorized_mean(sample, k: int) -> Estimate:
    return Estimate(float(winsorized_rows(_sample(sample), k)[0]))


def median_of_means(sample, K: int) -> Estimate:
    return Estimate(float(mom_rows(_sample(sample), K)[0]))


# -- shrinkage ---------------------------------------------------------------

@dataclass
class RowEstimate:
    """Batch output; ``values`` is NaN where the estimate is degenerate."""

    values: np.ndarray
    kappa: np.ndarray | None = None
    eta: float | None = None
    solution: RowSolution | None = None


def shrink_rows(
    w: WeightFn, x, kappa, eta: float, normalized: bool = False
) -> RowEstimate:
    a = _rows(x)
    if not np.all(np.isfinite(a)):
        raise ValueError("sample contains non-finite values")
    kap = np.broadcast_to(np.asarray(kappa, dtype=float), (a.shape[0],)).copy()
    if not np.all(np.isfinite(kap)):
        raise ValueError("kappa must be finite")
    dev = a - kap[:, None]
    sol = solve_rows(w, np.abs(dev), eta)
    if float(eta) == 0.0:
        values = a.mean(axis=1)
    elif normalized:
        s = sol.weights.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            values = np.where(s > 0.0, (a * sol.weights).sum(axis=1) / s, np.nan)
    else:
        values = kap + (dev * sol.weights).sum(axis=1) / a.shape[1]
    return RowEstimate(values, kap, float(eta), sol)


def shrink_mean(w: WeightFn, sample, kappa: float, eta: float) -> Estimate:
    """``kappa + (1/n) sum_i (X_i - kappa) w_i``; ``eta = 0`` is exactly the mean."""
    r = shrink_rows(w, _sample(sample), kappa, eta)
    return Estimate(float(r.values[0]), r.solution.row(0), float(kappa), float(eta))


def shrink_mean_weighted(w: WeightFn, sample, kappa: float, eta: float) -> Estimate:
    """Normalized weighted average ``sum_i X_i w_i / sum_i w_i``."""
    r = shrink_rows(w, _sample(sample), kappa, eta, normalized=True)
    sol = r.solution.row(0)
    if not sol.weight_sum > 0.0:
        raise DegenerateEstimateError("all shrinkage weights are zero; the weighted mean is undefined")
    return Estimate(float(r.values[0]), sol, float(kappa), float(eta))


# -- spec evaluation ---------------------------------------------------------

def base_rows(spec: EstimatorSpec, x, delta: float = 0.05, epsilon: float = 0.0) -> np.ndarray:
    """Row-wise values of a non-shrinkage spec."""
    kind = spec.kind
    if kind is Kind.MEAN:
        return mean_rows(x)
    if kind is Kind.MEDIAN:
        return median_rows(x)
    if kind is Kind.QUANTILE:
        return quantile_rows(x, spec.gamma)
    a = _rows(x)
    level = resolve_level(spec, delta, epsilon, a.shape[1])
    if kind is Kind.TRIMMED:
        return trimmed_rows(a, level)
    if kind is Kind.WINSORIZED:
        return winsorized_rows(a, level)
    if kind is Kind.MEDIAN_OF_MEANS:
        return mom_rows(a, level)
    raise ValueError(f"{spec.id} is not a base estimator")


def evaluate_rows(
    spec: EstimatorSpec,
    main,
    base=None,
    delta: float = 0.05,
    epsilon: float = 0.0,
    kappa: np.ndarray | None = None,
) -> RowEstimate:
    """Evaluate ``spec`` on every row; shrinkage uses ``base`` rows for the base estimate.

    A precomputed ``kappa`` skips the base evaluation (the harness shares it
    across weight functions). Without ``base`` the base estimate is computed on
    ``main`` itself.
    """
    x = _rows(main)
    if not spec.is_shrinkage:
        return RowEstimate(base_rows(spec, x, delta, epsilon))
    if kappa is None:
        kappa = base_rows(spec.base, x if base is None else _rows(base), delta, epsilon)
    eta = spec.eta_rule.resolve(delta, epsilon, x.shape[1])
    return shrink_rows(spec.weight, x, kappa, eta, normalized=spec.kind is Kind.SHRINK_W)


def evaluate(
    spec: EstimatorSpec,
    main_sample,
    base_sample=None,
    delta: float = 0.05,
    epsilon: float = 0.0,
) -> Estimate:
    """Evaluate one configuration on one sample.

    Shrinkage specs compute the base estimate on ``base_sample``; passing
    ``None`` (or the main sample itself) uses the same points for both steps,
    which is reported through ``Estimate.independent_base``.
    """
    x = _sample(main_sample)
    if not spec.is_shrinkage:
        return Estimate(float(base_rows(spec, x, delta, epsilon)[0]))
    y = x if base_sample is None else _sample(base_sample)
    aliased = y is x or np.shares_memory(x, y)
    kappa = float(base_rows(spec.base, y, delta, epsilon)[0])
    eta = spec.eta_rule.resolve(delta, epsilon, x.size)
    est = (shrink_mean_weighted if spec.kind is Kind.SHRINK_W else shrink_mean)(
        spec.weight, x, kappa, eta
    )
    return replace(est, independent_base=not aliased)


# -- parsing -----------------------------------------------------------------

_BASE_KINDS = {k.value: k for k in Kind if k not in SHRINKAGE_KINDS}


def _parse_params(text: str) -> dict[str, str]:
    params: dict[str, str] = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ValueError(f"expected key=value, got {item!r}")
        params[key.strip()] = value.strip()
    return params


def _level_param(value: str | None) -> tuple[int | None, str]:
    if value in (None, "auto", "log"):
        return None, "log"
    if value == "eps":
        return None, "eps"
    return int(value), "log"


def _make_base(kind: Kind, params: dict[str, str]) -> EstimatorSpec:
    if kind is Kind.QUANTILE:
        return EstimatorSpec(kind, gamma=float(params.get("gamma", "nan")))
    if kind in (Kind.TRIMMED, Kind.WINSORIZED):
        k, level = _level_param(params.get("k"))
        return EstimatorSpec(kind, k=k, level=level)
    if kind is Kind.MEDIAN_OF_MEANS:
        K, level = _level_param(params.get("K"))
        return EstimatorSpec(kind, K=K, level=level)
    return EstimatorSpec(kind)


def parse_eta(value: str, xi: float = 0.5) -> EtaRule:
    value = value.strip().lower()
    if value in ("log", "loginvdelta"):
        return EtaRule("log")
    if value == "theory":
        return EtaRule("theory", xi=xi)
    try:
        return EtaRule("fixed", value=float(value))
    except ValueError:
        raise ValueError(f"eta must be 'log', 'theory' or a number, got {value!r}") from None


def parse_estimator(text: str) -> EstimatorSpec:
    """Parse a CLI estimator string.

    Examples: ``mean``, ``median``, ``quantile:gamma=0.25``, ``tm:k=3``,
    ``tm:k=eps``, ``mom:K=3``, ``shrink:base=median,w=rational,p=2,eta=log``,
    ``shrinkw:base=tm,k=3,w=indicator,eta=theory,xi=0.5``.
    """
    head, _, rest = text.strip().partition(":")
    head = head.strip().lower()
    params = _parse_params(rest)
    if head in _BASE_KINDS:
        return _make_base(_BASE_KINDS[head], params)
    if head not in (Kind.SHRINK.value, Kind.SHRINK_W.value):
        raise ValueError(f"unknown estimator {head!r}")
    base_name = params.pop("base", "median").lower()
    if base_name not in _BASE_KINDS:
        raise ValueError(f"unknown base estimator {base_name!r}")
    base = _make_base(_BASE_KINDS[base_name], params)
    weight = make_weight(params.get("w", "rational"), float(params.get("p", 2.0)))
    eta = parse_eta(params.get("eta", "log"), float(params.get("xi", 0.5)))
    return EstimatorSpec(Kind(head), base=base, weight=weight, eta_rule=eta)


def shrink_spec(
    base: EstimatorSpec | str,
    weight: WeightFn | str,
    eta_rule: EtaRule | None = None,
    normalized: bool = False,
) -> EstimatorSpec:
    if isinstance(base, str):
        base = parse_estimator(base)
    if isinstance(weight, str):
        weight = make_weight(weight)
    return EstimatorSpec(
        Kind.SHRINK_W if normalized else Kind.SHRINK,
        base=base,
        weight=weight,
        eta_rule=eta_rule or EtaRule(),
    )
