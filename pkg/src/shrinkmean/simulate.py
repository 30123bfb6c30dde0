"""Benchmark distributions, the point-mass contamination operator and seeding.

Randomness is drawn from per-trial Philox generators (counter-based) keyed by
``SeedSequence([master_seed, experiment_id, trial_index, ...])``. A trial's
draws therefore depend only on those integers, never on scheduling.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

CONTAMINATION_VALUE = 1e6


class Family(enum.Enum):
    NORMAL = "normal"
    SKEW_NORMAL = "skewnormal"
    STUDENT_T = "t"
    SKEW_T = "skewt"


_SHORT = {
    Family.NORMAL: "N",
    Family.SKEW_NORMAL: "SN",
    Family.STUDENT_T: "T",
    Family.SKEW_T: "ST",
}


@dataclass(frozen=True)
class DistributionSpec:
    """One benchmark distribution in its natural (unstandardized) parameterization.

    ``a`` is the skewness shape of the skewed families and ``nu`` the degrees
    of freedom of the t families; either is ignored where it does not apply.
    """

    family: Family
    a: float = 5.0
    nu: float = 2.01

    def __post_init__(self) -> None:
        if not isinstance(self.family, Family):
            object.__setattr__(self, "family", Family(self.family))
        if self.family in (Family.STUDENT_T, Family.SKEW_T) and not self.nu > 1.0:
            raise ValueError(f"the mean exists only for nu > 1, got nu={self.nu!r}")
        if self.family in (Family.NORMAL, Family.STUDENT_T):
            object.__setattr__(self, "a", 0.0)
        if self.family in (Family.NORMAL, Family.SKEW_NORMAL):
            object.__setattr__(self, "nu", math.inf)

    @property
    def short(self) -> str:
        return _SHORT[self.family]

    @property
    def id(self) -> str:
        f = self.family
        if f is Family.SKEW_NORMAL:
            return f"skewnormal:a={self.a:g}"
        if f is Family.STUDENT_T:
            return f"t:nu={self.nu:g}"
        if f is Family.SKEW_T:
            return f"skewt:nu={self.nu:g},a={self.a:g}"
        return "normal"

    @property
    def skew_delta(self) -> float:
        return self.a / math.sqrt(1.0 + self.a * self.a)

    @property
    def true_mean(self) -> float:
        return true_mean(self)

    @property
    def std(self) -> float | None:
        """Population standard deviation, ``None`` where the variance is infinite."""
        f = self.family
        if f is Family.NORMAL:
            return 1.0
        if f is Family.SKEW_NORMAL:
            return math.sqrt(1.0 - 2.0 * self.skew_delta**2 / math.pi)
        if self.nu <= 2.0:
            return None
        var = self.nu / (self.nu - 2.0)
        return math.sqrt(var - true_mean(self) ** 2)

    def __str__(self) -> str:
        return self.id


def t_scale_mean(nu: float) -> float:
    """``E sqrt(nu / chi2_nu)``."""
    return math.sqrt(nu / 2.0) * math.exp(special.gammaln((nu - 1.0) / 2.0) - special.gammaln(nu / 2.0))


def true_mean(dist: DistributionSpec) -> float:
    f = dist.family
    if f in (Family.NORMAL, Family.STUDENT_T):
        return 0.0
    sn_mean = math.sqrt(2.0 / math.pi) * dist.skew_delta
    if f is Family.SKEW_NORMAL:
        return sn_mean
    return sn_mean * t_scale_mean(dist.nu)


def sample(dist: DistributionSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. draws from ``dist``."""
    if n < 1:
        raise ValueError(f"sample size must be positive, got {n}")
    f = dist.family
    if f is Family.NORMAL:
        return rng.standard_normal(n)
    if f is Family.STUDENT_T:
        return rng.standard_t(dist.nu, n)
    z = rng.standard_normal((2, n))
    dl = dist.skew_delta
    x = dl * np.abs(z[0]) + math.sqrt(1.0 - dl * dl) * z[1]
    if f is Family.SKEW_NORMAL:
        return x
    chi2 = rng.chisquare(dist.nu, n)
    return x * np.sqrt(dist.nu / chi2)


def contaminate(
    x: np.ndarray,
    epsilon: float,
    value: float = CONTAMINATION_VALUE,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Copy of ``x`` with ``floor(epsilon * n)`` uniformly chosen entries set to ``value``."""
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"contamination level must lie in [0, 1), got {epsilon!r}")
    if not math.isfinite(value):
        raise ValueError("contamination value must be finite")
    out = np.array(x, dtype=float, copy=True)
    count = contamination_count(out.size, epsilon)
    if count:
        if rng is None:
            raise ValueError("a random generator is required to choose contaminated positions")
        out[rng.choice(out.size, size=count, replace=False)] = value
    return out


def contamination_count(n: int, epsilon: float) -> int:
    # rounding keeps e.g. 0.05 * 500 from landing just below 25
    return int(math.floor(round(epsilon * n, 9)))


@dataclass(frozen=True)
class SeedPlan:
    master_seed: int = 0
    experiment_id: int = 0

    def stream(self, trial_index: int, *extra: int) -> np.random.Generator:
        """Generator of one trial; ``extra`` words (e.g. a distribution index) extend the key."""
        key = [self.master_seed, self.experiment_id, trial_index, *extra]
        if any(int(k) < 0 for k in key):
            raise ValueError("seed words must be nonnegative integers")
        seq = np.random.SeedSequence([int(k) for k in key])
        return np.random.Generator(np.random.Philox(seq))

    def child(self, experiment_id: int) -> SeedPlan:
        return SeedPlan(self.master_seed, experiment_id)


def _parse_params(text: str) -> dict[str, float]:
    params = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {item!r}")
        params[key.strip()] = float(value)
    return params


_ALIASES = {
    "normal": Family.NORMAL,
    "n": Family.NORMAL,
    "skewnormal": Family.SKEW_NORMAL,
    "sn": Family.SKEW_NORMAL,
    "t": Family.STUDENT_T,
    "skewt": Family.SKEW_T,
    "st": Family.SKEW_T,
}


def parse_distribution(text: str) -> DistributionSpec:
    """``normal``, ``skewnormal:a=5``, ``t:nu=2.01`` or ``skewt:nu=2.01,a=5``."""
    head, _, rest = text.strip().partition(":")
    family = _ALIASES.get(head.strip().lower())
    if family is None:
        raise ValueError(f"unknown distribution {head!r}")
    params = _parse_params(rest)
    unknown = set(params) - {"a", "nu"}
    if unknown:
        raise ValueError(f"unknown distribution parameters {sorted(unknown)}")
    return DistributionSpec(family, **params)


def benchmark_distributions(a: float = 5.0, nu: float = 2.01) -> list[DistributionSpec]:
    """N, SN, T and ST with the default shape parameters."""
    return [
        DistributionSpec(Family.NORMAL),
        DistributionSpec(Family.SKEW_NORMAL, a=a),
        DistributionSpec(Family.STUDENT_T, nu=nu),
        DistributionSpec(Family.SKEW_T, a=a, nu=nu),
    ]
