"""Catalog of shrinkage weight functions ``w: [0, inf) -> [0, 1]``.

Every entry is non-increasing, right-continuous and satisfies ``w(0) = 1``.
Alongside the function itself each entry carries its analytic metadata:
``c_w = sup_t t*w(t)``, the largest exponent ``q`` with ``w(t) >= (1 - t**q)_+``,
and the solver used to compute the scaling factor.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize


class WeightId(enum.Enum):
    INDICATOR = "indicator"
    WINSORIZE = "winsorize"
    LEE_VALIANT = "lee-valiant"
    RATIONAL_POWER = "rational"
    EXP_POWER = "exp"
    LOG_SQUARED = "log2"
    CIRCLE_ARC = "circle"
    LOG_LINEAR = "log1"
    INVERSE_SQRT = "invsqrt"


class Solver(enum.Enum):
    CLOSED_FORM_ORDER_STAT = "closed-form-order-stat"
    CLOSED_FORM_PIECEWISE_LINEAR = "closed-form-piecewise-linear"
    BISECTION = "bisection"


PARAMETERIZED = frozenset(
    {WeightId.LEE_VALIANT, WeightId.RATIONAL_POWER, WeightId.EXP_POWER}
)
# w(t) = 0 for every t >= 1
COMPACT = frozenset({WeightId.INDICATOR, WeightId.LEE_VALIANT, WeightId.CIRCLE_ARC})

_LABELS = {
    WeightId.INDICATOR: "1{t<1}",
    WeightId.WINSORIZE: "min(1,1/t)",
    WeightId.LEE_VALIANT: "(1-t^{p})_+",
    WeightId.RATIONAL_POWER: "1/(1+t^{p})",
    WeightId.EXP_POWER: "exp(-t^{p})",
    WeightId.LOG_SQUARED: "1/ln(e+t^2)",
    WeightId.CIRCLE_ARC: "1-sqrt(1-(1-t)_+^2)",
    WeightId.LOG_LINEAR: "1/ln(e+t)",
    WeightId.INVERSE_SQRT: "1/(1+sqrt(t))",
}


def _power_inplace(t: np.ndarray, p: float) -> None:
    if p == 2.0:
        np.multiply(t, t, out=t)
    else:
        np.power(t, p, out=t)


def _apply_inplace(wid: WeightId, p: float, t: np.ndarray) -> np.ndarray:
    """Overwrite the float array ``t`` with ``w(t)`` and return it."""
    if wid is WeightId.INDICATOR:
        np.less(t, 1.0, out=t, casting="unsafe")
    elif wid is WeightId.WINSORIZE:
        np.maximum(t, 1.0, out=t)
        np.reciprocal(t, out=t)
    elif wid is WeightId.LEE_VALIANT:
        _power_inplace(t, p)
        np.subtract(1.0, t, out=t)
        np.maximum(t, 0.0, out=t)
    elif wid is WeightId.RATIONAL_POWER:
        _power_inplace(t, p)
        t += 1.0
        np.reciprocal(t, out=t)
    elif wid is WeightId.EXP_POWER:
        _power_inplace(t, p)
        np.negative(t, out=t)
        np.exp(t, out=t)
    elif wid is WeightId.LOG_SQUARED:
        np.multiply(t, t, out=t)
        t += math.e
        np.log(t, out=t)
        np.reciprocal(t, out=t)
    elif wid is WeightId.CIRCLE_ARC:
        np.subtract(1.0, t, out=t)
        np.maximum(t, 0.0, out=t)
        np.multiply(t, t, out=t)
        np.subtract(1.0, t, out=t)
        np.sqrt(t, out=t)
        np.subtract(1.0, t, out=t)
    elif wid is WeightId.LOG_LINEAR:
        t += math.e
        np.log(t, out=t)
        np.reciprocal(t, out=t)
    elif wid is WeightId.INVERSE_SQRT:
        np.sqrt(t, out=t)
        t += 1.0
        np.reciprocal(t, out=t)
    else:  # pragma: no cover
        raise ValueError(f"unknown weight function {wid!r}")
    return t


def _power_exponent(wid: WeightId, p: float) -> float:
    """Exponent ``q`` such that ``w(t) = g(t**q)`` with a cheap ``g``."""
    if wid in PARAMETERIZED:
        return p
    if wid is WeightId.LOG_SQUARED:
        return 2.0
    if wid is WeightId.INVERSE_SQRT:
        return 0.5
    return 1.0


def _apply_outer_inplace(wid: WeightId, u: np.ndarray) -> np.ndarray:
    """Overwrite ``u = t**q`` with ``w(t)``; see :func:`_power_exponent`."""
    if wid is WeightId.LEE_VALIANT:
        np.subtract(1.0, u, out=u)
        np.maximum(u, 0.0, out=u)
    elif wid in (WeightId.RATIONAL_POWER, WeightId.INVERSE_SQRT):
        u += 1.0
        np.reciprocal(u, out=u)
    elif wid is WeightId.EXP_POWER:
        np.negative(u, out=u)
        np.exp(u, out=u)
    elif wid is WeightId.LOG_SQUARED:
        u += math.e
        np.log(u, out=u)
        np.reciprocal(u, out=u)
    else:
        _apply_inplace(wid, 2.0, u)
    return u


def _score_rows(wid: WeightId, scale: np.ndarray, u: np.ndarray, out: np.ndarray) -> np.ndarray:
    """Row sums of ``w(t)`` where ``t**q = scale[:, None] * u``; ``out`` is scratch space.

    The scale is folded into the kernel, which saves a pass over the data.
    """
    s = scale[:, None]
    finite = 1e-250 < scale.min() and scale.max() < 1e250
    if wid is WeightId.EXP_POWER and finite:
        np.multiply(-s, u, out=out)
        return np.exp(out, out=out).sum(axis=1)
    if finite:
        inv = 1.0 / s
        if wid in (WeightId.RATIONAL_POWER, WeightId.INVERSE_SQRT):
            # 1 / (1 + s u) = (1/s) / (1/s + u)
            np.add(inv, u, out=out)
            return np.reciprocal(out, out=out).sum(axis=1) * inv[:, 0]
        if wid is WeightId.LEE_VALIANT:
            # (1 - s u)_+ = s (1/s - u)_+
            np.subtract(inv, u, out=out)
            return np.maximum(out, 0.0, out=out).sum(axis=1) * scale
    with np.errstate(invalid="ignore"):
        np.multiply(s, u, out=out)
    # an overflowed scale times a zero distance is still t = 0
    np.nan_to_num(out, copy=False, nan=0.0, posinf=np.inf)
    return _apply_outer_inplace(wid, out).sum(axis=1)


def _maximize_tw(wid: WeightId, p: float) -> float:
    """sup_t t*w(t) by golden-section search on a bracket found by a coarse scan."""

    def tw(t: float) -> float:
        return t * float(_apply_inplace(wid, p, np.array([t], dtype=float))[0])

    upper = 1.0
    if wid not in COMPACT:
        while tw(2.0 * upper) > tw(upper) and upper < 2.0**60:
            upper *= 2.0
        upper *= 2.0
    grid = np.linspace(0.0, upper, 2001)
    values = grid * _apply_inplace(wid, p, grid.copy())
    i = int(np.clip(np.argmax(values), 1, len(grid) - 2))
    t_star = optimize.golden(
        lambda t: -tw(t), brack=(grid[i - 1], grid[i], grid[i + 1]), tol=1e-12
    )
    return max(tw(float(t_star)), float(values.max()))


@functools.cache
def _c_w(wid: WeightId, p: float) -> float:
    if wid in (WeightId.INDICATOR, WeightId.WINSORIZE):
        return 1.0
    if wid is WeightId.LEE_VALIANT:
        return p * (p + 1.0) ** (-(p + 1.0) / p)
    if wid in (WeightId.LOG_SQUARED, WeightId.LOG_LINEAR, WeightId.INVERSE_SQRT):
        return math.inf
    return _maximize_tw(wid, p)


def _a3_upto(wid: WeightId, p: float) -> float:
    if wid in (WeightId.INDICATOR, WeightId.WINSORIZE):
        return math.inf
    if wid in PARAMETERIZED:
        return p
    return {
        WeightId.LOG_SQUARED: 2.0,
        WeightId.LOG_LINEAR: 1.0,
        WeightId.INVERSE_SQRT: 0.5,
        WeightId.CIRCLE_ARC: 0.0,
    }[wid]


@dataclass(frozen=True)
class WeightFn:
    """A catalog weight function together with its analytic metadata.

    ``p`` only affects the parameterized entries (Lee-Valiant, rational and
    exponential power); other entries normalize it to 2.
    """

    id: WeightId
    p: float = 2.0
    c_w: float = field(init=False, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.id, WeightId):
            object.__setattr__(self, "id", WeightId(self.id))
        p = float(self.p) if self.id in PARAMETERIZED else 2.0
        if not p > 1.0 or not math.isfinite(p):
            raise ValueError(f"exponent p must be a finite real > 1, got {self.p!r}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "c_w", _c_w(self.id, p))

    @property
    def name(self) -> str:
        return self.id.value

    @property
    def label(self) -> str:
        return _LABELS[self.id].replace("{p}", f"{self.p:g}")

    @property
    def satisfies_a2(self) -> bool:
        return math.isfinite(self.c_w)

    @property
    def satisfies_a3_upto(self) -> float:
        return _a3_upto(self.id, self.p)

    @property
    def satisfies_a3(self) -> bool:
        # the decay condition is only meaningful for exponents q > 1
        return self.satisfies_a3_upto > 1.0

    @property
    def compact_support(self) -> bool:
        return self.id in COMPACT

    @property
    def solver(self) -> Solver:
        if self.id is WeightId.INDICATOR:
            return Solver.CLOSED_FORM_ORDER_STAT
        if self.id is WeightId.WINSORIZE:
            return Solver.CLOSED_FORM_PIECEWISE_LINEAR
        return Solver.BISECTION

    def apply_inplace(self, t: np.ndarray) -> np.ndarray:
        """Overwrite a float64 array of nonnegative arguments with ``w(t)``."""
        return _apply_inplace(self.id, self.p, t)

    @property
    def power_exponent(self) -> float:
        """``q`` with ``w(t) = g(t**q)``; lets solvers raise distances to ``q`` only once."""
        return _power_exponent(self.id, self.p)

    def apply_outer_inplace(self, u: np.ndarray) -> np.ndarray:
        """Overwrite ``u = t**q`` with ``w(t)``."""
        return _apply_outer_inplace(self.id, u)

    def score_rows(self, scale: np.ndarray, u: np.ndarray, out: np.ndarray) -> np.ndarray:
        """Row sums of ``w`` at ``t**q = scale * u`` (per-row ``scale``), using ``out`` as scratch."""
        return _score_rows(self.id, scale, u, out)

    def __call__(self, t):
        """Vectorized evaluation; no domain checks."""
        arr = np.array(t, dtype=float, copy=True)
        out = _apply_inplace(self.id, self.p, np.atleast_1d(arr))
        return out.reshape(np.shape(t)) if np.ndim(t) else float(out[0])

    def __str__(self) -> str:
        if self.id in PARAMETERIZED:
            return f"{self.name}(p={self.p:g})"
        return self.name


def make_weight(name: str | WeightId, p: float = 2.0) -> WeightFn:
    """Build a catalog entry from its CLI id (``rational``, ``exp``, ...)."""
    try:
        wid = name if isinstance(name, WeightId) else WeightId(name.strip().lower())
    except ValueError:
        known = ", ".join(w.value for w in WeightId)
        raise ValueError(f"unknown weight function {name!r}; expected one of {known}") from None
    return WeightFn(wid, p)


def catalog(p: float = 2.0) -> list[WeightFn]:
    """All nine catalog entries, in declaration order."""
    return [WeightFn(wid, p) for wid in WeightId]


def eval(w: WeightFn, t: float) -> float:  # noqa: A001 - mirrors the documented operation name
    """Evaluate ``w`` at a single nonnegative finite point."""
    t = float(t)
    if not math.isfinite(t) or t < 0.0:
        raise ValueError(f"weight functions are defined on [0, inf); got t={t!r}")
    return w(t)


def c_w(w: WeightFn) -> float:
    return w.c_w


def m_alpha(w: WeightFn, alpha: float) -> float:
    """Largest contribution ``sup_x |x| w(alpha |x|) = c_w / alpha`` of one point."""
    if not alpha > 0.0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    return w.c_w / alpha
