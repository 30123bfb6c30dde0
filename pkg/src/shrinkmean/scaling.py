"""Data-dependent scaling factor ``alpha_hat = inf{a > 0 : sum_i w(a d_i) <= n - eta}``.

Here ``d_i = |X_i - kappa|``. The solvers work on a 2-D array of distances,
one instance per row, so the Monte Carlo harness can solve thousands of trials
at once; rows never interact, so a row's result does not depend on the batch
it was solved in. The single-sample functions are thin wrappers.

Limit conventions:

* ``eta == 0`` gives ``alpha_hat = 0`` and unit weights (empirical mean).
* If no finite ``alpha`` brings the weight sum down to ``n - eta`` (too many
  zero distances, or ``eta == n`` with a strictly positive ``w``), then
  ``alpha_hat = inf`` and only zero-distance points keep weight 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .weights import Solver, WeightFn, WeightId

BISECTION_TOL = 1e-12
MAX_BISECTION_ITER = 200
MAX_BRACKET_STEPS = 1024
# rows per bisection block; small blocks keep the working set in cache
BLOCK_ROWS = 96


@dataclass(frozen=True)
class ScalingSolution:
    alpha_hat: float
    weights: np.ndarray
    weight_sum: float
    solver_used: Solver
    iterations: int = 0


@dataclass
class RowSolution:
    """Per-row solutions of a batch: ``alpha`` and ``iterations`` have shape (T,)."""

    alpha: np.ndarray
    weights: np.ndarray
    iterations: np.ndarray
    solver: Solver

    @property
    def weight_sum(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def row(self, i: int) -> ScalingSolution:
        weights = self.weights[i].copy()
        return ScalingSolution(
            alpha_hat=float(self.alpha[i]),
            weights=weights,
            weight_sum=float(weights.sum()),
            solver_used=self.solver,
            iterations=int(self.iterations[i]),
        )


def _check_eta(eta: float, n: int) -> float:
    eta = float(eta)
    if not math.isfinite(eta) or eta < 0.0 or eta > n:
        raise ValueError(f"shrinkage level eta must lie in [0, n={n}], got {eta!r}")
    return eta


def distances(sample, kappa) -> np.ndarray:
    """``|X - kappa|`` as a 2-D float array; ``kappa`` is a scalar or one value per row."""
    x = np.asarray(sample, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] == 0:
        raise ValueError("sample must be a non-empty 1-D array (or a 2-D batch of rows)")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    k = np.asarray(kappa, dtype=float).reshape(-1, 1)
    if not np.all(np.isfinite(k)):
        raise ValueError("kappa must be finite")
    return np.abs(x - k)


def score(w: WeightFn, alpha, d: np.ndarray) -> np.ndarray:
    """Row sums ``S(alpha) = sum_i w(alpha d_i)`` for per-row ``alpha``."""
    buf = np.multiply(np.asarray(alpha, dtype=float).reshape(-1, 1), d)
    return w.apply_inplace(buf).sum(axis=1)


def _infinite_rows(w: WeightFn, d: np.ndarray, target: float) -> np.ndarray:
    zeros = np.count_nonzero(d == 0.0, axis=1)
    if w.compact_support:
        return zeros > target
    return zeros >= target


def _infinite_weights(d: np.ndarray) -> np.ndarray:
    return (d == 0.0).astype(float)


def solve_rows(
    w: WeightFn,
    d: np.ndarray,
    eta: float,
    solver: Solver | None = None,
    tol: float = BISECTION_TOL,
) -> RowSolution:
    """Solve every row of the distance matrix ``d`` (shape (T, n)) for one ``eta``.

    ``solver`` forces a particular method; by default the closed form attached
    to ``w`` is used when there is one.
    """
    d = np.asarray(d, dtype=float)
    T, n = d.shape
    eta = _check_eta(eta, n)
    if solver is None:
        solver = w.solver
    if solver is Solver.CLOSED_FORM_ORDER_STAT and w.id is not WeightId.INDICATOR:
        raise ValueError("the order-statistic closed form only applies to the indicator weight")
    if solver is Solver.CLOSED_FORM_PIECEWISE_LINEAR and w.id is not WeightId.WINSORIZE:
        raise ValueError("the piecewise-linear closed form only applies to the winsorizing weight")

    iterations = np.zeros(T, dtype=np.int64)
    if eta == 0.0:
        return RowSolution(np.zeros(T), np.ones((T, n)), iterations, solver)

    target = n - eta
    if target >= n:
        # eta below the spacing of floats near n: the target is still strictly below n
        target = math.nextafter(float(n), 0.0)
    alpha = np.empty(T)
    weights = np.empty((T, n))
    inf_rows = _infinite_rows(w, d, target)
    if inf_rows.any():
        alpha[inf_rows] = math.inf
        weights[inf_rows] = _infinite_weights(d[inf_rows])
        rows = np.flatnonzero(~inf_rows)
        sub = d[rows]
    else:
        rows, sub = slice(None), d
    if sub.shape[0]:
        if solver is Solver.CLOSED_FORM_ORDER_STAT:
            alpha[rows], weights[rows] = _indicator_rows(sub, target)
        elif solver is Solver.CLOSED_FORM_PIECEWISE_LINEAR:
            alpha[rows], weights[rows] = _winsorize_rows(sub, target)
        else:
            a = np.empty(sub.shape[0])
            wts = np.empty_like(sub)
            it = np.empty(sub.shape[0], dtype=np.int64)
            for s in range(0, sub.shape[0], BLOCK_ROWS):
                blk = slice(s, s + BLOCK_ROWS)
                a[blk], wts[blk], it[blk] = _bisection_rows(w, sub[blk], target, tol)
            alpha[rows], weights[rows], iterations[rows] = a, wts, it
    return RowSolution(alpha, weights, iterations, solver)


def _indicator_rows(d: np.ndarray, target: float) -> tuple[np.ndarray, np.ndarray]:
    """Keep the ``k = floor(n - eta)`` closest points; distance ties go to the lower index.

    This is the selection a stable sort would make, found with a partition.
    """
    k = int(math.floor(target))
    # k < n since eta > 0; d at rank k+1 is positive for rows that reach this solver
    cut = np.partition(d, k, axis=1)[:, k : k + 1]
    weights = d < cut
    need = k - weights.sum(axis=1, keepdims=True)
    tie = d == cut
    weights |= tie & (np.cumsum(tie, axis=1) <= need)
    with np.errstate(divide="ignore"):
        return 1.0 / cut[:, 0], weights.astype(float)


def _winsorize_rows(d: np.ndarray, target: float) -> tuple[np.ndarray, np.ndarray]:
    """Threshold ``M = 1/alpha`` solving ``#{d <= M} + M * sum_{d > M} 1/d = n - eta``.

    The left side is continuous and increasing in ``M``; evaluated at the
    sorted distances it tells which linear segment holds the solution.
    """
    T, n = d.shape
    sd = np.sort(d, axis=1)
    with np.errstate(divide="ignore"):
        inv = np.where(sd > 0.0, 1.0 / np.where(sd > 0.0, sd, 1.0), 0.0)
    # tail[:, j] = sum of 1/d over sorted positions j..n-1
    tail = np.zeros((T, n + 1))
    tail[:, :n] = np.cumsum(inv[:, ::-1], axis=1)[:, ::-1]
    counts = np.arange(1, n + 1, dtype=float)
    f_at_sorted = counts + sd * tail[:, 1:]
    j = np.count_nonzero(f_at_sorted <= target, axis=1)
    rows = np.arange(T)
    M = (target - j) / tail[rows, j]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        weights = np.where(d > M[:, None], M[:, None] / d, 1.0)
    with np.errstate(divide="ignore"):
        alpha = 1.0 / M
    return alpha, weights


@np.errstate(over="ignore")  # alpha may overflow while bracketing; inf is handled below
def _bisection_rows(
    w: WeightFn, d: np.ndarray, target: float, tol: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bracket then bisect each row; invariant ``S(lo) > target >= S(hi)``.

    Rows whose bracket cannot be closed with finite ``alpha`` get ``inf``.
    """
    T, n = d.shape
    # S(alpha) = sum g(alpha**q * d**q): raise the distances to q once, not per step
    q = w.power_exponent
    dq = d if q == 1.0 else (d * d if q == 2.0 else np.power(d, q))
    buf = np.empty_like(d)

    def S(alpha: np.ndarray, idx: np.ndarray | None = None) -> np.ndarray:
        scale = alpha if q == 1.0 else (alpha * alpha if q == 2.0 else np.power(alpha, q))
        if idx is None:
            out = w.score_rows(scale, dq, buf)
        else:
            u = dq[idx]
            out = w.score_rows(scale, u, u)
        # alpha**q can overflow while alpha itself is finite: evaluate w(alpha d) directly there
        big = np.flatnonzero(np.isinf(scale) & np.isfinite(alpha))
        if big.size:
            rows = big if idx is None else idx[big]
            out[big] = w.apply_inplace(alpha[big, None] * d[rows]).sum(axis=1)
        return out

    a0 = 1.0 / d.max(axis=1)
    s0 = S(a0)
    lo = np.where(s0 > target, a0, 0.0)
    hi = np.where(s0 > target, math.inf, a0)
    failed = np.zeros(T, dtype=bool)

    grow = np.flatnonzero(s0 > target)
    step = 0
    probe = a0[grow]
    while grow.size and step < MAX_BRACKET_STEPS:
        probe = 2.0 * probe
        s = S(probe, grow)
        done = s <= target
        hi[grow[done]] = probe[done]
        lo[grow[~done]] = probe[~done]
        over = ~done & ~np.isfinite(2.0 * probe)
        failed[grow[over]] = True
        keep = ~done & ~over
        grow, probe = grow[keep], probe[keep]
        step += 1
    failed[grow] = True

    shrink = np.flatnonzero(s0 <= target)
    probe = a0[shrink]
    step = 0
    while shrink.size and step < MAX_BRACKET_STEPS:
        probe = 0.5 * probe
        s = S(probe, shrink)
        done = s > target
        lo[shrink[done]] = probe[done]
        hi[shrink[~done]] = probe[~done]
        keep = ~done & (probe > 0.0)
        shrink, probe = shrink[keep], probe[keep]
        step += 1

    iterations = np.zeros(T, dtype=np.int64)
    active = ~failed & (hi - lo > tol * hi)
    for _ in range(MAX_BISECTION_ITER):
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        s = S(np.where(active, mid, hi))
        up = active & (s <= target)
        down = active & ~(s <= target)
        hi = np.where(up, mid, hi)
        lo = np.where(down, mid, lo)
        iterations += active
        active = active & (hi - lo > tol * hi)

    alpha = np.where(failed, math.inf, hi)
    ok = ~failed
    if ok.all():
        weights = w.apply_inplace(np.multiply(hi[:, None], d))
    else:
        weights = np.empty_like(d)
        weights[ok] = w.apply_inplace(np.multiply(hi[ok, None], d[ok]))
        weights[failed] = _infinite_weights(d[failed])
    return alpha, weights, iterations


def _single(sample, kappa, eta) -> tuple[np.ndarray, float]:
    x = np.asarray(sample, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("sample must be a non-empty 1-D array")
    d = distances(x, kappa)
    return d, _check_eta(eta, x.size)


def alpha_hat(w: WeightFn, sample, kappa: float, eta: float) -> ScalingSolution:
    """Scaling factor and weights for one sample; closed form when ``w`` has one."""
    d, eta = _single(sample, kappa, eta)
    return solve_rows(w, d, eta).row(0)


def alpha_hat_bisection(
    w: WeightFn, sample, kappa: float, eta: float, tol: float = BISECTION_TOL
) -> ScalingSolution:
    """Generic solver, valid for any catalog ``w`` (including the closed-form ones)."""
    d, eta = _single(sample, kappa, eta)
    return solve_rows(w, d, eta, solver=Solver.BISECTION, tol=tol).row(0)


def alpha_hat_indicator(sample, kappa: float, eta: float) -> ScalingSolution:
    d, eta = _single(sample, kappa, eta)
    if eta == 0.0:
        raise ValueError("the indicator closed form needs eta > 0")
    w = WeightFn(WeightId.INDICATOR)
    return solve_rows(w, d, eta, solver=Solver.CLOSED_FORM_ORDER_STAT).row(0)


def alpha_hat_winsorize(sample, kappa: float, eta: float) -> ScalingSolution:
    d, eta = _single(sample, kappa, eta)
    if not 0.0 < eta < d.shape[1]:
        raise ValueError("the winsorizing closed form needs 0 < eta < n")
    w = WeightFn(WeightId.WINSORIZE)
    return solve_rows(w, d, eta, solver=Solver.CLOSED_FORM_PIECEWISE_LINEAR).row(0)
