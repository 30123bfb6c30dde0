"""Base and shrinkage estimators, spec evaluation and the estimator string parser."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shrinkmean.estimators import (
    DegenerateEstimateError,
    EstimatorSpec,
    EtaRule,
    Kind,
    bucket_bounds,
    default_level,
    empirical_mean,
    empirical_quantile,
    evaluate,
    median,
    median_of_means,
    parse_estimator,
    parse_eta,
    resolve_level,
    shrink_mean,
    shrink_mean_weighted,
    shrink_spec,
    trimmed_mean,
    winsorized_mean,
)
from shrinkmean.weights import WeightFn, WeightId, catalog

IND = WeightFn(WeightId.INDICATOR)
WIN = WeightFn(WeightId.WINSORIZE)


@pytest.mark.parametrize("x, expected", [([1, 2, 3], 2.0), ([5], 5.0), ([-1, 1], 0.0)])
def test_empirical_mean(x, expected):
    assert empirical_mean(x).value == expected


@pytest.mark.parametrize(
    "x, gamma, expected",
    [([10, 20, 30, 40], 0.5, 20.0), ([7], 0.9, 7.0), ([3, 1, 2], 1 / 3, 1.0), ([3, 1, 2, 5], 0.25, 1.0)],
)
def test_empirical_quantile(x, gamma, expected):
    assert empirical_quantile(x, gamma).value == expected


def test_median_takes_lower_middle_for_even_n():
    assert median([1, 2, 3, 4]).value == 2.0
    assert median([4, 1, 3]).value == 3.0


@pytest.mark.parametrize(
    "x, k, expected",
    [(list(range(1, 11)), 2, 5.5), ([1, 2, 3, 1000], 1, 2.5), ([1, 2, 3, 100], 1, 2.5)],
)
def test_trimmed_mean(x, k, expected):
    assert trimmed_mean(x, k).value == expected


@pytest.mark.parametrize("x, k, expected", [([1, 2, 3, 1000], 1, 2.5), ([1, 2, 3, 4, 5], 2, 3.0)])
def test_winsorized_mean(x, k, expected):
    assert winsorized_mean(x, k).value == expected


@pytest.mark.parametrize("x, K, expected", [([1, 2, 3, 4, 5, 6], 2, 2.0), ([1, 2, 100], 3, 2.0)])
def test_median_of_means(x, K, expected):
    assert median_of_means(x, K).value == expected


@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e6, 1e6)))
def test_level_zero_and_one_bucket_give_the_mean(x):
    m = empirical_mean(x).value
    assert trimmed_mean(x, 0).value == m
    assert winsorized_mean(x, 0).value == m
    assert median_of_means(x, 1).value == m


def test_bucket_bounds_put_larger_buckets_first():
    assert bucket_bounds(10, 3).tolist() == [0, 4, 7]
    with pytest.raises(ValueError):
        bucket_bounds(3, 4)


@pytest.mark.parametrize("fn, arg", [(trimmed_mean, 2), (winsorized_mean, 2), (median_of_means, 5)])
def test_level_constraints(fn, arg):
    with pytest.raises(ValueError):
        fn([1.0, 2.0, 3.0, 4.0], arg)


def test_shrink_mean_examples():
    est = shrink_mean(IND, [0, 1, 2, 10], 1.0, 1.0)
    assert est.value == 1.0
    assert shrink_mean(WIN, [0, 2], 0.0, 0.5).value == pytest.approx(0.5, rel=1e-15)
    assert shrink_mean_weighted(IND, [0, 1, 2, 10], 1.0, 1.0).value == 1.0


def test_weighted_mean_with_zero_weights_is_degenerate():
    lv = WeightFn(WeightId.LEE_VALIANT)
    with pytest.raises(DegenerateEstimateError):
        # two points at distance 1 with eta = n: compact weights reach zero total
        shrink_mean_weighted(lv, [-1.0, 1.0], 0.0, 2.0)


def test_eta_rules():
    assert EtaRule("log").resolve(0.05, 0.0, 475) == pytest.approx(math.log(20))
    assert EtaRule("theory", xi=0.5).resolve(0.05, 0.05, 475) == pytest.approx(40.00702663467389, rel=1e-12)
    assert EtaRule("fixed", 3.0).resolve(0.5, 0.3, 10) == 3.0
    with pytest.raises(ValueError):
        EtaRule("fixed", -1.0)
    with pytest.raises(ValueError):
        EtaRule("log").resolve(1.0, 0.0, 10)
    assert parse_eta("theory", 0.25) == EtaRule("theory", xi=0.25)
    assert parse_eta("2.5") == EtaRule("fixed", 2.5)
    with pytest.raises(ValueError):
        parse_eta("big")


def test_levels():
    assert default_level(0.05) == 3
    tm_eps = parse_estimator("tm:k=eps")
    mom_eps = parse_estimator("mom:K=eps")
    assert resolve_level(parse_estimator("tm"), 0.05, 0.2, 500) == 3
    assert resolve_level(tm_eps, 0.05, 0.2, 500) == 3 + 100
    assert resolve_level(mom_eps, 0.05, 0.2, 500) == min(3 + 200, 500)
    assert resolve_level(mom_eps, 0.05, 0.6, 500) == 500
    assert resolve_level(parse_estimator("tm:k=7"), 0.05, 0.2, 500) == 7


def test_evaluate_shrinkage_with_separate_base():
    spec = parse_estimator("shrink:base=median,w=indicator,eta=1")
    est = evaluate(spec, [0, 1, 2, 10], [1.0])
    assert est.value == 1.0 and est.kappa == 1.0 and est.eta == 1.0
    assert est.independent_base
    aliased = evaluate(spec, np.array([0.0, 1, 2, 10]))
    assert not aliased.independent_base


def test_evaluate_log_eta_uses_main_sample():
    spec = parse_estimator("shrink:base=median,w=rational,p=2,eta=log")
    est = evaluate(spec, np.arange(20.0), np.arange(5.0), delta=0.05)
    assert est.eta == pytest.approx(math.log(20))
    assert est.kappa == 2.0


def test_fixed_zero_eta_is_the_mean():
    spec = shrink_spec("mean", "indicator", EtaRule("fixed", 0.0))
    x = np.array([0.3, 9.0, -4.0, 11.5])
    assert evaluate(spec, x, [100.0]).value == x.mean()


@pytest.mark.parametrize(
    "text",
    [
        "mean",
        "median",
        "quantile:gamma=0.25",
        "tm",
        "tm:k=3",
        "tm:k=eps",
        "wm:k=2",
        "mom",
        "mom:K=5",
        "mom:K=eps",
        "shrink:base=median,w=rational,p=2,eta=log",
        "shrink:base=tm,k=eps,w=indicator,eta=theory,xi=0.5",
        "shrinkw:base=mean,w=circle,eta=2",
        "shrink:base=mom,K=3,w=exp,p=3,eta=log",
    ],
)
def test_id_round_trip(text):
    spec = parse_estimator(text)
    assert parse_estimator(spec.id) == spec


@pytest.mark.parametrize(
    "text", ["average", "shrink:base=shrink,w=indicator", "quantile:gamma=1.5", "tm:k=x", "shrink:w=nope", "mean:k"]
)
def test_parse_errors(text):
    with pytest.raises(ValueError):
        parse_estimator(text)


def test_nested_shrinkage_is_rejected():
    inner = shrink_spec("median", "rational")
    with pytest.raises(ValueError):
        EstimatorSpec(Kind.SHRINK, base=inner, weight=IND)


# -- affine equivariance and endpoints ----------------------------------------

BASES = ["mean", "median", "quantile:gamma=0.3", "tm:k=2", "wm:k=2", "mom:K=3"]


@pytest.mark.parametrize("base", BASES)
@pytest.mark.parametrize("w", catalog(), ids=str)
@given(
    x=arrays(np.int64, st.integers(12, 50), elements=st.integers(-10_000, 10_000), unique=True).map(lambda a: a / 16.0),
    lam=st.floats(0.1, 10) | st.floats(-10, -0.1),
    shift=st.floats(-100, 100),
)
def test_affine_equivariance(base, w, x, lam, shift):
    if base.startswith("quantile"):
        # negation maps rank ceil(gamma n) to n + 1 - ceil(gamma n): only lambda > 0 applies
        lam = abs(lam)
    spec = shrink_spec(base, w)
    y = x[:7]  # odd base size keeps the median equivariant under negation
    main = x[7:]
    ref = evaluate(spec, main, y).value
    moved = evaluate(spec, lam * main + shift, lam * y + shift).value
    tol = 1e-6 if w.solver.value == "bisection" else 1e-9
    scale = max(abs(lam * ref + shift), abs(lam) * np.abs(main).max(), 1.0)
    assert abs(moved - (lam * ref + shift)) <= tol * scale


@pytest.mark.parametrize("w", catalog(), ids=str)
@given(x=arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e4, 1e4)), kappa=st.floats(-1e4, 1e4))
def test_eta_zero_is_exactly_the_mean(w, x, kappa):
    assert shrink_mean(w, x, kappa, 0.0).value == float(np.mean(x))


@given(x=arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e4, 1e4)), kappa=st.floats(-1e4, 1e4))
def test_eta_n_with_positive_weight_is_exactly_kappa(x, kappa):
    w = WeightFn(WeightId.RATIONAL_POWER)
    est = shrink_mean(w, x, kappa, float(x.size))
    # only points sitting exactly on kappa keep weight, and they add nothing
    assert est.value == kappa
