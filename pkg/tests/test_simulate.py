"""Samplers, analytic means, contamination and seeding."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from shrinkmean.simulate import (
    DistributionSpec,
    Family,
    SeedPlan,
    benchmark_distributions,
    contaminate,
    contamination_count,
    parse_distribution,
    sample,
    true_mean,
)

SN_MEAN = 0.7823901817554268  # sqrt(2/pi) * 5 / sqrt(26)
ST_MEAN = 1.3806665058655617  # 40-digit gamma-function evaluation


def _density(dist: DistributionSpec):
    a = dist.a
    if dist.family is Family.SKEW_NORMAL:
        return lambda x: 2 * stats.norm.pdf(x) * stats.norm.cdf(a * x)
    nu = dist.nu
    # skew-t: 2 t_nu(x) T_{nu+1}(a x sqrt((nu+1)/(nu+x^2)))
    return lambda x: 2 * stats.t.pdf(x, nu) * stats.t.cdf(a * x * math.sqrt((nu + 1) / (nu + x * x)), nu + 1)


def test_true_means():
    n, sn, t, st_ = benchmark_distributions()
    assert true_mean(n) == 0.0 and true_mean(t) == 0.0
    assert sn.true_mean == pytest.approx(SN_MEAN, rel=1e-15)
    assert st_.true_mean == pytest.approx(ST_MEAN, rel=1e-13)


@pytest.mark.parametrize("dist", [parse_distribution("skewnormal:a=5"), parse_distribution("skewt:nu=2.01,a=5"), parse_distribution("skewt:nu=4,a=-2")], ids=str)
def test_true_mean_matches_numeric_integration(dist):
    f = _density(dist)
    mass = sum(integrate.quad(f, lo, hi, limit=400)[0] for lo, hi in ((-np.inf, 0), (0, np.inf)))
    mean = sum(integrate.quad(lambda x: x * f(x), lo, hi, limit=400, epsabs=1e-12)[0] for lo, hi in ((-np.inf, 0), (0, np.inf)))
    assert mass == pytest.approx(1.0, abs=1e-8)
    assert mean == pytest.approx(dist.true_mean, abs=1e-6)


def test_skew_normal_sample_mean():
    x = sample(parse_distribution("skewnormal:a=5"), 10**6, np.random.default_rng(5))
    assert abs(x.mean() - SN_MEAN) < 5e-3
    assert stats.skew(x) > 0


def test_normal_sampler_passes_ks():
    x = sample(DistributionSpec(Family.NORMAL), 10**5, np.random.default_rng(11))
    d, p = stats.kstest(x, "norm")
    assert d < 1.63 / math.sqrt(x.size)  # 1% critical value


def test_t_sampler_passes_ks():
    x = sample(parse_distribution("t:nu=2.01"), 10**5, np.random.default_rng(12))
    assert stats.kstest(x, stats.t(2.01).cdf).statistic < 1.63 / math.sqrt(x.size)


def test_skew_normal_sampler_passes_ks():
    dist = parse_distribution("skewnormal:a=5")
    x = sample(dist, 10**5, np.random.default_rng(13))
    assert stats.kstest(x, stats.skewnorm(5).cdf).statistic < 1.63 / math.sqrt(x.size)


def test_standard_deviation():
    sn = parse_distribution("skewnormal:a=5")
    assert sn.std == pytest.approx(stats.skewnorm(5).std(), rel=1e-12)
    assert DistributionSpec(Family.NORMAL).std == 1.0
    assert parse_distribution("t:nu=1.5").std is None
    assert parse_distribution("t:nu=2.01").std == pytest.approx(math.sqrt(201.0), rel=1e-12)
    assert parse_distribution("t:nu=5").std == pytest.approx(math.sqrt(5 / 3))


def test_distribution_parsing_and_ids():
    for d in benchmark_distributions():
        assert parse_distribution(d.id) == d
    assert [d.short for d in benchmark_distributions()] == ["N", "SN", "T", "ST"]
    assert parse_distribution("st:a=3,nu=5") == DistributionSpec(Family.SKEW_T, a=3, nu=5)
    for bad in ("cauchy", "t:nu=1", "normal:b=1", "t:nu"):
        with pytest.raises(ValueError):
            parse_distribution(bad)


@pytest.mark.parametrize("n, eps, count", [(500, 0.05, 25), (19, 0.1, 1), (500, 0.1, 50), (475, 0.05, 23), (10, 0.0, 0)])
def test_contamination_count(n, eps, count):
    assert contamination_count(n, eps) == count


@given(n=st.integers(1, 300), eps=st.floats(0.0, 0.99), seed=st.integers(0, 2**32))
def test_contaminate_changes_exactly_floor_eps_n(n, eps, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    y = contaminate(x, eps, 1e6, np.random.default_rng(seed + 1))
    assert y.shape == x.shape
    assert np.count_nonzero(y != x) == contamination_count(n, eps)
    assert np.all(y[y != x] == 1e6)


def test_contaminate_edge_cases():
    x = np.arange(5.0)
    assert np.array_equal(contaminate(x, 0.0, 7.0), x)
    for eps, value in ((1.0, 1e6), (-0.1, 1e6), (0.5, math.inf)):
        with pytest.raises(ValueError):
            contaminate(x, eps, value, np.random.default_rng(0))


def test_seed_plan_is_deterministic_and_keyed():
    plan = SeedPlan(7, 1)
    a = plan.stream(3, 0).standard_normal(5)
    b = SeedPlan(7, 1).stream(3, 0).standard_normal(5)
    assert np.array_equal(a, b)
    others = [plan.stream(4, 0), plan.stream(3, 1), SeedPlan(8, 1).stream(3, 0), plan.child(2).stream(3, 0)]
    for g in others:
        assert not np.array_equal(a, g.standard_normal(5))
    with pytest.raises(ValueError):
        plan.stream(-1)


def test_seed_streams_are_uncorrelated():
    plan = SeedPlan(0, 0)
    draws = np.array([plan.stream(i).standard_normal(2000) for i in range(50)])
    corr = np.corrcoef(draws)
    off = corr[~np.eye(50, dtype=bool)]
    assert np.abs(off).max() < 5 / math.sqrt(2000)
