"""Monte Carlo harness: trial protocol, quantiles, summary tables and best-split search."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shrinkmean.estimators import parse_estimator
from shrinkmean.harness import ExperimentConfig, Split, quantile_of_errors, run, run_trial
from shrinkmean.harness.core import draw_chunk
from shrinkmean.harness.tables import (
    argmin_split,
    best_split,
    relative_difference,
    sweep_contamination,
    sweep_splits,
    table_relative,
)
from shrinkmean.simulate import SeedPlan, benchmark_distributions, parse_distribution

NORMAL = parse_distribution("normal")
SPECS = [parse_estimator(s) for s in ("mean", "median", "shrink:base=median,w=rational", "shrink:base=mean,w=indicator")]


def config(**kw):
    base = dict(distributions=[NORMAL], estimators=SPECS, N=100, trials=300, seed_plan=SeedPlan(3, 1))
    base.update(kw)
    return ExperimentConfig(**base)


# -- splits and configs -------------------------------------------------------

@pytest.mark.parametrize(
    "text, label, m", [("NA", "NA", 500), ("m=25", "m=25", 25), ("0.05", "0.05", 25), ("40", "m=40", 40), ("0.95", "0.95", 475)]
)
def test_split_parsing(text, label, m):
    split = Split.parse(text)
    assert split.label == label
    assert split.base_size(500) == m
    assert split.aliased == (text == "NA")


@pytest.mark.parametrize("text", ["0", "1.5", "m=0", "m=500", "-3", "half"])
def test_split_rejects_bad_values(text):
    with pytest.raises(ValueError):
        Split.parse(text).base_size(500)


@pytest.mark.parametrize(
    "changes",
    [dict(trials=0), dict(delta=1.0), dict(epsilon=1.0), dict(estimators=[]), dict(estimators=SPECS + SPECS[:1]), dict(N=10, split=Split.absolute(10))],
)
def test_config_validation(changes):
    with pytest.raises(ValueError):
        config(**changes)


def test_config_sizes():
    cfg = config(N=500)
    assert (cfg.m, cfg.n) == (25, 475)
    assert config(N=500, split=Split.na()).n == 500


# -- trial protocol -------------------------------------------------------------

def test_draw_order_and_contamination_counts():
    cfg = config(N=500, epsilon=0.05, contamination_value=1e6)
    full, base, main = draw_chunk(cfg, 0, range(0, 4))
    assert full.shape == (4, 500) and base.shape == (4, 25) and main.shape == (4, 475)
    assert (full == 1e6).sum(axis=1).tolist() == [25] * 4
    assert (base == 1e6).sum(axis=1).tolist() == [1] * 4
    assert (main == 1e6).sum(axis=1).tolist() == [23] * 4
    # replaying one trial's stream reproduces the clean draw and the full-copy positions
    rng = cfg.seed_plan.stream(2, 0)
    clean = rng.standard_normal(500)
    pos = rng.choice(500, size=25, replace=False)
    assert np.array_equal(np.delete(full[2], pos), np.delete(clean, pos))
    assert np.all(full[2, pos] == 1e6)
    clean_parts = np.concatenate([base[2], main[2]])
    keep = clean_parts != 1e6
    assert np.array_equal(clean_parts[keep], clean[keep])


def test_na_split_aliases_all_samples():
    full, base, main = draw_chunk(config(split=Split.na(), epsilon=0.1), 0, range(2))
    assert base is full and main is full


def test_mean_error_quantile_matches_gaussian_oracle():
    cfg = config(N=500, estimators=SPECS[:1], trials=10_000)
    (cell,) = run(cfg)
    q, missing = quantile_of_errors(cell.errors, 0.95)
    assert missing.tolist() == [0]
    assert q[0] == pytest.approx(1.959963984540054 / math.sqrt(500), abs=0.004)


def test_contaminated_mean_error_is_arithmetic():
    cfg = config(N=500, estimators=SPECS[:1], epsilon=0.05, trials=50)
    (cell,) = run(cfg)
    assert math.log10(np.quantile(cell.errors, 0.5)) == pytest.approx(math.log10(25e6 / 500), abs=0.01)


def test_run_trial_matches_full_run():
    cfg = config(trials=2100, first_trial=5)
    (cell,) = run(cfg)
    for t in (0, 1023, 1024, 2099):
        rec = run_trial(cfg, 5 + t)
        assert list(rec.errors.values()) == cell.errors[t].tolist()
    assert cell.records()[7].trial_index == 12


def test_results_do_not_depend_on_threads():
    cfg = config(trials=2500, distributions=benchmark_distributions()[:2])
    one = run(cfg)
    many = run(cfg.with_(threads=4))
    for a, b in zip(one, many):
        assert np.array_equal(a.errors, b.errors)
        assert a.weight_sum_checks == b.weight_sum_checks


def test_same_seed_same_records_other_seed_differs():
    a = run(config())[0].errors
    assert np.array_equal(a, run(config())[0].errors)
    assert not np.array_equal(a, run(config(seed_plan=SeedPlan(4, 1)))[0].errors)


def test_errors_are_nonnegative_and_shaped():
    (cell,) = run(config())
    assert cell.errors.shape == (300, len(SPECS))
    assert np.all(cell.errors >= 0)
    assert cell.weight_sum_violations == 0 and cell.weight_sum_checks == 600


def test_failed_evaluations_are_recorded_as_missing(caplog):
    # trimming k = 60 needs 2k < n; it fails on every chunk without aborting the run
    specs = [parse_estimator("mean"), parse_estimator("tm:k=60")]
    (cell,) = run(config(estimators=specs))
    assert not np.isnan(cell.column("mean")).any()
    assert np.isnan(cell.column("tm:k=60")).all()
    q, missing = quantile_of_errors(cell.errors, 0.95)
    assert missing.tolist() == [0, 300] and math.isnan(q[1])


def test_weighted_mean_degenerate_rows_are_missing():
    spec = parse_estimator("shrinkw:base=mean,w=lee-valiant,eta=100")
    (cell,) = run(config(estimators=[spec], N=101, split=Split.absolute(1), trials=20))
    assert np.isnan(cell.errors).all()


# -- quantiles -----------------------------------------------------------------

def test_quantile_examples():
    q, _ = quantile_of_errors(np.arange(1.0, 101.0), 0.95)
    assert q[0] == 95.0
    q, _ = quantile_of_errors(np.array([[0.7, 2.0]]), 0.95)
    assert q.tolist() == [0.7, 2.0]
    u = np.random.default_rng(0).uniform(size=10_000)
    assert quantile_of_errors(u, 0.95)[0][0] == pytest.approx(0.95, abs=0.01)
    with pytest.raises(ValueError):
        quantile_of_errors(u, 1.0)


def test_quantile_accepts_records():
    from shrinkmean.harness import TrialRecord

    recs = [TrialRecord(i, {"a": float(i), "b": float(-i)}) for i in range(1, 21)]
    q, missing = quantile_of_errors(recs, 0.5)
    assert q.tolist() == [10.0, -11.0] and missing.tolist() == [0, 0]


@given(
    e=arrays(np.float64, st.tuples(st.integers(1, 200), st.integers(1, 3)), elements=st.floats(0, 1e6) | st.just(math.nan)),
    l1=st.floats(0.01, 0.99),
    l2=st.floats(0.01, 0.99),
)
def test_quantile_is_monotone_in_level(e, l1, l2):
    lo, hi = sorted((l1, l2))
    qa, ma = quantile_of_errors(e, lo)
    qb, mb = quantile_of_errors(e, hi)
    assert ma.tolist() == mb.tolist() == np.isnan(e).sum(axis=0).tolist()
    ok = ~np.isnan(qa)
    assert np.all(qa[ok] <= qb[ok])


# -- tables --------------------------------------------------------------------

def test_relative_difference():
    assert relative_difference(0.5, 1.0) == -50.0
    assert math.isnan(relative_difference(1.0, 0.0))
    assert math.isnan(relative_difference(math.nan, 1.0))


def test_reference_compared_with_itself_is_zero():
    table = table_relative(config(distributions=benchmark_distributions()), reference=parse_estimator("mean"))
    for dist in table.distributions:
        assert table.relative(dist, "mean") == 0.0


def test_default_references_are_the_base_estimators():
    specs = [parse_estimator("shrink:base=tm,w=exp")]
    table = table_relative(config(estimators=specs))
    assert [e.id for e in table.estimators] == [specs[0].id, "tm"]
    assert table.references == {specs[0].id: "tm", "tm": "tm"}
    assert table.relative("normal", "tm") == 0.0


def test_sweeps_label_settings():
    table = sweep_splits(config(trials=50), [Split.na(), Split.fraction(0.05), Split.absolute(50)])
    assert table.settings == ["NA", "0.05", "m=50"]
    assert len(table.raw) == 3
    cont = sweep_contamination(config(trials=50, estimators=SPECS[:2]), [0.0, 0.1])
    assert cont.settings == ["0", "0.1"] and cont.value == "log10"
    assert cont.cell("normal", "mean", "0.1") == pytest.approx(math.log10(10e6 / 100), abs=0.01)


def test_merge_rejects_overlapping_settings():
    t = table_relative(config(trials=20), setting="a")
    with pytest.raises(ValueError):
        t.merge(t)


# -- best split ----------------------------------------------------------------

def test_argmin_split_fixtures():
    grid = [2, 5, 10, 20]
    assert argmin_split(grid, [4.0, 3.0, 2.0, 1.0]) == 20
    assert argmin_split(grid, [1.0, 1.0, 1.0, 1.0]) == 2
    assert argmin_split([20, 2, 10], [1.0, 1.0, 0.5]) == 10
    assert argmin_split(grid, [math.nan, 2.0, 1.0, 1.0]) == 10
    with pytest.raises(ValueError):
        argmin_split(grid, [1.0])


def test_best_split_shapes_and_band():
    specs = [parse_estimator("shrink:base=mean,w=rational")]
    out = best_split(config(estimators=specs, trials=40), [2, 5, 10], N_grid=[60, 120], replications=6)
    assert [(b.N, b.estimator) for b in out] == [(60, specs[0].id), (120, specs[0].id)]
    for b in out:
        assert b.m_star.shape == (6,)
        lo, hi = b.band()
        assert lo <= b.mean <= hi and set(b.m_star) <= {2, 5, 10}


def test_best_split_grows_sublinearly_in_n():
    specs = [parse_estimator("shrink:base=mean,w=rational")]
    grid = [2, 5, 10, 20, 40]
    small, large = best_split(config(estimators=specs, trials=200), grid, N_grid=[100, 1000], replications=8)
    # the base size that suffices stays small: its share of the sample drops with N
    assert large.mean / 1000 < 0.5 * small.mean / 100
    # and the two replication bands overlap
    assert large.band()[0] <= small.band()[1]
