import math

import numpy as np
import pytest

from oracles import pvalue_oracle
from sparsedelay import errors
from sparsedelay.assoc import LagGrid
from sparsedelay.lasso import LEAVE_ONE_OUT, CrossValidation, QuantileOfPath
from sparsedelay.tde import (
    ESTIMATOR_ORDER,
    ESTIMATORS,
    EstimatorSpec,
    TdeResult,
    aggregate_years,
    best_lag,
    estimate_delay,
    estimate_delay_batch,
    no_correlation_pvalue,
    restrict_grid,
)


# ---------------------------------------------------------------- p-values


def test_pvalue_matches_oracle():
    for r, m in [(0.5, 30), (0.1, 10), (-0.7, 50), (0.95, 5), (0.02, 400)]:
        assert no_correlation_pvalue(r, m) == pytest.approx(
            pvalue_oracle(r, m), abs=1e-12
        )


def test_pvalue_documented_example():
    # r = 0.5 on an overlap of 30: t = 3.05505 on 28 df, two-sided
    assert no_correlation_pvalue(0.5, 30) == pytest.approx(0.0049000, abs=2e-5)


def test_pvalue_three_samples_closed_form():
    # df = 1: the two-sided p reduces to (2/pi) * arccos(|r|)
    for r in (0.0, 0.3, 0.5, -0.8, 0.99):
        want = (2.0 / math.pi) * math.acos(abs(r))
        assert no_correlation_pvalue(r, 3) == pytest.approx(want, abs=1e-12)


def test_pvalue_four_samples_closed_form():
    # df = 2: the two-sided p reduces to 1 - |r|
    for r in (0.0, 0.25, -0.6, 0.9):
        assert no_correlation_pvalue(r, 4) == pytest.approx(1.0 - abs(r), abs=1e-12)


def test_pvalue_edges():
    assert no_correlation_pvalue(0.0, 30) == 1.0
    assert no_correlation_pvalue(1.0, 30) == 0.0
    assert no_correlation_pvalue(-1.0, 5) == 0.0
    # out-of-range inputs clamp rather than fail
    assert no_correlation_pvalue(1.0 + 1e-9, 30) == 0.0
    assert no_correlation_pvalue(-3.0, 30) == 0.0


def test_pvalue_symmetric_in_sign():
    for r in (0.1, 0.4, 0.77):
        assert no_correlation_pvalue(r, 25) == no_correlation_pvalue(-r, 25)


def test_pvalue_monotone_in_correlation():
    rs = np.linspace(0.0, 0.999, 100)
    ps = np.array([no_correlation_pvalue(r, 30) for r in rs])
    assert (np.diff(ps) < 0).all()
    assert ps[0] == 1.0


def test_pvalue_monotone_in_overlap():
    ps = [no_correlation_pvalue(0.4, m) for m in range(3, 103)]
    assert (np.diff(ps) < 0).all()


def test_pvalue_needs_three_samples():
    with pytest.raises(errors.InsufficientOverlap):
        no_correlation_pvalue(0.5, 2)


# ---------------------------------------------------------------- grids


def test_restrict_grid_rounding():
    for fraction, half in [(0.25, 91), (0.4, 146), (0.5, 183), (1.0, 365)]:
        grid = restrict_grid(366, fraction)
        assert grid.lags[0] == -half and grid.lags[-1] == half
        assert grid.lags.size == 2 * half + 1


def test_restrict_grid_full_cap():
    grid = restrict_grid(5, 1.0)
    assert list(grid.lags) == list(range(-4, 5))


def test_restrict_grid_degenerate():
    with pytest.raises(errors.DegenerateGrid):
        restrict_grid(2, 0.1)


def test_restrict_grid_fraction_bounds():
    with pytest.raises(ValueError):
        restrict_grid(100, 0.0)
    with pytest.raises(ValueError):
        restrict_grid(100, 1.2)


# ---------------------------------------------------------------- argmax


def test_best_lag_unique_max():
    lags = np.arange(-5, 6)
    values = np.zeros(11)
    values[8] = -2.0  # lag 3, sign must not matter
    assert best_lag(lags, values) == 3


def test_best_lag_prefers_small_magnitude():
    lags = np.array([-4, -1, 0, 2, 5])
    values = np.array([3.0, 0.0, 0.0, -3.0, 3.0])
    assert best_lag(lags, values) == 2


def test_best_lag_prefers_negative_on_magnitude_tie():
    lags = np.array([-3, -1, 1, 3])
    values = np.array([2.0, 0.5, -0.5, 2.0])
    assert best_lag(lags, values) == -3


def test_best_lag_all_tied_picks_zero():
    lags = np.arange(-2, 3)
    assert best_lag(lags, np.ones(5)) == 0


# ---------------------------------------------------------------- registry


def test_registry_names_and_order():
    assert ESTIMATOR_ORDER == (
        "pn",
        "pn-trim",
        "pn-standard",
        "lasso-0.1",
        "lasso-cor-0.1",
        "lasso-cv",
        "lasso-cv-cor",
    )
    assert set(ESTIMATORS) == set(ESTIMATOR_ORDER)


def test_registry_contents():
    assert ESTIMATORS["pn"].family == "pearson"
    assert ESTIMATORS["pn"].scaling == "unscaled"
    assert ESTIMATORS["pn-trim"].scaling == "trimmed"
    assert ESTIMATORS["pn-standard"].scaling == "standard"
    for name in ("lasso-0.1", "lasso-cor-0.1"):
        assert ESTIMATORS[name].lambda_rule == QuantileOfPath(0.1)
    for name in ("lasso-cv", "lasso-cv-cor"):
        assert ESTIMATORS[name].lambda_rule == CrossValidation(folds=10)
    assert not ESTIMATORS["lasso-cv"].cor_after
    assert ESTIMATORS["lasso-cv-cor"].cor_after
    assert ESTIMATORS["lasso-cv-cor"].scaling == "standard"


def test_spec_validation():
    with pytest.raises(ValueError):
        EstimatorSpec("bad", "ridge")
    with pytest.raises(ValueError):
        EstimatorSpec("bad", "pearson", "unscaled", QuantileOfPath(0.1))
    with pytest.raises(ValueError):
        EstimatorSpec("bad", "lasso", "unscaled")
    with pytest.raises(ValueError):
        EstimatorSpec("bad", "lasso", "unscaled", QuantileOfPath(0.1), True)


# ---------------------------------------------------------------- estimates


def spike_pair(n=200, at=100, delay=50):
    x = np.zeros(n)
    y = np.zeros(n)
    x[at] = 1.0
    y[at + delay] = 1.0
    return x, y


def test_spike_pair_direct_scan():
    x, y = spike_pair()
    grid = LagGrid.full(200)
    res = estimate_delay(x, y, grid, ESTIMATORS["pn"])
    assert res.lag_hat == 50
    assert res.overlap_length == 150
    # the spikes land on the same overlap position, a perfect correlation
    assert res.p_value == 0.0
    assert not res.degenerate_overlap


def test_spike_pair_penalized():
    x, y = spike_pair()
    res = estimate_delay(x, y, restrict_grid(200, 0.6), ESTIMATORS["lasso-0.1"])
    assert res.lag_hat == 50


def test_identical_series_lag_zero():
    rng = np.random.default_rng(7)
    x = rng.normal(size=80)
    # half-width grid keeps every overlap long enough for the trimmed scan
    grid = restrict_grid(80, 0.5)
    for name in ("pn", "pn-trim", "pn-standard"):
        res = estimate_delay(x, x.copy(), grid, ESTIMATORS[name])
        assert res.lag_hat == 0
        assert res.p_value == 0.0


def test_noiseless_plateau_delay():
    # unit plateau on days 110..182 (1-based), copy delayed by 37 days
    n, tau = 366, 37
    x = np.zeros(n)
    x[109:182] = 1.0
    y = np.zeros(n)
    support = np.flatnonzero(x) + tau
    y[support[support < n]] = 1.0
    res = estimate_delay(x, y, restrict_grid(n, 0.4), ESTIMATORS["pn"])
    assert res.lag_hat == tau


def test_batch_matches_single_calls():
    rng = np.random.default_rng(42)
    n = 120
    wet = rng.random(n) < 0.25
    x = np.where(wet, rng.exponential(1.4, size=n), 0.0)
    x[30:60] += 1.0
    y = np.zeros(n)
    y[40:70] = 1.0
    y += rng.normal(0.0, 0.05, size=n)
    grid = restrict_grid(n, 0.5)
    specs = [ESTIMATORS[name] for name in ESTIMATOR_ORDER]
    batch = estimate_delay_batch(x, y, grid, specs)
    for spec, got in zip(specs, batch):
        solo = estimate_delay(x, y, grid, spec)
        assert solo.lag_hat == got.lag_hat
        assert solo.gamma_at_lag == got.gamma_at_lag
        assert solo.p_value == got.p_value
        assert solo.overlap_length == got.overlap_length
        assert solo.spec == spec


def test_gamma_at_lag_is_profile_value():
    rng = np.random.default_rng(3)
    x = rng.normal(size=60)
    y = np.roll(x, 9) + rng.normal(0.0, 0.1, size=60)
    grid = restrict_grid(60, 0.5)
    res = estimate_delay(x, y, grid, ESTIMATORS["pn-trim"])
    from sparsedelay.assoc import association_at_lag

    assert res.gamma_at_lag == pytest.approx(
        association_at_lag(x, y, res.lag_hat, "trimmed"), abs=1e-12
    )


def test_degenerate_overlap_flag():
    # constant first series: the scan still ranks lags by the raw products,
    # but the overlap correlation is undefined there
    x = np.ones(6)
    y = np.zeros(6)
    y[3] = 1.0
    res = estimate_delay(x, y, LagGrid.full(6), ESTIMATORS["pn"])
    assert res.lag_hat == 3
    assert res.degenerate_overlap
    assert res.p_value == 1.0


def test_insufficient_overlap_at_forced_lag():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=30), rng.normal(size=30)
    grid = LagGrid(np.array([29]), 30)
    with pytest.raises(errors.InsufficientOverlap):
        estimate_delay(x, y, grid, ESTIMATORS["pn"])


def test_grid_length_mismatch():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=50), rng.normal(size=50)
    with pytest.raises(ValueError):
        estimate_delay(x, y, LagGrid.full(60), ESTIMATORS["pn"])


def test_constant_series_fails_penalized_route():
    x = np.ones(40)
    y = np.ones(40)
    with pytest.raises(errors.ZeroVariance):
        estimate_delay(x, y, LagGrid.full(40), ESTIMATORS["lasso-0.1"])


def test_overpenalized_reconstruction_raises():
    rng = np.random.default_rng(5)
    x = rng.normal(size=40)
    y = rng.normal(size=40)
    # the top path quantile is the largest penalty, whose fit is all zeros
    spec = EstimatorSpec("crushed", "lasso", "unscaled", QuantileOfPath(0.995))
    with pytest.raises(errors.AllZeroReconstruction):
        estimate_delay(x, y, LagGrid.full(40), spec)


# ---------------------------------------------------------------- aggregation


def fake_result(lag, p):
    return TdeResult(lag, 0.5, p, 100, ESTIMATORS["pn"])


def test_aggregate_constant_lags():
    summary = aggregate_years([fake_result(28, 0.001)] * 3, alpha=0.05)
    assert summary.median_lag == 28.0
    assert summary.robust_sd == 0.0
    assert summary.significant_fraction == 1.0
    assert summary.has_estimate


def test_aggregate_spread_lags():
    results = [fake_result(lag, 0.01) for lag in (10, 20, 30, 40, 50)]
    summary = aggregate_years(results, alpha=0.05)
    assert summary.median_lag == 30.0
    assert summary.robust_sd == pytest.approx(14.826, abs=1e-9)
    assert summary.significant_fraction == 1.0


def test_aggregate_filters_insignificant():
    results = [fake_result(10, 0.001), fake_result(99, 0.6), fake_result(12, 0.02)]
    summary = aggregate_years(results, alpha=0.05)
    assert summary.median_lag == 11.0
    assert summary.significant_fraction == pytest.approx(2.0 / 3.0)


def test_aggregate_alpha_is_strict_cut():
    results = [fake_result(10, 0.05)]
    summary = aggregate_years(results, alpha=0.05)
    assert not summary.has_estimate
    assert summary.significant_fraction == 0.0


def test_aggregate_no_survivors():
    summary = aggregate_years([fake_result(10, 0.9)] * 4, alpha=0.05)
    assert summary.median_lag is None
    assert summary.robust_sd is None
    assert summary.significant_fraction == 0.0
    assert not summary.has_estimate


def test_aggregate_validation():
    with pytest.raises(ValueError):
        aggregate_years([], alpha=0.05)
    with pytest.raises(ValueError):
        aggregate_years([fake_result(1, 0.01)], alpha=0.0)


def test_leave_one_out_marker_exists():
    assert CrossValidation().folds is LEAVE_ONE_OUT
