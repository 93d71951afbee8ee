import numpy as np
import pandas as pd
import pytest

from gridgdp import impact
from gridgdp.errors import CovariancePathologyError, ValidationError
from gridgdp.impact import ImpactModel


def weekday_index(start, end):
    idx = pd.date_range(start, end, freq="D")
    return idx[idx.dayofweek < 5]


def toy_model(gamma_star=-0.12, var=0.0, order=(0, 0), extra=()):
    """Intercept, one week dummy and one shock-year effect for ISO week 2."""
    names = ["const", "week_02", "shock_02", *extra, "sigma2"]
    params = np.array([0.0, 0.0, gamma_star, *[0.5] * len(extra), 0.01])
    cov = np.zeros((len(names), len(names)))
    cov[2, 2] = var
    return ImpactModel(
        names=names, params=params, param_cov=cov, shock_year=2020, estimator="ml_arma", order=order,
        sigma2=0.01, smear_var=0.01, loglik=None, nobs=100,
    )


SHOCK_WEEK = weekday_index("2020-01-06", "2020-01-10")  # ISO 2020-W02


def test_week_keys_fold_week_53():
    years, weeks = impact.week_keys(pd.DatetimeIndex(["2020-12-31", "2021-01-01", "2021-01-04"]))
    assert list(weeks) == [52, 52, 1]
    assert list(years) == [2020, 2020, 2021]


def test_design_matrix_layout():
    idx = weekday_index("2019-01-01", "2020-01-17")
    names, X = impact.design_matrix(idx, 2020)
    assert names[0] == "const" and "week_01" not in names and "week_02" in names
    assert [n for n in names if n.startswith("shock_")] == ["shock_01", "shock_02", "shock_03"]
    np.testing.assert_array_equal(X[:, 0], 1.0)
    assert X[:, names.index("shock_02")].sum() == 5


def test_design_matrix_rejects_orphans_and_single_year():
    with pytest.raises(ValidationError, match="historical"):
        impact.design_matrix(weekday_index("2019-06-01", "2020-01-31"), 2020)
    with pytest.raises(ValidationError, match="two distinct years"):
        impact.design_matrix(weekday_index("2019-01-07", "2019-03-01"), 2020)


def test_single_shock_effect_example():
    m = toy_model(-0.12)
    f = impact.predict_factual(m, SHOCK_WEEK)
    c = impact.predict_counterfactual(m, SHOCK_WEEK)
    np.testing.assert_allclose(impact.compute_impact(f, c), -11.308, atol=5e-4)
    np.testing.assert_allclose(impact.compute_impact(f, c), 100 * np.expm1(-0.12), rtol=1e-12)


def test_offset_and_smearing_cancel_in_impact():
    m = toy_model(-0.3)
    a = impact.compute_impact(impact.predict_factual(m, SHOCK_WEEK), impact.predict_counterfactual(m, SHOCK_WEEK))
    off = np.linspace(7, 9, 5)
    b = impact.compute_impact(
        impact.predict_factual(m, SHOCK_WEEK, off), impact.predict_counterfactual(m, SHOCK_WEEK, off)
    )
    np.testing.assert_allclose(a, b, rtol=1e-12)
    assert impact.predict_factual(m, SHOCK_WEEK).iloc[0] == pytest.approx(np.exp(-0.3 + 0.005))


def test_compute_impact_checks():
    with pytest.raises(ValidationError):
        impact.compute_impact([1.0, 2.0], [1.0])
    with pytest.raises(ValidationError):
        impact.compute_impact([1.0], [0.0])


def test_prediction_rows_unknown_week():
    with pytest.raises(ValidationError):
        impact.prediction_rows(toy_model(), weekday_index("2020-01-13", "2020-01-17"))


def test_fit_recovers_planted_effects(rng):
    idx = weekday_index("2016-01-04", "2020-12-31")
    _, weeks = impact.week_keys(idx)
    truth = -0.2 * ((idx.year == 2020) & (weeks >= 12))
    y = pd.Series(0.05 * np.sin(weeks / 8) + truth + rng.normal(0, 0.02, len(idx)), index=idx)
    m = impact.fit_impact_model(y, (1, 0), "ml_arma", 2020)
    se = m.gamma_star_se()
    z = np.array([(m.gamma_star[w] - (-0.2 if w >= 12 else 0.0)) / se[w] for w in m.gamma_star])
    assert np.mean(np.abs(z) < 3) > 0.95
    # OLS point estimates are unbiased too; HAC errors on 5-day effects are too small to test this way
    h = impact.fit_impact_model(y, estimator="ols_hac", shock_year=2020)
    err = np.array([h.gamma_star[w] - (-0.2 if w >= 12 else 0.0) for w in h.gamma_star])
    assert abs(err.mean()) < 0.01 and err.std() < 0.03


def test_ols_hac_matches_lstsq(rng):
    idx = weekday_index("2017-01-02", "2020-06-30")
    y = pd.Series(rng.normal(size=len(idx)), index=idx)
    m = impact.fit_impact_model(y, estimator="ols_hac", shock_year=2020)
    names, X = impact.design_matrix(idx, 2020)
    np.testing.assert_allclose(m.params[:-1], np.linalg.lstsq(X, y.to_numpy(), rcond=None)[0], atol=1e-10)
    assert m.names[:-1] == names


def test_model_roundtrip():
    m = toy_model(-0.1, 0.01)
    back = ImpactModel.from_dict(m.to_dict())
    np.testing.assert_array_equal(back.params, m.params)
    np.testing.assert_array_equal(back.param_cov, m.param_cov)
    assert back.gamma_star == m.gamma_star and back.cov_type == m.cov_type


def test_mc_degenerate_covariance_collapses_to_point():
    mc = impact.monte_carlo_ci(toy_model(-0.12), SHOCK_WEEK, 200, seed=1)
    np.testing.assert_allclose(mc.daily["lo95"], mc.daily["impact_pct"], atol=1e-9)
    np.testing.assert_allclose(mc.daily["hi95"], mc.daily["impact_pct"], atol=1e-9)
    assert mc.n_rejected == 0


def test_mc_scalar_interval_matches_lognormal_quantiles():
    g, s = -0.12, 0.05
    mc = impact.monte_carlo_ci(toy_model(g, s**2), SHOCK_WEEK, 20000, seed=3)
    lo, hi = 100 * np.expm1(g - 1.959964 * s), 100 * np.expm1(g + 1.959964 * s)
    # percentile standard error at 2.5% with 20000 draws is about 0.11 sd of gamma
    assert mc.weekly["lo95"].iloc[0] == pytest.approx(lo, abs=0.2)
    assert mc.weekly["hi95"].iloc[0] == pytest.approx(hi, abs=0.2)


def test_mc_reproducible_and_substreams():
    m = toy_model(-0.12, 0.0025)
    a = impact.monte_carlo_ci(m, SHOCK_WEEK, 50, seed=9)
    b = impact.monte_carlo_ci(m, SHOCK_WEEK, 50, seed=9)
    np.testing.assert_array_equal(a.draws, b.draws)
    short = impact.monte_carlo_ci(m, SHOCK_WEEK, 20, seed=9)
    np.testing.assert_array_equal(short.draws, a.draws[:20])
    other = impact.monte_carlo_ci(m, SHOCK_WEEK, 50, seed=10)
    assert not np.array_equal(other.draws, a.draws)


def test_mc_rejection_cap():
    m = toy_model(-0.1, 0.0, order=(1, 0), extra=("ar1",))
    m.params[3] = 0.95
    m.param_cov[3, 3] = 0.5**2
    with pytest.raises(CovariancePathologyError):
        impact.monte_carlo_ci(m, SHOCK_WEEK, 100, seed=0)


def test_mc_rejects_indefinite_covariance():
    m = toy_model(-0.1, 0.01)
    m.param_cov[0, 0] = -1.0
    with pytest.raises(CovariancePathologyError):
        impact.monte_carlo_ci(m, SHOCK_WEEK, 10)


def test_constant_series_gives_zero_impact():
    idx = weekday_index("2018-01-01", "2020-12-31")
    y = pd.Series(0.0, index=idx)
    for estimator in impact.ESTIMATORS:
        m = impact.fit_impact_model(y, (1, 0), estimator, 2020)
        mc = impact.monte_carlo_ci(m, idx[idx.year == 2020], 20, seed=0)
        np.testing.assert_allclose(mc.daily.to_numpy(), 0.0, atol=1e-9)


def test_weekly_mean():
    idx = weekday_index("2020-01-06", "2020-01-17")
    labels, means = impact.weekly_mean(idx, np.arange(10.0))
    assert labels == ["2020-W02", "2020-W03"]
    np.testing.assert_allclose(means, [2.0, 7.0])


def test_fitted_fixture_impacts_track_truth(fitted, dataset):
    dates = fitted.adjusted.index[fitted.adjusted.index.year == 2020]
    mc = impact.monte_carlo_ci(fitted.model, dates, 1000, seed=0, offset=fitted.offset(dates))
    truth = dataset.weekly_truth().reindex(mc.weekly.index)
    err = (mc.weekly["impact_pct"] - truth).abs()
    assert err.mean() < 1.5
    assert ((truth >= mc.weekly["lo95"]) & (truth <= mc.weekly["hi95"])).mean() > 0.8
