import datetime as dt

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from gridgdp import prefilter
from gridgdp.errors import InsufficientDataError, ValidationError

DAYS = pd.bdate_range("2015-01-01", "2020-08-28")
NAMES = np.array(["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"], dtype=object)
TRUE = {"const": 4.0, "temp": -0.01, "temp_above_k": 0.02, "dow_Tue": 0.02, "dow_Wed": 0.025,
        "dow_Thu": 0.02, "dow_Fri": -0.01, "hol_generic": -0.2, "hol_christmas": -0.3, "hol_new_year": -0.3,
        "hol_dec31": -0.1, "hol_gap_to_sunday": -0.08, "hol_gap_to_saturday": -0.09}


def eq1_frame(rng, sigma=0.001, k=16.0, days=DAYS, levels=None, shift=None):
    temp = 11 - 9 * np.cos(2 * np.pi * (days.dayofyear - 15) / 365.25) + rng.normal(0, 2.5, len(days))
    hol = np.full(len(days), "none", dtype=object)
    md = days.strftime("%m-%d")
    hol[md == "12-25"] = "christmas"
    hol[md == "01-01"] = "new_year"
    hol[md == "12-31"] = "dec31"
    hol[np.isin(md, ["05-01", "11-11", "08-15"])] = "generic"
    hol[np.isin(md, ["05-02"]) & (days.dayofweek == 4)] = "gap_to_saturday"
    hol[np.isin(md, ["04-30"]) & (days.dayofweek == 0)] = "gap_to_sunday"
    frame = pd.DataFrame(
        {"temp": temp, "weekday": NAMES[days.dayofweek], "holiday_type": hol, "lockdown": False},
        index=pd.DatetimeIndex(days, name="date"),
    )
    y = (TRUE["const"] + TRUE["temp"] * temp + TRUE["temp_above_k"] * np.maximum(temp - k, 0)
         + np.array([TRUE.get(f"dow_{d}", 0.0) for d in frame["weekday"]])
         + np.array([TRUE.get(f"hol_{h}", 0.0) for h in hol]))
    if levels:
        y = y + np.array([levels.get(yr, 0.0) for yr in days.year])
    if shift is not None:
        y = y + np.where(days >= pd.Timestamp(shift[0]), shift[1], 0.0)
    frame.insert(0, "log_load", y + rng.normal(0, sigma, len(days)))
    return frame


def test_constant_series():
    frame = eq1_frame(np.random.default_rng(0))
    frame["log_load"] = 3.0
    m = prefilter.fit_short_run(frame)
    assert m.delta0 == pytest.approx(3.0)
    for name, value in m.coef.items():
        if name != "const":
            assert value == pytest.approx(0.0, abs=1e-10)
    assert m.residual_sd == pytest.approx(0.0, abs=1e-10)


def test_recovers_eq1_parameters(rng):
    frame = eq1_frame(rng)
    m = prefilter.fit_short_run(frame)
    assert abs(m.k - 16.0) <= 0.5
    assert m.fit_window[1] < dt.date(2020, 3, 3)
    for name, value in m.coef.items():
        assert abs(value - TRUE[name]) < 3 * m.se[name] + 1e-12, name
    # response is continuous at the breakpoint
    lo, hi = m.temperature_response([m.k - 1e-9, m.k + 1e-9])
    assert hi - lo == pytest.approx(0.0, abs=1e-9)


def test_breakpoint_ties_go_low():
    days = DAYS[:800]
    frame = eq1_frame(np.random.default_rng(2), days=days)
    frame["temp"] = np.where(np.arange(800) % 2, 30.0, 0.0)
    frame["log_load"] = 1.0 + 0.01 * frame["temp"]
    m = prefilter.fit_short_run(frame)
    # every interior k fits equally well
    assert m.k == 5.0


def test_no_candidate_inside_range_drops_kink():
    frame = eq1_frame(np.random.default_rng(3))
    frame["temp"] = 2.0 + 0.5 * np.sin(np.arange(len(frame)))
    m = prefilter.fit_short_run(frame)
    assert m.k is None
    assert "temp_above_k" in m.dropped
    assert "temp_above_k" not in m.coef


def test_missing_holiday_type_is_dropped(rng):
    frame = eq1_frame(rng)
    frame.loc[frame["holiday_type"] == "gap_to_saturday", "holiday_type"] = "none"
    m = prefilter.fit_short_run(frame)
    assert "hol_gap_to_saturday" in m.dropped


def test_residuals_orthogonal_to_regressors(rng):
    frame = eq1_frame(rng, sigma=0.01)
    m = prefilter.fit_short_run(frame)
    pre = frame[frame.index < "2020-03-03"]
    names, X = m.design(pre)
    resid = prefilter.short_term_adjust(pre, m).to_numpy()
    scale = np.linalg.norm(X, axis=0) * np.linalg.norm(pre["log_load"])
    assert np.all(np.abs(X.T @ resid) <= 1e-8 * scale)


def test_too_little_history(rng):
    with pytest.raises(InsufficientDataError):
        prefilter.fit_short_run(eq1_frame(rng)[-400:])


def test_adjust_own_fit_is_zero(rng):
    frame = eq1_frame(rng)
    m = prefilter.fit_short_run(frame)
    own = frame.assign(log_load=m.predict(frame))
    np.testing.assert_allclose(prefilter.short_term_adjust(own, m), 0.0, atol=1e-12)


def test_constant_model_is_level_shift(rng):
    frame = eq1_frame(rng)
    m = prefilter.ShortRunModel({"const": 2.5}, {"const": 0.0}, None, 0.0, (None, None), 0)
    np.testing.assert_allclose(prefilter.short_term_adjust(frame, m), frame["log_load"] - 2.5)


def test_post_shock_dip_survives_adjustment(rng):
    frame = eq1_frame(rng, shift=("2020-03-16", -0.10))
    m = prefilter.fit_short_run(frame)
    adj = prefilter.short_term_adjust(frame, m)
    assert abs(adj[adj.index < "2020-03-03"].mean()) < 1e-3
    assert adj[adj.index >= "2020-03-16"].mean() == pytest.approx(-0.10, abs=2e-3)


def _adjusted(values, days=DAYS):
    return pd.Series(values, index=pd.DatetimeIndex(days, name="date"))


def test_year_effects_zero():
    eff = prefilter.fit_year_effects(_adjusted(np.zeros(len(DAYS))), base_year=2020)
    assert all(a == pytest.approx(0.0, abs=1e-12) for a in eff.alpha.values())
    assert eff.alpha[2020] == 0.0


def test_single_year_level():
    values = np.where(DAYS.year == 2018, 0.05, 0.0)
    eff = prefilter.fit_year_effects(_adjusted(values), base_year=2020)
    assert eff.alpha[2018] == pytest.approx(0.05)
    assert eff.alpha[2016] == pytest.approx(0.0, abs=1e-12)


def test_year_levels_recovered(rng):
    levels = {2015: 0.02, 2016: 0.01, 2017: 0.0, 2018: -0.01, 2019: -0.02, 2020: 0.0}
    values = np.array([levels[y] for y in DAYS.year]) + rng.normal(0, 0.001, len(DAYS))
    eff = prefilter.fit_year_effects(_adjusted(values), base_year=2020)
    for year, level in levels.items():
        if year != 2020:
            assert abs(eff.alpha[year] - level) < 3 * eff.se[year]
    # weekday-only window Jan 1 .. Mar 3 inclusive
    assert eff.counts[2019] == len([d for d in DAYS if d.year == 2019 and (d.month, d.day) <= (3, 3)])


def test_calendar_window_counts_weekends():
    days = pd.date_range("2015-01-01", "2020-08-28")
    eff = prefilter.fit_year_effects(_adjusted(np.zeros(len(days)), days), base_year=2020, days="calendar")
    assert eff.counts[2019] == 62  # Jan 31 + Feb 28 + Mar 3


def test_short_window_names_year():
    values = _adjusted(np.zeros(len(DAYS)))
    values = values[~((values.index.year == 2017) & (values.index.month <= 2))]
    with pytest.raises(InsufficientDataError, match="2017"):
        prefilter.fit_year_effects(values, base_year=2020)


def test_long_run_adjust():
    eff = prefilter.YearEffects(0.0, {2018: 0.05, 2020: 0.0}, {}, 2020, (3, 3), "weekdays", {})
    s = _adjusted([0.07, 0.3], pd.DatetimeIndex(["2018-06-01", "2020-06-01"]))
    out = prefilter.long_run_adjust(s, eff)
    assert out.iloc[0] == pytest.approx(0.02)
    assert out.iloc[1] == 0.3
    with pytest.raises(ValidationError):
        prefilter.long_run_adjust(_adjusted([0.0], pd.DatetimeIndex(["2014-06-01"])), eff)


def test_pipeline_null_has_no_year_differences(rng):
    levels = {2015: 0.02, 2016: 0.01, 2017: 0.0, 2018: -0.01, 2019: -0.02}
    frame = eq1_frame(rng, sigma=0.01, levels=levels)
    _, effects, ydot = prefilter.prefilter(frame)
    pre = ydot[ydot.index < "2020-03-03"]
    # the level is pinned by the base-year window mean, so that window sets the precision
    assert abs(pre.mean()) < 3 * pre.std() / np.sqrt(effects.counts[2020])
    window = pre[(pre.index.month * 100 + pre.index.day) <= 303]
    groups = [window[window.index.year == y].to_numpy() for y in range(2015, 2021)]
    assert stats.f_oneway(*groups).pvalue > 0.05


def test_null_pre_post_means_equal(rng):
    frame = eq1_frame(rng, sigma=0.01)
    _, _, ydot = prefilter.prefilter(frame)
    pre, post = ydot[ydot.index < "2020-03-03"], ydot[ydot.index >= "2020-03-03"]
    assert stats.ttest_ind(pre, post, equal_var=False).pvalue > 0.05


def test_constant_shift_absorbed_by_intercept(rng):
    frame = eq1_frame(rng, sigma=0.01)
    a, _, ya = prefilter.prefilter(frame)
    b, _, yb = prefilter.prefilter(frame.assign(log_load=frame["log_load"] + 1.7))
    assert b.delta0 == pytest.approx(a.delta0 + 1.7)
    for name in a.coef:
        if name != "const":
            assert b.coef[name] == pytest.approx(a.coef[name], abs=1e-10)
    np.testing.assert_allclose(ya, yb, atol=1e-10)


def test_row_order_irrelevant(rng):
    frame = eq1_frame(rng, sigma=0.01)
    a = prefilter.fit_short_run(frame)
    b = prefilter.fit_short_run(frame.sample(frac=1.0, random_state=1))
    assert a.k == b.k
    for name in a.coef:
        assert b.coef[name] == pytest.approx(a.coef[name], abs=1e-10)


def test_serialization_round_trip(rng):
    short, eff, _ = prefilter.prefilter(eq1_frame(rng))
    s2 = prefilter.ShortRunModel.from_dict(short.to_dict())
    assert s2.coef == short.coef and s2.k == short.k and s2.fit_window == short.fit_window
    assert prefilter.YearEffects.from_dict(eff.to_dict()) == eff
