"""Prefilter, fit and covariance steps chained for one country's daily series."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import ValidationError
from .impact import ESTIMATORS, design_matrix, fit_impact_model, prediction_rows, select_arma_order
from .ols import ols
from .prefilter import DEFAULT_SHOCK_DATE, fit_short_run, fit_year_effects, long_run_adjust, short_term_adjust
from .uncertainty import apply_two_step

COV_TYPES = ("two_step", "observed_information")
MAX_ORDER = (5, 2)


@dataclass
class Estimate:
    """Everything fitted on one daily series."""

    series: pd.DataFrame
    shock_date: dt.date
    short_run: object
    year_effects: object
    adjusted: pd.Series
    model: object

    def deterministic_fit(self):
        """Log-load prediction from the deterministic parts of all three stages."""
        idx = self.adjusted.index
        rows = self.series.loc[idx]
        short = self.short_run.predict(rows).to_numpy()
        level = np.array([self.year_effects.alpha[y] for y in idx.year])
        D = prediction_rows(self.model, idx, with_shock=True)
        week = D @ self.model.params
        return pd.Series(short + level + week, index=idx, name="deterministic_fit")

    def offset(self, dates):
        """Log-scale prefilter component (short run plus year level) for ``dates``."""
        dates = pd.DatetimeIndex(dates)
        rows = self.series.loc[dates]
        level = np.array([self.year_effects.alpha[y] for y in dates.year])
        return self.short_run.predict(rows).to_numpy() + level


def choose_order(adjusted, shock_year, max_order=MAX_ORDER):
    """AIC-selected ARMA order for the OLS residuals of the week fixed effects model."""
    adjusted = adjusted.dropna().sort_index()
    names, X = design_matrix(adjusted.index, shock_year)
    resid = ols(adjusted.to_numpy(dtype=float), X, names).resid
    return select_arma_order(resid, *max_order)


def estimate(
    series,
    shock_date=DEFAULT_SHOCK_DATE,
    estimator="ml_arma",
    order=None,
    cov_type="two_step",
    window_days=None,
    max_order=MAX_ORDER,
):
    """Fit the full chain on ``series`` (the frame from ``build_daily_series``).

    ``order=None`` selects the ARMA order by AIC. ``window_days`` defaults to
    weekdays, or calendar days when the series contains weekends.
    """
    if estimator not in ESTIMATORS:
        raise ValidationError(f"unknown estimator {estimator!r}")
    if cov_type not in COV_TYPES:
        raise ValidationError(f"unknown covariance type {cov_type!r}")
    shock_date = pd.Timestamp(shock_date).date()
    series = series.sort_index()
    if window_days is None:
        has_weekend = bool(np.isin(series["weekday"].to_numpy(), ("Sat", "Sun")).any())
        window_days = "calendar" if has_weekend else "weekdays"
    short = fit_short_run(series, shock_date)
    adj = short_term_adjust(series, short)
    effects = fit_year_effects(
        adj, base_year=shock_date.year, window_end=(shock_date.month, shock_date.day), days=window_days
    )
    adj = adj[adj.index.year <= shock_date.year]
    adjusted = long_run_adjust(adj, effects)
    if estimator == "ml_arma" and order is None:
        order = choose_order(adjusted, shock_date.year, max_order)
    model = fit_impact_model(adjusted, order or (0, 0), estimator, shock_date.year)
    if cov_type == "two_step":
        apply_two_step(model, series, short, effects, adjusted)
    return Estimate(series, shock_date, short, effects, adjusted, model)
