"""Two-step prefiltering of daily log load.

Step one removes temperature, day-of-week and holiday effects with a
piecewise-linear regression fitted on pre-shock data. Step two removes
yearly levels estimated on the same early-year window of every year.
"""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .config import HOLIDAY_TYPES
from .errors import InsufficientDataError, ValidationError
from .ingest import WEEKDAYS
from .ols import ols

logger = logging.getLogger(__name__)

DEFAULT_SHOCK_DATE = dt.date(2020, 3, 3)
K_GRID = np.arange(5.0, 25.0 + 1e-9, 0.5)
MIN_WINDOW_DAYS = 20
MIN_FIT_SPAN_DAYS = 728


@dataclass
class ShortRunModel:
    """Piecewise-linear temperature, weekday and holiday model for log load."""

    coef: dict
    se: dict
    k: float | None
    residual_sd: float
    fit_window: tuple
    nobs: int
    dropped: list = field(default_factory=list)
    ssr_profile: dict = field(default_factory=dict)

    @property
    def delta0(self):
        return self.coef.get("const", 0.0)

    @property
    def delta1(self):
        return self.coef.get("temp", 0.0)

    @property
    def delta2(self):
        return self.coef.get("temp_above_k", 0.0)

    @property
    def beta_w(self):
        return {d: self.coef.get(f"dow_{d}", 0.0) for d in WEEKDAYS[1:] if f"dow_{d}" in self.coef}

    @property
    def beta_h(self):
        return {h: self.coef.get(f"hol_{h}", 0.0) for h in HOLIDAY_TYPES}

    def temperature_response(self, temp):
        temp = np.asarray(temp, dtype=float)
        out = self.delta1 * temp
        if self.k is not None:
            out = out + self.delta2 * np.where(temp > self.k, temp - self.k, 0.0)
        return out

    def design(self, series):
        """Regressor matrix of the fitted columns for every row of ``series``."""
        names, X = _design(series, self.k, include_weekends=True)
        cols = [i for i, n in enumerate(names) if n in self.coef]
        return [names[i] for i in cols], X[:, cols]

    def predict(self, series):
        """Short-run prediction of log load for every row of ``series``."""
        names, X = self.design(series)
        beta = np.array([self.coef[n] for n in names])
        return pd.Series(X @ beta, index=series.index, name="short_run_fit")

    def to_dict(self):
        return {
            "coef": self.coef,
            "se": self.se,
            "k": self.k,
            "residual_sd": self.residual_sd,
            "fit_window": [str(self.fit_window[0]), str(self.fit_window[1])],
            "nobs": self.nobs,
            "dropped": list(self.dropped),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            coef=dict(d["coef"]),
            se=dict(d["se"]),
            k=d["k"],
            residual_sd=d["residual_sd"],
            fit_window=tuple(dt.date.fromisoformat(s) for s in d["fit_window"]),
            nobs=d["nobs"],
            dropped=list(d.get("dropped", [])),
        )


@dataclass
class YearEffects:
    """Yearly levels of short-run-adjusted load; the base year has effect zero."""

    alpha0: float
    alpha: dict  # year -> effect, base year included with 0.0
    se: dict
    base_year: int
    window_end: tuple  # (month, day), inclusive
    days: str
    counts: dict

    def effect(self, year):
        try:
            return self.alpha[int(year)]
        except KeyError:
            raise ValidationError(f"year {year} outside fitted span {sorted(self.alpha)}") from None

    def to_dict(self):
        return {
            "alpha0": self.alpha0,
            "alpha": {str(k): v for k, v in self.alpha.items()},
            "se": {str(k): v for k, v in self.se.items()},
            "base_year": self.base_year,
            "window_end": list(self.window_end),
            "days": self.days,
            "counts": {str(k): v for k, v in self.counts.items()},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            alpha0=d["alpha0"],
            alpha={int(k): v for k, v in d["alpha"].items()},
            se={int(k): v for k, v in d["se"].items()},
            base_year=d["base_year"],
            window_end=tuple(d["window_end"]),
            days=d["days"],
            counts={int(k): v for k, v in d["counts"].items()},
        )


def _design(series, k, include_weekends):
    temp = series["temp"].to_numpy(dtype=float)
    weekday = series["weekday"].to_numpy()
    holiday = series["holiday_type"].to_numpy()
    cols = {"const": np.ones(len(series)), "temp": temp}
    if k is not None:
        cols["temp_above_k"] = np.where(temp > k, temp - k, 0.0)
    days = WEEKDAYS[1:] if include_weekends else WEEKDAYS[1:5]
    for d in days:
        cols[f"dow_{d}"] = (weekday == d).astype(float)
    for h in HOLIDAY_TYPES:
        cols[f"hol_{h}"] = (holiday == h).astype(float)
    names = list(cols)
    return names, np.column_stack([cols[n] for n in names])


def _as_ts(day):
    return pd.Timestamp(day)


def fit_short_run(series, shock_date=DEFAULT_SHOCK_DATE, k_grid=K_GRID):
    """Fit the piecewise-linear short-run model on days before ``shock_date``.

    The breakpoint ``k`` is the grid value strictly inside the observed
    temperature range with the smallest residual sum of squares (ties go to
    the lower value). If no grid value is inside the range, the
    above-breakpoint slope is dropped and ``k`` is None.
    """
    fit = series[series.index < _as_ts(shock_date)].sort_index()
    if len(fit) == 0 or (fit.index.max() - fit.index.min()).days < MIN_FIT_SPAN_DAYS:
        raise InsufficientDataError("short-run fit needs two years of pre-shock data")
    y = fit["log_load"].to_numpy(dtype=float)
    temp = fit["temp"].to_numpy(dtype=float)
    include_weekends = bool(np.isin(fit["weekday"].to_numpy(), ("Sat", "Sun")).any())

    candidates = [k for k in k_grid if temp.min() < k < temp.max()]
    profile = {}
    best = None
    for k in candidates:
        names, X = _design(fit, k, include_weekends)
        res = ols(y, X, names)
        profile[float(k)] = res.ssr
        if best is None or res.ssr < best[1].ssr * (1 - 1e-12) - 1e-300:
            best = (float(k), res)
    if best is None:
        names, X = _design(fit, None, include_weekends)
        best = (None, ols(y, X, names))
        best[1].dropped.append("temp_above_k")
        logger.info("no breakpoint candidate inside [%.1f, %.1f]; single slope", temp.min(), temp.max())
    k, res = best
    if res.dropped:
        logger.info("short-run fit dropped columns %s", res.dropped)
    return ShortRunModel(
        coef=res.as_dict(),
        se=res.as_dict(res.se),
        k=k,
        residual_sd=float(np.sqrt(res.sigma2)),
        fit_window=(fit.index.min().date(), fit.index.max().date()),
        nobs=res.nobs,
        dropped=list(res.dropped),
        ssr_profile=profile,
    )


def short_term_adjust(series, model):
    """Log load minus the short-run model prediction, over the whole sample."""
    out = series["log_load"] - model.predict(series)
    out.name = "short_adjusted"
    return out


def window_mask(index, window_end, days):
    md = index.month * 100 + index.day
    mask = md <= window_end[0] * 100 + window_end[1]
    if days == "weekdays":
        mask &= index.dayofweek < 5
    elif days != "calendar":
        raise ValidationError(f"unknown window day mode {days!r}")
    return mask


def fit_year_effects(adjusted, base_year=None, window_end=(3, 3), days="weekdays"):
    """Year fixed effects on each year's Jan 1 to ``window_end`` window (inclusive).

    ``base_year`` defaults to the last year in the data; its effect is zero.
    ``days="calendar"`` also uses weekend days when the series has them.
    """
    adjusted = adjusted.dropna()
    idx = pd.DatetimeIndex(adjusted.index)
    if base_year is None:
        base_year = int(idx.year.max())
    years = sorted(int(y) for y in set(idx.year) if y <= base_year)
    if base_year not in years:
        raise InsufficientDataError(f"no data in base year {base_year}")
    mask = window_mask(idx, window_end, days) & (idx.year <= base_year)
    win = adjusted[mask]
    win_years = pd.DatetimeIndex(win.index).year
    counts = {y: int((win_years == y).sum()) for y in years}
    for y, c in counts.items():
        if c < MIN_WINDOW_DAYS:
            raise InsufficientDataError(f"year {y}: only {c} usable days in the early-year window")
    others = [y for y in years if y != base_year]
    names = ["const"] + [f"year_{y}" for y in others]
    X = np.column_stack([np.ones(len(win))] + [(win_years == y).astype(float) for y in others])
    res = ols(win.to_numpy(dtype=float), X, names)
    coef, se = res.as_dict(), res.as_dict(res.se)
    alpha = {y: coef.get(f"year_{y}", 0.0) for y in others}
    alpha[base_year] = 0.0
    ses = {y: se.get(f"year_{y}", 0.0) for y in others}
    ses[base_year] = 0.0
    return YearEffects(
        alpha0=coef["const"],
        alpha=dict(sorted(alpha.items())),
        se=dict(sorted(ses.items())),
        base_year=base_year,
        window_end=tuple(window_end),
        days=days,
        counts=counts,
    )


def long_run_adjust(adjusted, effects):
    """Subtract each date's year effect; the result is the impact model's dependent variable."""
    years = pd.DatetimeIndex(adjusted.index).year
    missing = sorted(set(years) - set(effects.alpha))
    if missing:
        raise ValidationError(f"years {missing} outside fitted span {sorted(effects.alpha)}")
    shift = np.array([effects.alpha[y] for y in years])
    out = adjusted - shift
    out.name = "prefiltered"
    return out


def prefilter(series, shock_date=DEFAULT_SHOCK_DATE, days="weekdays"):
    """Run both steps; returns ``(short_run_model, year_effects, prefiltered_series)``."""
    short = fit_short_run(series, shock_date)
    adj = short_term_adjust(series, short)
    shock_ts = pd.Timestamp(shock_date)
    effects = fit_year_effects(
        adj, base_year=shock_ts.year, window_end=(shock_ts.month, shock_ts.day), days=days
    )
    return short, effects, long_run_adjust(adj, effects)
