"""Load impacts rescaled to GDP impacts, period aggregation and official-statistics comparison.

Residential consumption is assumed unrelated to output, so a load impact
``l`` (percent) is attributed to the non-residential share of load. During
lockdowns residential consumption is taken to rise by 40%, which shrinks the
productive share further.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .config import MAX_RESIDENTIAL_SHARE
from .errors import ParseError, ValidationError
from .impact import week_keys, week_label

logger = logging.getLogger(__name__)

LOCKDOWN_RESIDENTIAL_FACTOR = 1.4
PERIODS = ("week", "month", "quarter")
STAR_LEVELS = ((0.01, "***"), (0.05, "**"), (0.10, "*"))


def rescale_to_gdp(load_pct, residential_share, lockdown=False):
    """GDP impact (percent) implied by a load impact (percent).

    Parameters
    ----------
    load_pct : float or array_like
        Load impact in percent.
    residential_share : float
        Residential share of load ``r`` in percent, ``0 <= r < 100/1.4``.
    lockdown : bool or array_like of bool
        Per-value lockdown flag, broadcast against ``load_pct``.
    """
    r = float(residential_share)
    if not (0.0 <= r < MAX_RESIDENTIAL_SHARE):
        raise ValidationError(f"residential share {r} outside [0, {MAX_RESIDENTIAL_SHARE:.4f})")
    load = np.asarray(load_pct, dtype=float)
    share = np.where(np.asarray(lockdown, dtype=bool), LOCKDOWN_RESIDENTIAL_FACTOR * r, r)
    out = load * 100.0 / (100.0 - share)
    return float(out) if out.ndim == 0 else out


def period_labels(dates, period):
    dates = pd.DatetimeIndex(dates)
    if period == "week":
        years, weeks = week_keys(dates)
        return np.array([week_label(y, w) for y, w in zip(years, weeks)], dtype=object)
    if period == "month":
        return np.asarray(dates.strftime("%Y-%m"), dtype=object)
    if period == "quarter":
        return np.array([f"{y}Q{q}" for y, q in zip(dates.year, dates.quarter)], dtype=object)
    raise ValidationError(f"unknown period {period!r}")


def stars(draws):
    """Significance stars from the percentile intervals of ``draws`` (last axis)."""
    draws = np.asarray(draws, dtype=float)
    for alpha, mark in STAR_LEVELS:
        lo, hi = np.percentile(draws, [50 * alpha, 100 - 50 * alpha], axis=-1)
        if lo > 0 or hi < 0:
            return mark
    return ""


def aggregate_period(dates, point, draws, period="month"):
    """Average daily paths over weekdays within each period.

    Parameters
    ----------
    dates : sequence of dates
        Dates of the daily paths.
    point : array_like, shape (n_dates,)
        Plug-in daily path.
    draws : array_like, shape (n_draws, n_dates)
        Simulated daily paths.
    period : {"week", "month", "quarter"}

    Returns
    -------
    pandas.DataFrame
        Indexed by period label with ``gdp_pct, lower95, upper95, stars``.
    """
    dates = pd.DatetimeIndex(dates)
    point = np.asarray(point, dtype=float)
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    if point.shape != (len(dates),) or draws.shape[1] != len(dates):
        raise ValidationError("daily paths are not aligned with dates")
    labels = period_labels(dates, period)
    weekday = dates.dayofweek < 5
    rows = []
    for label in sorted(set(labels)):
        sel = (labels == label) & weekday
        if not sel.any():
            logger.warning("period %s has no weekdays; omitted", label)
            continue
        per_draw = draws[:, sel].mean(axis=1)
        lo, hi = np.percentile(per_draw, [2.5, 97.5])
        rows.append((label, float(point[sel].mean()), float(lo), float(hi), stars(per_draw)))
    out = pd.DataFrame(rows, columns=[period, "gdp_pct", "lower95", "upper95", "stars"]).set_index(period)
    return out


@dataclass
class GdpImpactSeries:
    daily: pd.DataFrame  # date: gdp_pct, lockdown
    weekly: pd.DataFrame
    monthly: pd.DataFrame
    quarterly: pd.DataFrame
    draws: np.ndarray | None = None


def gdp_impacts(dates, load_point, load_draws, residential_share, lockdown):
    """Daily GDP paths from load paths, then weekly, monthly and quarterly aggregates.

    The per-day lockdown flag is applied before any aggregation.
    """
    dates = pd.DatetimeIndex(dates)
    lockdown = np.broadcast_to(np.asarray(lockdown, dtype=bool), (len(dates),))
    point = rescale_to_gdp(load_point, residential_share, lockdown)
    draws = rescale_to_gdp(load_draws, residential_share, lockdown[None, :])
    daily = pd.DataFrame({"gdp_pct": point, "lockdown": lockdown}, index=dates)
    daily.index.name = "date"
    return GdpImpactSeries(
        daily=daily,
        weekly=aggregate_period(dates, point, draws, "week"),
        monthly=aggregate_period(dates, point, draws, "month"),
        quarterly=aggregate_period(dates, point, draws, "quarter"),
        draws=draws,
    )


def format_gdp_report(monthly):
    """Tab-separated monthly report: month, impact, lower, upper, stars."""
    lines = ["month\timpact\tlower\tupper\tstars"]
    for label, row in monthly.iterrows():
        lines.append(f"{label}\t{row.gdp_pct:.2f}\t{row.lower95:.2f}\t{row.upper95:.2f}\t{row.stars}")
    return "\n".join(lines) + "\n"


def read_official(source):
    """Official quarterly growth: columns ``country, quarter, growth_pct, provisional``."""
    text = source.read() if hasattr(source, "read") else open(source, encoding="utf-8").read()
    sep = "\t" if "\t" in text.splitlines()[0] else ","
    frame = pd.read_csv(io.StringIO(text), sep=sep, dtype={"country": str, "quarter": str})
    required = {"country", "quarter", "growth_pct"}
    if not required <= set(frame.columns):
        raise ParseError(f"official statistics need columns {sorted(required)}", line=1)
    if "provisional" not in frame:
        frame["provisional"] = False
    frame["provisional"] = frame["provisional"].astype(str).str.lower().isin(("1", "true", "yes", "y"))
    frame["growth_pct"] = pd.to_numeric(frame["growth_pct"], errors="raise")
    if frame.duplicated(["country", "quarter"]).any():
        raise ValidationError("duplicate country-quarter rows in official statistics")
    return frame


def _previous_year(quarter):
    return f"{int(quarter[:4]) - 1}{quarter[4:]}"


def _corr(a, b):
    if len(a) < 2 or np.std(a) == 0 or np.std(b) == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


def compare_official(ours, official, counterfactual=None):
    """Pair our quarterly GDP impacts with counterfactual-adjusted official growth.

    Parameters
    ----------
    ours : pandas.DataFrame
        Columns ``country, quarter, gdp_pct``.
    official : pandas.DataFrame
        Columns ``country, quarter, growth_pct`` and optionally ``provisional``.
    counterfactual : pandas.DataFrame, optional
        Columns ``country, quarter, growth_pct``. Defaults to the official
        growth of the same quarter one year earlier.

    Returns
    -------
    (pandas.DataFrame, float, float)
        Paired table, correlation over non-provisional pairs and correlation
        over all pairs.
    """
    ours = ours[["country", "quarter", "gdp_pct"]].copy()
    off = official.copy()
    if "provisional" not in off:
        off["provisional"] = False
    keys = set(zip(ours["country"], ours["quarter"]))
    off_keys = set(zip(off["country"], off["quarter"]))
    if counterfactual is None:
        lookup = {(c, q): g for c, q, g in zip(off["country"], off["quarter"], off["growth_pct"])}
        cf_rows = [(c, q, lookup.get((c, _previous_year(q)), np.nan)) for c, q in sorted(keys)]
        cf = pd.DataFrame(cf_rows, columns=["country", "quarter", "growth_pct"])
        missing_cf = sorted((c, _previous_year(q)) for c, q, g in cf_rows if np.isnan(g))
    else:
        cf = counterfactual[["country", "quarter", "growth_pct"]]
        missing_cf = sorted(keys - set(zip(cf["country"], cf["quarter"])))
    missing = sorted(keys - off_keys)
    if missing or missing_cf:
        raise ValidationError(f"missing official rows {missing}; missing counterfactual rows {missing_cf}")
    table = ours.merge(off[["country", "quarter", "growth_pct", "provisional"]], on=["country", "quarter"])
    table = table.merge(
        cf.rename(columns={"growth_pct": "counterfactual_pct"}), on=["country", "quarter"]
    )
    table["official_impact_pct"] = table["growth_pct"] - table["counterfactual_pct"]
    table = table.sort_values(["country", "quarter"]).reset_index(drop=True)
    final = table[~table["provisional"]]
    return (
        table,
        _corr(final["gdp_pct"].to_numpy(), final["official_impact_pct"].to_numpy()),
        _corr(table["gdp_pct"].to_numpy(), table["official_impact_pct"].to_numpy()),
    )
