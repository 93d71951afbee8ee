"""Residual and goodness-of-fit diagnostics, and the two in-time placebo tests."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from .errors import InsufficientDataError, ValidationError
from .impact import prediction_rows, week_keys

ALPHAS = (0.05, 0.10)
PRE_OUTBREAK_WEEKS = tuple(range(1, 9))


def ljung_box(residuals, lag=10, fitted_params=0):
    """Ljung-Box portmanteau statistic and p-value.

    Autocorrelations are computed on demeaned residuals. Degrees of freedom
    are ``lag - fitted_params``, floored at 1.

    Returns
    -------
    (float, float)
        Statistic ``Q`` and its chi-square p-value.
    """
    e = np.asarray(residuals, dtype=float)
    n = len(e)
    if n <= lag + fitted_params:
        raise InsufficientDataError(f"{n} residuals are too few for lag {lag} with {fitted_params} fitted parameters")
    e = e - e.mean()
    denom = e @ e
    if not denom > 0:
        raise ValidationError("residuals have zero variance; autocorrelations are undefined")
    h = np.arange(1, lag + 1)
    rho = np.array([e[k:] @ e[:-k] for k in h]) / denom
    q = float(n * (n + 2) * np.sum(rho**2 / (n - h)))
    df = max(lag - fitted_params, 1)
    return q, float(stats.chi2.sf(q, df))


def _r2(y, fit):
    y = np.asarray(y, dtype=float)
    fit = np.asarray(fit, dtype=float)
    if y.shape != fit.shape:
        raise ValidationError("series and prediction are not aligned")
    sst = float(np.sum((y - y.mean()) ** 2))
    if not sst > 0:
        raise ValidationError("dependent series has zero variance")
    r2 = 1.0 - float(np.sum((y - fit) ** 2)) / sst
    return min(max(r2, 0.0), 1.0)


def fit_r2(adjusted, model):
    """R-squared of the deterministic week effects against the prefiltered series."""
    adjusted = adjusted.dropna().sort_index()
    D = prediction_rows(model, adjusted.index, with_shock=True)
    return _r2(adjusted.to_numpy(), D @ model.params)


def total_r2(raw_log_load, prediction):
    """R-squared of the combined deterministic prediction against raw log load."""
    if isinstance(raw_log_load, pd.Series) and isinstance(prediction, pd.Series):
        if not raw_log_load.index.equals(prediction.index):
            raise ValidationError("series and prediction are not aligned")
    return _r2(raw_log_load, prediction)


@dataclass
class PlaceboResult:
    """Significance tests of shock-year effects where none should exist."""

    weeks: list
    z: dict  # week -> z statistic
    p_value: dict
    failures: dict  # alpha -> weeks rejected
    expected: dict  # alpha -> expected number of type-I errors

    @property
    def n_tests(self):
        return len(self.weeks)

    def counts(self):
        return {a: len(w) for a, w in self.failures.items()}

    def to_dict(self):
        return {
            "weeks": list(self.weeks),
            "z": {str(w): v for w, v in self.z.items()},
            "p_value": {str(w): v for w, v in self.p_value.items()},
            "failures": {str(a): list(w) for a, w in self.failures.items()},
            "expected": {str(a): v for a, v in self.expected.items()},
        }


def _wald(model, weeks, alphas):
    gs = model.gamma_star
    se = model.gamma_star_se()
    missing = [w for w in weeks if w not in gs]
    if missing:
        raise ValidationError(f"model has no shock-year effects for weeks {missing}")
    z, p = {}, {}
    for w in weeks:
        if se[w] > 0:
            z[w] = gs[w] / se[w]
        else:
            z[w] = 0.0 if gs[w] == 0 else np.copysign(np.inf, gs[w])
        p[w] = float(2.0 * stats.norm.sf(abs(z[w])))
    failures = {a: [w for w in weeks if p[w] < a] for a in alphas}
    expected = {a: len(weeks) * a for a in alphas}
    return PlaceboResult(list(weeks), z, p, failures, expected)


def placebo_pre_outbreak(model, alphas=ALPHAS, weeks=PRE_OUTBREAK_WEEKS):
    """Two-sided Wald tests that the shock-year effects of pre-outbreak weeks are zero."""
    return _wald(model, list(weeks), alphas)


def drop_from_year(series, year):
    """Rows strictly before ``year``, by both calendar and ISO year."""
    idx = pd.DatetimeIndex(series.index)
    iso_year, _ = week_keys(idx)
    return series[(idx.year < year) & (iso_year < year)]


def placebo_shift_year(series, shock_date, pseudo_year=None, alphas=ALPHAS, **fit_options):
    """Rerun the whole estimation as if the shock happened a year earlier.

    Every row from the true shock year on is discarded before any fitting.
    The pseudo shock date keeps the month and day of ``shock_date``. Extra
    keyword arguments go to :func:`gridgdp.estimation.estimate`.

    Returns
    -------
    (PlaceboResult, Estimate)
    """
    from .estimation import estimate

    shock_date = pd.Timestamp(shock_date).date()
    if pseudo_year is None:
        pseudo_year = shock_date.year - 1
    if pseudo_year >= shock_date.year:
        raise ValidationError("pseudo shock year must precede the true shock year")
    try:
        pseudo_date = shock_date.replace(year=pseudo_year)
    except ValueError:
        pseudo_date = dt.date(pseudo_year, shock_date.month, 28)
    kept = drop_from_year(series, shock_date.year)
    years = sorted(set(pd.DatetimeIndex(kept.index).year))
    if pseudo_year not in years or len([y for y in years if y < pseudo_year]) < 2:
        raise InsufficientDataError("placebo needs the pseudo year and at least two earlier years")
    est = estimate(kept, shock_date=pseudo_date, **fit_options)
    weeks = sorted(est.model.gamma_star)
    return _wald(est.model, weeks, alphas), est


@dataclass
class DiagnosticsReport:
    country: str
    ar: int
    ma: int
    ljung_box_stat: float
    ljung_box_p: float
    apf_r2: float
    total_r2: float
    placebo1: PlaceboResult | None = None
    placebo2: PlaceboResult | None = None
    notes: list = field(default_factory=list)

    HEADER = ("country", "AR", "MA", "Ljung-Box [p]", "APF-R2", "T-R2", "P1 5%", "P1 10%", "P2 5%", "P2 10%")

    def row(self):
        def count(res, a):
            return "" if res is None else str(len(res.failures.get(a, [])))

        return (
            self.country,
            str(self.ar),
            str(self.ma),
            f"{self.ljung_box_stat:.2f} [{self.ljung_box_p:.2f}]",
            f"{self.apf_r2:.2f}",
            f"{self.total_r2:.2f}",
            count(self.placebo1, 0.05),
            count(self.placebo1, 0.10),
            count(self.placebo2, 0.05),
            count(self.placebo2, 0.10),
        )

    def to_dict(self):
        return {
            "country": self.country,
            "ar": self.ar,
            "ma": self.ma,
            "ljung_box_stat": self.ljung_box_stat,
            "ljung_box_p": self.ljung_box_p,
            "apf_r2": self.apf_r2,
            "total_r2": self.total_r2,
            "placebo1": None if self.placebo1 is None else self.placebo1.to_dict(),
            "placebo2": None if self.placebo2 is None else self.placebo2.to_dict(),
            "notes": list(self.notes),
        }


def format_table(reports, expected=True):
    """Tab-separated table with one row per country and an expected type-I row."""
    lines = ["\t".join(DiagnosticsReport.HEADER)]
    lines += ["\t".join(r.row()) for r in reports]
    if expected and reports:
        p1 = next((r.placebo1 for r in reports if r.placebo1 is not None), None)
        p2 = next((r.placebo2 for r in reports if r.placebo2 is not None), None)
        cells = ["expected type I", "", "", "", "", ""]
        for res in (p1, p2):
            cells += ["", ""] if res is None else [f"{res.expected[a]:.1f}" for a in ALPHAS]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def diagnose(estimate, country="", lag=10, placebo2=True, alphas=ALPHAS, **fit_options):
    """Full diagnostics for an :class:`~gridgdp.estimation.Estimate`."""
    model = estimate.model
    p, q = model.order
    notes = []
    q_stat, q_p = ljung_box(model.residuals, lag, p + q)
    apf = fit_r2(estimate.adjusted, model)
    raw = estimate.series.loc[estimate.adjusted.index, "log_load"]
    tr2 = total_r2(raw, estimate.deterministic_fit())
    pre = [w for w in PRE_OUTBREAK_WEEKS if w in model.gamma_star]
    p1 = placebo_pre_outbreak(model, alphas, pre) if pre else None
    if p1 is not None and len(pre) < len(PRE_OUTBREAK_WEEKS):
        notes.append(f"placebo 1 uses weeks {pre}")
    p2 = None
    if placebo2:
        options = {"estimator": model.estimator, "order": model.order if model.estimator == "ml_arma" else None}
        options.update(fit_options)
        try:
            p2, _ = placebo_shift_year(estimate.series, estimate.shock_date, alphas=alphas, **options)
        except (InsufficientDataError, ValidationError) as exc:
            notes.append(f"placebo 2 skipped: {exc}")
    return DiagnosticsReport(country, p, q, q_stat, q_p, apf, tr2, p1, p2, notes)
