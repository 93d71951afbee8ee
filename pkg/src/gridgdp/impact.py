"""Week-of-year fixed effects model with shock-year interactions.

The prefiltered series is regressed on an intercept, week-of-year dummies
and week dummies interacted with the shock year. Errors follow an ARMA
process fitted by exact maximum likelihood (``ml_arma``) or are left to a
Newey-West correction of OLS (``ols_hac``). Impacts compare predictions with
and without the interaction effects.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import arma
from .errors import CovariancePathologyError, ValidationError
from .ols import default_bandwidth, newey_west_cov, ols

logger = logging.getLogger(__name__)

ESTIMATORS = ("ml_arma", "ols_hac")
MAX_REJECT_FRACTION = 0.20


def week_keys(dates):
    """ISO (year, week) for each date, with week 53 folded into 52."""
    iso = pd.DatetimeIndex(dates).isocalendar()
    weeks = np.minimum(iso["week"].to_numpy(dtype=int), 52)
    return iso["year"].to_numpy(dtype=int), weeks


def week_label(year, week):
    return f"{int(year)}-W{int(week):02d}"


@dataclass
class ImpactModel:
    """Fitted impact model.

    ``params`` holds ``[regression coefficients..., phi..., theta..., sigma2]``
    in the order of ``names``; ``param_cov`` is its joint covariance.
    """

    names: list
    params: np.ndarray
    param_cov: np.ndarray
    shock_year: int
    estimator: str
    order: tuple
    sigma2: float
    smear_var: float
    loglik: float | None
    nobs: int
    residuals: np.ndarray = field(repr=False, default=None)
    dropped: list = field(default_factory=list)
    bandwidth: int | None = None
    baseline_week: int = 1
    notes: list = field(default_factory=list)
    cov_type: str = "observed_information"

    @property
    def n_regressors(self):
        return len(self.names) - sum(self.order) - 1

    def _get(self, name):
        return float(self.params[self.names.index(name)])

    @property
    def beta0(self):
        return self._get("const")

    @property
    def gamma(self):
        return {int(n[5:]): float(v) for n, v in zip(self.names, self.params) if n.startswith("week_")}

    @property
    def gamma_star(self):
        return {int(n[6:]): float(v) for n, v in zip(self.names, self.params) if n.startswith("shock_")}

    @property
    def phi(self):
        p = self.order[0]
        k = self.n_regressors
        return np.asarray(self.params[k : k + p], dtype=float)

    @property
    def theta(self):
        p, q = self.order
        k = self.n_regressors
        return np.asarray(self.params[k + p : k + p + q], dtype=float)

    @property
    def std_errors(self):
        return np.sqrt(np.clip(np.diag(self.param_cov), 0.0, None))

    def gamma_star_se(self):
        se = self.std_errors
        return {int(n[6:]): float(se[i]) for i, n in enumerate(self.names) if n.startswith("shock_")}

    def to_dict(self):
        return {
            "names": list(self.names),
            "params": [float(v) for v in self.params],
            "param_cov": [[float(v) for v in row] for row in self.param_cov],
            "shock_year": self.shock_year,
            "estimator": self.estimator,
            "order": list(self.order),
            "sigma2": self.sigma2,
            "smear_var": self.smear_var,
            "loglik": self.loglik,
            "nobs": self.nobs,
            "dropped": list(self.dropped),
            "bandwidth": self.bandwidth,
            "baseline_week": self.baseline_week,
            "cov_type": self.cov_type,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            names=list(d["names"]),
            params=np.asarray(d["params"], dtype=float),
            param_cov=np.asarray(d["param_cov"], dtype=float),
            shock_year=int(d["shock_year"]),
            estimator=d["estimator"],
            order=tuple(d["order"]),
            sigma2=d["sigma2"],
            smear_var=d["smear_var"],
            loglik=d["loglik"],
            nobs=d["nobs"],
            dropped=list(d.get("dropped", [])),
            bandwidth=d.get("bandwidth"),
            baseline_week=int(d.get("baseline_week", 1)),
            cov_type=d.get("cov_type", "observed_information"),
        )


def design_matrix(dates, shock_year):
    """Intercept, week dummies (lowest observed week is the baseline) and shock-year week dummies."""
    years, weeks = week_keys(dates)
    present = sorted(set(weeks))
    hist = set(weeks[years != shock_year])
    shock_weeks = sorted(set(weeks[years == shock_year]))
    orphan = [w for w in shock_weeks if w not in hist]
    if orphan:
        raise ValidationError(f"shock-year weeks {orphan} have no historical counterpart")
    if len(set(years)) < 2:
        raise ValidationError("impact model needs at least two distinct years")
    cols = {"const": np.ones(len(weeks))}
    for w in present[1:]:
        cols[f"week_{w:02d}"] = (weeks == w).astype(float)
    in_shock = years == shock_year
    for w in shock_weeks:
        cols[f"shock_{w:02d}"] = ((weeks == w) & in_shock).astype(float)
    names = list(cols)
    return names, np.column_stack([cols[n] for n in names])


def select_arma_order(residual_series, max_p=5, max_q=2):
    """AIC-selected ARMA order for a residual series."""
    return arma.select_order(np.asarray(residual_series, dtype=float), max_p, max_q)


def fit_impact_model(adjusted, order=(1, 0), estimator="ml_arma", shock_year=2020, bandwidth=None):
    """Fit the week fixed effects model to the prefiltered series ``adjusted``.

    ``adjusted`` is a Series indexed by date. ``order`` is the ARMA ``(p, q)``
    used by ``ml_arma``; ``ols_hac`` ignores it.
    """
    if estimator not in ESTIMATORS:
        raise ValidationError(f"unknown estimator {estimator!r}")
    adjusted = adjusted.dropna().sort_index()
    y = adjusted.to_numpy(dtype=float)
    names, X = design_matrix(adjusted.index, shock_year)
    base = ols(y, X, names)
    if base.dropped:
        logger.info("impact design dropped %s", base.dropped)
    names, X = base.names, base.X
    baseline = int(min(week_keys(adjusted.index)[1]))

    if estimator == "ols_hac":
        L = default_bandwidth(len(y)) if bandwidth is None else int(bandwidth)
        k = len(names)
        cov = np.zeros((k + 1, k + 1))
        if base.ssr > 1e-24 * max(1.0, float(y @ y)):
            cov[:k, :k] = newey_west_cov(X, base.resid, L)
        s2 = base.sigma2
        return ImpactModel(
            names=names + ["sigma2"],
            params=np.concatenate([base.coef, [s2]]),
            param_cov=cov,
            shock_year=shock_year,
            estimator=estimator,
            order=(0, 0),
            sigma2=s2,
            smear_var=s2,
            loglik=None,
            nobs=len(y),
            residuals=base.resid,
            dropped=base.dropped,
            bandwidth=L,
            baseline_week=baseline,
        )

    p, q = (int(v) for v in order)
    res = arma.fit_arma_regression(y, X, p, q)
    full_names = names + [f"ar{i + 1}" for i in range(p)] + [f"ma{j + 1}" for j in range(q)] + ["sigma2"]
    params = np.concatenate([res.beta, res.phi, res.theta, [res.sigma2]])
    smear = arma.unconditional_variance(res.phi, res.theta, res.sigma2) if res.sigma2 > 0 else 0.0
    model = ImpactModel(
        names=full_names,
        params=params,
        param_cov=res.cov,
        shock_year=shock_year,
        estimator=estimator,
        order=(p, q),
        sigma2=res.sigma2,
        smear_var=smear,
        loglik=res.loglik,
        nobs=len(y),
        residuals=res.residuals,
        dropped=base.dropped,
        baseline_week=baseline,
        notes=list(res.notes),
    )
    return model


def prediction_rows(model, dates, with_shock=True):
    """Rows of the regression design for ``dates``, aligned with ``model.params``."""
    years, weeks = week_keys(dates)
    gamma, gamma_star = model.gamma, model.gamma_star
    baseline = model.baseline_week
    D = np.zeros((len(weeks), len(model.params)))
    index = {n: i for i, n in enumerate(model.names)}
    D[:, index["const"]] = 1.0
    for r, (yr, w) in enumerate(zip(years, weeks)):
        if w in gamma:
            D[r, index[f"week_{w:02d}"]] = 1.0
        elif w != baseline:
            raise ValidationError(f"week {w} has no fitted effect")
        if yr == model.shock_year:
            if w not in gamma_star:
                raise ValidationError(f"shock-year week {w} has no fitted interaction effect")
            if with_shock:
                D[r, index[f"shock_{w:02d}"]] = 1.0
    return D


def _levels(D, params, smear_var, offset):
    return np.exp(D @ params + offset + 0.5 * smear_var)


def predict_factual(model, dates, offset=0.0):
    """Level prediction ``exp(deterministic part + offset + s^2/2)``.

    ``offset`` adds a log-scale component (e.g. the prefilter fit) so the
    output is on the original load scale; zero gives the prefiltered scale.
    """
    D = prediction_rows(model, dates, with_shock=True)
    return pd.Series(_levels(D, model.params, model.smear_var, offset), index=pd.DatetimeIndex(dates), name="factual")


def predict_counterfactual(model, dates, offset=0.0):
    """As :func:`predict_factual` with every shock-year interaction set to zero."""
    D = prediction_rows(model, dates, with_shock=False)
    return pd.Series(_levels(D, model.params, model.smear_var, offset), index=pd.DatetimeIndex(dates), name="counterfactual")


def compute_impact(factual, counterfactual):
    """Percentage impact ``100 (Y - Y*) / Y*``."""
    f = np.asarray(factual, dtype=float)
    c = np.asarray(counterfactual, dtype=float)
    if f.shape != c.shape:
        raise ValidationError("factual and counterfactual are not aligned")
    if np.any(c <= 0):
        raise ValidationError("counterfactual prediction must be positive")
    out = 100.0 * (f - c) / c
    if isinstance(factual, pd.Series):
        return pd.Series(out, index=factual.index, name="impact_pct")
    return out


@dataclass
class ImpactSeries:
    daily: pd.DataFrame  # date index: impact_pct, lo95, hi95
    weekly: pd.DataFrame  # week label index: impact_pct, lo95, hi95
    factual: pd.Series
    counterfactual: pd.Series
    draws: np.ndarray = field(repr=False)  # (n_draws, n_dates) daily impact per draw
    n_draws: int = 0
    n_rejected: int = 0
    seed: int | None = None


def impact_table_text(frame, metadata, float_format="%.10g"):
    """Delimited text for an impact table with a ``# key: value`` metadata header."""
    head = "".join(f"# {k}: {v}\n" for k, v in metadata.items())
    return head + frame.to_csv(lineterminator="\n", float_format=float_format)


def read_impact_table(path):
    """Inverse of :func:`impact_table_text`; returns ``(frame, metadata)``."""
    metadata = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition(":")
            metadata[key.strip()] = value.strip()
    frame = pd.read_csv(path, comment="#", index_col=0)
    if frame.index.name == "date":
        frame.index = pd.DatetimeIndex(frame.index)
    return frame, metadata


def _draw_parameters(model, n_draws, seed):
    """Multivariate normal draws with per-draw substreams and admissibility rejection."""
    mean = np.asarray(model.params, dtype=float)
    cov = 0.5 * (model.param_cov + model.param_cov.T)
    evals, evecs = np.linalg.eigh(cov)
    if evals.min(initial=0.0) < -1e-8 * max(1.0, evals.max(initial=0.0)):
        raise CovariancePathologyError("parameter covariance is not positive semidefinite")
    L = evecs * np.sqrt(np.clip(evals, 0.0, None))
    d = len(mean)
    k = model.n_regressors
    p, q = model.order
    gens = [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n_draws)]
    draws = np.empty((n_draws, d))
    pending = np.arange(n_draws)
    rejected = 0
    cap = int(np.floor(MAX_REJECT_FRACTION * n_draws))
    while len(pending):
        z = np.stack([gens[i].standard_normal(d) for i in pending])
        cand = mean + z @ L.T
        ok = np.ones(len(pending), dtype=bool)
        if p:
            ok &= arma.is_stationary(cand[:, k : k + p])
        if q:
            ok &= arma.is_invertible(cand[:, k + p : k + p + q])
        if model.estimator == "ml_arma" and model.sigma2 > 0:
            ok &= cand[:, -1] > 0
        draws[pending[ok]] = cand[ok]
        rejected += int((~ok).sum())
        if rejected > cap:
            raise CovariancePathologyError(
                f"{rejected} of {n_draws} draws fell outside the stationary/invertible region"
            )
        pending = pending[~ok]
    return draws, rejected


def _smear_draws(model, draws):
    if model.estimator != "ml_arma" or model.sigma2 <= 0:
        return np.full(len(draws), model.smear_var)
    k = model.n_regressors
    p, q = model.order
    if p + q == 0:
        return draws[:, -1].copy()
    return np.array(
        [arma.unconditional_variance(row[k : k + p], row[k + p : k + p + q], row[-1]) for row in draws]
    )


def weekly_mean(dates, values):
    """Average columns of ``values`` (…, n_dates) within ISO weeks; returns labels and means."""
    years, weeks = week_keys(dates)
    labels = [week_label(y, w) for y, w in zip(years, weeks)]
    uniq = sorted(set(labels))
    values = np.asarray(values, dtype=float)
    out = np.stack([values[..., [l == u for l in labels]].mean(axis=-1) for u in uniq], axis=-1)
    return uniq, out


def monte_carlo_ci(model, dates, n_draws=5000, seed=0, offset=0.0):
    """Plug-in impacts with percentile intervals from parameter draws.

    Every draw uses its own random substream spawned from ``seed``, so the
    result does not depend on evaluation order.
    """
    dates = pd.DatetimeIndex(dates)
    offset = np.broadcast_to(np.asarray(offset, dtype=float), (len(dates),))
    Df = prediction_rows(model, dates, True)
    Dc = prediction_rows(model, dates, False)
    factual = pd.Series(_levels(Df, model.params, model.smear_var, offset), index=dates, name="factual")
    counter = pd.Series(_levels(Dc, model.params, model.smear_var, offset), index=dates, name="counterfactual")
    point = compute_impact(factual.to_numpy(), counter.to_numpy())

    draws, rejected = _draw_parameters(model, n_draws, seed)
    smear = _smear_draws(model, draws)
    lf = draws @ Df.T + offset + 0.5 * smear[:, None]
    lc = draws @ Dc.T + offset + 0.5 * smear[:, None]
    daily_draws = compute_impact(np.exp(lf), np.exp(lc))

    lo, hi = np.percentile(daily_draws, [2.5, 97.5], axis=0)
    daily = pd.DataFrame({"impact_pct": point, "lo95": lo, "hi95": hi}, index=dates)
    daily.index.name = "date"
    labels, wk_draws = weekly_mean(dates, daily_draws)
    _, wk_point = weekly_mean(dates, point)
    wlo, whi = np.percentile(wk_draws, [2.5, 97.5], axis=0)
    weekly = pd.DataFrame(
        {"impact_pct": wk_point, "lo95": wlo, "hi95": whi},
        index=pd.Index(labels, name="week"),
    )
    return ImpactSeries(
        daily=daily,
        weekly=weekly,
        factual=factual,
        counterfactual=counter,
        draws=daily_draws,
        n_draws=n_draws,
        n_rejected=rejected,
        seed=seed,
    )
