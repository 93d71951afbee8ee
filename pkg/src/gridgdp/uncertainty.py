"""Covariance of impact-model coefficients that accounts for prefiltering.

The fixed-effects coefficients are a linear function of the raw log load:
the short-run regression, the year-level subtraction and the final
regression are each linear projections. Writing the whole chain as
``beta_hat = A y`` gives ``Var(beta_hat) = A Sigma A'``, with ``Sigma`` the
error covariance implied by the fitted ARMA process (``ml_arma``) or a
Bartlett-weighted estimate from the residuals (``ols_hac``). The
breakpoint ``k`` and the ARMA coefficients are held at their estimates.

The inverse observed information of the final regression alone treats the
prefiltered series as data. It misses the error in the estimated year
levels, which moves every shock-year effect together, and it uses the ML
variance, which is biased down by the number of fitted coefficients.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
from scipy import linalg

from . import arma
from .impact import design_matrix
from .ols import default_bandwidth
from .prefilter import window_mask


def arma_autocovariance(phi, theta, sigma2, nlags):
    """Autocovariances at lags ``0..nlags-1`` of an ARMA process."""
    T, P0 = arma.state_space(np.asarray(phi, float), np.asarray(theta, float))
    m = P0[:, 0].copy()
    out = np.empty(nlags)
    for h in range(nlags):
        out[h] = m[0]
        m = T @ m
    return sigma2 * out


def composite_map(series, short_run, effects, model, adjusted_index):
    """Rows of the linear map from raw log load to the impact-model coefficients.

    Returns ``(A, X, n_fitted)``: ``A`` is (k, n) with rows ordered like the
    regression part of ``model.names``; ``n_fitted`` counts every
    coefficient estimated from the same observations.
    """
    idx = pd.DatetimeIndex(adjusted_index)
    names = model.names[: model.n_regressors]
    full_names, Xfull = design_matrix(idx, model.shock_year)
    X = Xfull[:, [full_names.index(n) for n in names]]
    n = len(idx)

    # final regression
    if model.estimator == "ml_arma":
        acov = arma_autocovariance(model.phi, model.theta, 1.0, n)
        c = linalg.cho_factor(linalg.toeplitz(acov), lower=True, check_finite=False)
        SiX = linalg.cho_solve(c, X, check_finite=False)
        G = linalg.solve(X.T @ SiX, SiX.T, assume_a="pos")
    else:
        G = linalg.solve(X.T @ X, X.T, assume_a="pos")

    # year levels: alpha_i = window mean of year i minus window mean of the base year
    years = idx.year.to_numpy()
    win = window_mask(idx, effects.window_end, effects.days)
    base = win & (years == effects.base_year)
    hist = [y for y in sorted(effects.alpha) if y != effects.base_year]
    H = np.array([(win & (years == y)) / (win & (years == y)).sum() - base / base.sum() for y in hist])
    D = np.column_stack([(years == y).astype(float) for y in hist]) if hist else np.zeros((n, 0))
    GM = G - (G @ D) @ H if hist else G

    # short-run regression on the pre-shock rows
    rows = series.loc[idx]
    _, X1 = short_run.design(rows)
    lo, hi = pd.Timestamp(short_run.fit_window[0]), pd.Timestamp(short_run.fit_window[1])
    pre = np.asarray((idx >= lo) & (idx <= hi))
    X1p = X1[pre]
    B = np.zeros((X1.shape[1], n))
    B[:, pre] = linalg.solve(X1p.T @ X1p, X1p.T, assume_a="pos")
    A = GM - (GM @ X1) @ B
    n_fitted = X.shape[1] + X1.shape[1] + len(hist)
    return A, X, n_fitted


def two_step_covariance(series, short_run, effects, model, adjusted, dof_correction=True):
    """Covariance of the regression coefficients of ``model`` through the whole prefilter chain.

    ``adjusted`` is the series the model was fitted on (its index fixes
    the row order). With ``dof_correction`` the result is scaled by
    ``n / (n - n_fitted)``.
    """
    adjusted = adjusted.dropna().sort_index()
    A, X, n_fitted = composite_map(series, short_run, effects, model, adjusted.index)
    n = A.shape[1]
    if model.estimator == "ml_arma":
        if model.sigma2 <= 0:
            return np.zeros((A.shape[0], A.shape[0]))
        acov = arma_autocovariance(model.phi, model.theta, model.sigma2, n)
        V = A @ linalg.toeplitz(acov) @ A.T
    else:
        y = adjusted.to_numpy(dtype=float)
        beta = model.params[: model.n_regressors]
        u = y - X @ beta
        L = model.bandwidth if model.bandwidth is not None else default_bandwidth(n)
        g = A * u[None, :]
        V = g @ g.T
        for lag in range(1, min(L, n - 1) + 1):
            Gl = g[:, lag:] @ g[:, :-lag].T
            V += (1.0 - lag / (L + 1.0)) * (Gl + Gl.T)
    if dof_correction and n > n_fitted:
        V *= n / (n - n_fitted)
    return 0.5 * (V + V.T)


def apply_two_step(model, series, short_run, effects, adjusted, dof_correction=True):
    """Replace the regression block of ``model.param_cov`` in place.

    Cross-covariances between regression and ARMA/variance parameters are
    set to zero (they vanish asymptotically), keeping the matrix PSD.
    """
    k = model.n_regressors
    V = two_step_covariance(series, short_run, effects, model, adjusted, dof_correction)
    cov = np.array(model.param_cov, dtype=float)
    cov[:k, :] = 0.0
    cov[:, :k] = 0.0
    cov[:k, :k] = V
    model.param_cov = cov
    model.cov_type = "two_step"
    return model
