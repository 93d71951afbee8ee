"""Regression with ARMA errors by exact Gaussian maximum likelihood.

The likelihood is evaluated with a state-space innovations filter (see
:mod:`gridgdp.kalman`). Regression coefficients and the innovation variance
are concentrated out, so the optimizer only searches over the ARMA
coefficients, which are kept stationary and invertible through a
partial-autocorrelation reparameterization.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize, signal

from .errors import ConvergenceError, InsufficientDataError, StationarityError
from .kalman import arma_whiten

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)


# ---------------------------------------------------------------------------
# Polynomial helpers


def pacf_to_coefs(pacf):
    """Map partial autocorrelations in (-1, 1) to stationary AR coefficients."""
    pacf = np.asarray(pacf, dtype=float)
    a = np.zeros(0)
    for k, rk in enumerate(pacf):
        nxt = np.empty(k + 1)
        nxt[:k] = a - rk * a[::-1]
        nxt[k] = rk
        a = nxt
    return a


def coefs_to_pacf(coefs):
    """Inverse of :func:`pacf_to_coefs`; requires a stationary polynomial."""
    a = np.asarray(coefs, dtype=float).copy()
    p = len(a)
    pacf = np.zeros(p)
    for k in range(p - 1, -1, -1):
        rk = a[k]
        pacf[k] = rk
        if k > 0:
            if abs(rk) >= 1.0:
                raise StationarityError("coefficients are not stationary")
            a = (a[:k] + rk * a[:k][::-1]) / (1.0 - rk * rk)
    return pacf


# objective is scaled by 1/n; 1e-4 there is ~0.1 log-lik units per unit step
GRAD_TOL = 1e-4
MAX_POLISH = 3
# order selection ignores fits with a root this close to the unit circle
BOUNDARY_MODULUS = 0.98


def max_root_modulus(phi, theta):
    """Largest inverse-root modulus over the AR and MA polynomials (0 for white noise)."""
    mods = [m for c in (np.asarray(phi, float), -np.asarray(theta, float)) if len(c) for m in _companion_moduli(c)[0]]
    return float(max(mods, default=0.0))


def _companion_moduli(coefs):
    coefs = np.atleast_2d(np.asarray(coefs, dtype=float))
    n, p = coefs.shape
    if p == 0:
        return np.zeros((n, 0))
    C = np.zeros((n, p, p))
    C[:, 0, :] = coefs
    if p > 1:
        idx = np.arange(p - 1)
        C[:, idx + 1, idx] = 1.0
    return np.abs(np.linalg.eigvals(C))


def is_stationary(phi):
    """True when all roots of ``1 - phi_1 z - ... - phi_p z^p`` lie outside the unit circle.

    Accepts a single coefficient vector or a 2-D batch (one row per draw).
    """
    phi = np.asarray(phi, dtype=float)
    mod = _companion_moduli(phi)
    ok = np.all(mod < 1.0, axis=1) if mod.shape[1] else np.ones(mod.shape[0], bool)
    return bool(ok[0]) if phi.ndim == 1 else ok


def is_invertible(theta):
    """True when all roots of ``1 + theta_1 z + ... + theta_q z^q`` lie outside the unit circle."""
    theta = np.asarray(theta, dtype=float)
    return is_stationary(-theta)


def state_space(phi, theta):
    """Transition matrix and unconditional state covariance (unit innovation variance)."""
    p, q = len(phi), len(theta)
    r = max(p, q + 1)
    T = np.zeros((r, r))
    T[:p, 0] = phi
    T[np.arange(r - 1), np.arange(1, r)] = 1.0
    R = np.zeros(r)
    R[0] = 1.0
    R[1 : q + 1] = theta
    with warnings.catch_warnings():
        # Near-unit-root trial points from the optimizer; such fits are rejected by order selection.
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        P0 = linalg.solve_discrete_lyapunov(T, np.outer(R, R))
    return T, 0.5 * (P0 + P0.T)


def unconditional_variance(phi, theta, sigma2):
    """Marginal variance of an ARMA(p, q) process with innovation variance ``sigma2``."""
    _, P0 = state_space(np.asarray(phi, float), np.asarray(theta, float))
    return float(sigma2 * P0[0, 0])


def whiten(phi, theta, Z):
    """Standardized innovations of every column of ``Z`` and the innovation variances."""
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    _, P0 = state_space(phi, theta)
    return arma_whiten(phi, theta, P0, np.ascontiguousarray(Z, dtype=float))


# ---------------------------------------------------------------------------
# Likelihood


def _gls(yw, Xw):
    if Xw.shape[1] == 0:
        return np.zeros(0), yw
    beta = linalg.lstsq(Xw, yw, lapack_driver="gelsy", check_finite=False)[0]
    return beta, yw - Xw @ beta


def concentrated_loglik(phi, theta, y, X):
    """Exact log-likelihood with beta and sigma^2 at their GLS/ML values.

    Returns ``(loglik, beta, sigma2)``.
    """
    Z = np.column_stack([y, X])
    W, F = whiten(phi, theta, Z)
    if np.any(F <= 0) or not np.all(np.isfinite(W)):
        return -np.inf, None, np.nan
    beta, resid = _gls(W[:, 0], W[:, 1:])
    n = len(y)
    sigma2 = float(resid @ resid) / n
    if sigma2 <= 0:
        return np.inf, beta, 0.0
    ll = -0.5 * n * (LOG_2PI + np.log(sigma2) + 1.0) - 0.5 * np.sum(np.log(F))
    return float(ll), beta, sigma2


def full_loglik(beta, phi, theta, sigma2, y, X):
    """Exact Gaussian log-likelihood at an arbitrary parameter point."""
    if sigma2 <= 0:
        return -np.inf
    W, F = whiten(phi, theta, np.column_stack([y, X]))
    resid = W[:, 0] - W[:, 1:] @ beta
    n = len(y)
    return float(
        -0.5 * n * (LOG_2PI + np.log(sigma2))
        - 0.5 * np.sum(np.log(F))
        - 0.5 * (resid @ resid) / sigma2
    )


# ---------------------------------------------------------------------------
# Estimation


@dataclass
class ArmaRegressionResult:
    """Fitted regression-with-ARMA-errors model.

    ``cov`` is ordered as ``[beta..., phi..., theta..., sigma2]``.
    """

    beta: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    sigma2: float
    loglik: float
    cov: np.ndarray
    residuals: np.ndarray  # standardized innovations
    nobs: int
    converged: bool = True
    grad_norm: float = 0.0
    n_starts: int = 1
    notes: list = field(default_factory=list)

    @property
    def order(self):
        return len(self.phi), len(self.theta)

    @property
    def aic(self):
        k = len(self.beta) + len(self.phi) + len(self.theta) + 1
        return -2.0 * self.loglik + 2.0 * k


def _unpack(x, p, q):
    return pacf_to_coefs(np.tanh(x[:p])), -pacf_to_coefs(np.tanh(x[p : p + q]))


def _pack(phi, theta, clip=0.97):
    ar = np.clip(coefs_to_pacf(phi), -clip, clip) if len(phi) else np.zeros(0)
    ma = np.clip(coefs_to_pacf(-np.asarray(theta)), -clip, clip) if len(theta) else np.zeros(0)
    return np.arctanh(np.concatenate([ar, ma]))


def css_start(u, p, q):
    """Conditional-sum-of-squares ARMA estimates for the series ``u``."""
    if p + q == 0:
        return np.zeros(0), np.zeros(0)
    u = np.asarray(u, float) - np.mean(u)
    m = max(p, q)

    def css(x):
        phi, theta = _unpack(x, p, q)
        e = signal.lfilter(np.r_[1.0, -phi], np.r_[1.0, theta], u)
        return float(e[m:] @ e[m:]) / len(u)

    res = optimize.minimize(css, np.zeros(p + q), method="BFGS")
    return _unpack(res.x, p, q)


def _num_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fit_arma_regression(y, X, p, q, n_restarts=3, restart_seed=0, compute_cov=True):
    """Maximize the exact likelihood of ``y = X beta + u``, ``u ~ ARMA(p, q)``.

    Parameters
    ----------
    y : ndarray, shape (n,)
    X : ndarray, shape (n, k)
        Regressors; may have zero columns.
    p, q : int
        AR and MA orders.
    n_restarts : int
        Random restarts around the CSS starting point, in addition to it.
    restart_seed : int
        Seed for the restart perturbations (fits are deterministic).

    Raises
    ------
    ConvergenceError
        No start reached a point with a small gradient.
    StationarityError
        The optimum lies on or outside the stationarity/invertibility boundary.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float).reshape(len(y), -1)
    n = len(y)

    beta_ols = _gls(y, X)[0]
    u = y - X @ beta_ols
    if float(u @ u) <= 1e-24 * max(1.0, float(y @ y)):
        return _degenerate(y, X, beta_ols, p, q)

    if p + q == 0:
        ll, beta, sigma2 = concentrated_loglik(np.zeros(0), np.zeros(0), y, X)
        res = _finish(y, X, beta, np.zeros(0), np.zeros(0), sigma2, ll, compute_cov)
        return res

    def objective(x):
        phi, theta = _unpack(x, p, q)
        try:
            ll = concentrated_loglik(phi, theta, y, X)[0]
        except (np.linalg.LinAlgError, ValueError):
            return 1e10
        return -ll / n if np.isfinite(ll) else 1e10

    phi0, theta0 = css_start(u, p, q)
    x0 = _pack(phi0, theta0)
    rng = np.random.default_rng(restart_seed)
    starts = [x0] + [x0 + rng.normal(scale=0.5, size=x0.shape) for _ in range(n_restarts)]

    best = None
    for x_start in starts:
        r = optimize.minimize(objective, x_start, method="BFGS", options={"gtol": 1e-7})
        gnorm = float(np.linalg.norm(_num_grad(objective, r.x)))
        # BFGS often stops on line-search precision loss in flat regions; restart from there
        for _ in range(MAX_POLISH):
            if gnorm <= GRAD_TOL:
                break
            r = optimize.minimize(objective, r.x, method="BFGS", options={"gtol": 1e-7})
            gnorm = float(np.linalg.norm(_num_grad(objective, r.x)))
        if best is None or r.fun < best[0].fun - 1e-12:
            best = (r, gnorm)
    r, gnorm = best
    if gnorm > GRAD_TOL:
        phi, theta = _unpack(r.x, p, q)
        raise ConvergenceError(
            f"ARMA({p},{q}) likelihood did not converge (gradient norm {gnorm:.3g})",
            best=(phi, theta),
            grad_norm=gnorm,
        )
    phi, theta = _unpack(r.x, p, q)
    if not (is_stationary(phi) and is_invertible(theta)):
        raise StationarityError(f"ARMA({p},{q}) optimum is not stationary/invertible")
    ll, beta, sigma2 = concentrated_loglik(phi, theta, y, X)
    res = _finish(y, X, beta, phi, theta, sigma2, ll, compute_cov)
    res.grad_norm = gnorm
    res.n_starts = len(starts)
    return res


def _degenerate(y, X, beta, p, q):
    k = X.shape[1] + p + q + 1
    res = ArmaRegressionResult(
        beta=beta,
        phi=np.zeros(p),
        theta=np.zeros(q),
        sigma2=0.0,
        loglik=np.inf,
        cov=np.zeros((k, k)),
        residuals=np.zeros(len(y)),
        nobs=len(y),
    )
    res.notes.append("zero residual variance: ARMA terms fixed at zero")
    return res


def _finish(y, X, beta, phi, theta, sigma2, ll, compute_cov):
    W, F = whiten(phi, theta, np.column_stack([y, X]))
    resid = W[:, 0] - W[:, 1:] @ beta
    res = ArmaRegressionResult(
        beta=beta,
        phi=phi,
        theta=theta,
        sigma2=sigma2,
        loglik=ll,
        cov=None,
        residuals=resid,
        nobs=len(y),
    )
    if compute_cov:
        res.cov = observed_information_cov(y, X, beta, phi, theta, sigma2, W=W)
    return res


def observed_information_cov(y, X, beta, phi, theta, sigma2, W=None):
    """Inverse of the observed information matrix at the given point.

    The beta block and its cross-derivative with sigma^2 are analytic; the
    beta/ARMA cross block differentiates the analytic beta-score numerically;
    the (ARMA, sigma^2) block is a central-difference Hessian.
    """
    p, q = len(phi), len(theta)
    k = X.shape[1]
    Z = np.column_stack([y, X])
    if W is None:
        W = whiten(phi, theta, Z)[0]
    Xw = W[:, 1:]
    resid = W[:, 0] - Xw @ beta
    m = p + q
    d = k + m + 1
    H = np.zeros((d, d))
    H[:k, :k] = -(Xw.T @ Xw) / sigma2
    H[:k, k + m] = H[k + m, :k] = -(Xw.T @ resid) / sigma2**2

    psi = np.concatenate([phi, theta])

    def split(v):
        return v[:p], v[p:m]

    def beta_score(v):
        ph, th = split(v)
        Wv = whiten(ph, th, Z)[0]
        return Wv[:, 1:].T @ (Wv[:, 0] - Wv[:, 1:] @ beta) / sigma2

    steps = 1e-5 * np.maximum(1.0, np.abs(psi))
    for j in range(m):
        e = np.zeros(m)
        e[j] = steps[j]
        H[:k, k + j] = (beta_score(psi + e) - beta_score(psi - e)) / (2 * steps[j])
        H[k + j, :k] = H[:k, k + j]

    def ll_small(v):
        ph, th = split(v[:m])
        return full_loglik(beta, ph, th, v[m], y, X)

    x = np.concatenate([psi, [sigma2]])
    hs = np.concatenate([1e-4 * np.maximum(1.0, np.abs(psi)), [1e-4 * sigma2]])
    Hs = _num_hessian(ll_small, x, hs)
    H[k:, k:] = Hs

    info = -0.5 * (H + H.T)
    try:
        cov = linalg.inv(info)
    except linalg.LinAlgError:
        cov = linalg.pinv(info)
    return 0.5 * (cov + cov.T)


def _num_hessian(f, x, h):
    d = len(x)
    H = np.zeros((d, d))
    f0 = f(x)
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(d)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4 * h[i] * h[j])
    return H


def select_order(series, max_p=5, max_q=2):
    """AIC-minimizing ARMA order for a (residual) series.

    Ties within 1e-9 go to fewer parameters, then to more AR terms.
    """
    x = np.asarray(series, dtype=float)
    if len(x) <= 10 * (max_p + max_q):
        raise InsufficientDataError(
            f"series of length {len(x)} too short for max order ({max_p}, {max_q})"
        )
    X = np.ones((len(x), 1))
    scores = []
    for p in range(max_p + 1):
        for q in range(max_q + 1):
            try:
                res = fit_arma_regression(x, X, p, q, compute_cov=False)
            except (ConvergenceError, StationarityError) as exc:
                logger.info("ARMA(%d,%d) skipped: %s", p, q, exc)
                continue
            if max_root_modulus(res.phi, res.theta) > BOUNDARY_MODULUS:
                logger.info("ARMA(%d,%d) skipped: root near the unit circle", p, q)
                continue
            scores.append((res.aic, p + q, -p, (p, q)))
    if not scores:
        raise ConvergenceError("no candidate ARMA order converged")
    best_aic = min(s[0] for s in scores)
    tied = [s for s in scores if s[0] - best_aic <= 1e-9]
    return min(tied, key=lambda s: (s[1], s[2]))[3]
