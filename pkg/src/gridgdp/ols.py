"""QR least squares with rank-deficient column dropping, and Newey-West covariance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import ValidationError


@dataclass
class OlsResult:
    names: list
    coef: np.ndarray
    cov: np.ndarray
    resid: np.ndarray
    ssr: float
    nobs: int
    dropped: list = field(default_factory=list)
    X: np.ndarray | None = None  # design with dropped columns removed

    @property
    def se(self):
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def df_resid(self):
        return self.nobs - len(self.names)

    @property
    def sigma2(self):
        return self.ssr / self.df_resid if self.df_resid > 0 else 0.0

    def as_dict(self, values=None):
        values = self.coef if values is None else values
        return dict(zip(self.names, (float(v) for v in values)))


def ols(y, X, names, keep=("const",)):
    """Least squares via QR; columns that are all-zero or linearly dependent are dropped.

    Columns named in ``keep`` are never dropped for being all-zero.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    names = list(names)
    dropped = []
    cols = []
    for j, name in enumerate(names):
        if name not in keep and not np.any(X[:, j] != 0.0):
            dropped.append(name)
        else:
            cols.append(j)
    Xk = X[:, cols]
    if Xk.shape[1]:
        _, R, piv = linalg.qr(Xk, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        tol = max(Xk.shape) * np.finfo(float).eps * (diag[0] if len(diag) else 0.0)
        rank = int(np.sum(diag > tol))
        if rank < Xk.shape[1]:
            bad = sorted(piv[rank:])
            dropped.extend(names[cols[j]] for j in bad)
            cols = [c for i, c in enumerate(cols) if i not in set(bad)]
            Xk = X[:, cols]
    kept = [names[c] for c in cols]
    n = len(y)
    if Xk.shape[1] == 0:
        return OlsResult(kept, np.zeros(0), np.zeros((0, 0)), y.copy(), float(y @ y), n, dropped, Xk)
    Q, R = linalg.qr(Xk, mode="economic")
    coef = linalg.solve_triangular(R, Q.T @ y)
    resid = y - Xk @ coef
    ssr = float(resid @ resid)
    df = n - len(kept)
    s2 = ssr / df if df > 0 else 0.0
    Rinv = linalg.solve_triangular(R, np.eye(R.shape[0]))
    cov = s2 * (Rinv @ Rinv.T)
    return OlsResult(kept, coef, cov, resid, ssr, n, dropped, Xk)


def default_bandwidth(nobs):
    return int(np.floor(4.0 * (nobs / 100.0) ** (2.0 / 9.0)))


def newey_west_cov(X, resid, bandwidth=None):
    """HAC covariance of OLS coefficients with Bartlett weights.

    ``bandwidth=0`` gives White's heteroskedasticity-consistent covariance;
    ``None`` uses ``floor(4 (T/100)^(2/9))``.
    """
    X = np.asarray(X, dtype=float)
    u = np.asarray(resid, dtype=float)
    if X.shape[0] != len(u):
        raise ValidationError("regressors and residuals differ in length")
    T = len(u)
    L = default_bandwidth(T) if bandwidth is None else int(bandwidth)
    XtX = X.T @ X
    try:
        bread = linalg.inv(XtX)
    except linalg.LinAlgError:
        raise ValidationError("singular regressor cross-product") from None
    if not np.all(np.isfinite(bread)) or np.linalg.cond(XtX) > 1e14:
        raise ValidationError("singular regressor cross-product")
    g = X * u[:, None]
    S = g.T @ g
    for lag in range(1, min(L, T - 1) + 1):
        w = 1.0 - lag / (L + 1.0)
        G = g[lag:].T @ g[:-lag]
        S += w * (G + G.T)
    cov = bread @ S @ bread
    return 0.5 * (cov + cov.T)
