"""Pure-numpy ARMA innovations filter (fallback for the compiled kernel)."""

import numpy as np

# P is dropped from the recursion once it stops moving by more than this.
STEADY_TOL = 1e-14


def arma_whiten(phi, theta, P0, Y):
    """Run the unit-variance ARMA Kalman filter over every column of ``Y``.

    Returns the standardized innovations (same shape as ``Y``) and the
    innovation variances ``F`` (length n, shared by all columns).
    """
    phi = np.ascontiguousarray(phi, dtype=float)
    theta = np.ascontiguousarray(theta, dtype=float)
    Y = np.ascontiguousarray(Y, dtype=float)
    n, m = Y.shape
    r = P0.shape[0]

    T = np.zeros((r, r))
    T[: len(phi), 0] = phi
    T[np.arange(r - 1), np.arange(1, r)] = 1.0
    R = np.zeros(r)
    R[0] = 1.0
    R[1 : len(theta) + 1] = theta
    RR = np.outer(R, R)

    a = np.zeros((r, m))
    P = np.array(P0, dtype=float)
    out = np.empty((n, m))
    F = np.empty(n)
    K = np.zeros(r)
    steady = False
    for t in range(n):
        f = P[0, 0]
        v = Y[t] - a[0]
        F[t] = f
        out[t] = v / np.sqrt(f)
        if not steady:
            K = T @ P[:, 0] / f
        a = T @ a + np.outer(K, v)
        if not steady:
            P_new = T @ P @ T.T + RR - np.outer(K, K) * f
            if np.max(np.abs(P_new - P)) < STEADY_TOL:
                steady = True
            P = P_new
    return out, F
