# cython: language_level=3
"""Compiled ARMA innovations filter; mirrors ``_kalman_py.arma_whiten``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

cdef double STEADY_TOL = 1e-14


def arma_whiten(phi, theta, P0, Y):
    cdef double[::1] ph = np.ascontiguousarray(phi, dtype=np.float64)
    cdef double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef double[:, ::1] y = np.ascontiguousarray(Y, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t m = y.shape[1]
    cdef Py_ssize_t r = P0.shape[0]
    cdef Py_ssize_t p = ph.shape[0]
    cdef Py_ssize_t q = th.shape[0]

    cdef double[:, ::1] P = np.array(P0, dtype=np.float64, order="C")
    cdef double[:, ::1] Pn = np.zeros((r, r))
    cdef double[:, ::1] TP = np.zeros((r, r))
    cdef double[:, ::1] a = np.zeros((r, m))
    cdef double[::1] v = np.zeros(m)
    cdef double[::1] K = np.zeros(r)
    cdef double[::1] Tc = np.zeros(r)
    cdef double[::1] R = np.zeros(r)
    out_arr = np.empty((n, m))
    F_arr = np.empty(n)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] F = F_arr

    cdef Py_ssize_t t, i, j, c
    cdef double f, sf, a0, diff, dmax
    cdef bint steady = False

    for i in range(p):
        Tc[i] = ph[i]
    R[0] = 1.0
    for i in range(q):
        R[i + 1] = th[i]

    for t in range(n):
        f = P[0, 0]
        F[t] = f
        sf = sqrt(f)
        for c in range(m):
            v[c] = y[t, c] - a[0, c]
            out[t, c] = v[c] / sf
        if not steady:
            # K = T P[:, 0] / f
            for i in range(r):
                K[i] = Tc[i] * P[0, 0]
                if i + 1 < r:
                    K[i] += P[i + 1, 0]
                K[i] /= f
        # a <- T a + K v  (T is companion: row i = Tc[i] * a[0] + a[i+1])
        for c in range(m):
            a0 = a[0, c]
            for i in range(r):
                if i + 1 < r:
                    a[i, c] = Tc[i] * a0 + a[i + 1, c] + K[i] * v[c]
                else:
                    a[i, c] = Tc[i] * a0 + K[i] * v[c]
        if not steady:
            # TP = T @ P
            for i in range(r):
                for j in range(r):
                    TP[i, j] = Tc[i] * P[0, j]
                    if i + 1 < r:
                        TP[i, j] += P[i + 1, j]
            # Pn = TP @ T' + RR' - K K' f
            dmax = 0.0
            for i in range(r):
                for j in range(r):
                    Pn[i, j] = TP[i, 0] * Tc[j] + R[i] * R[j] - K[i] * K[j] * f
                    if j + 1 < r:
                        Pn[i, j] += TP[i, j + 1]
                    diff = fabs(Pn[i, j] - P[i, j])
                    if diff > dmax:
                        dmax = diff
            for i in range(r):
                for j in range(r):
                    P[i, j] = Pn[i, j]
            if dmax < STEADY_TOL:
                steady = True
    return out_arr, F_arr
