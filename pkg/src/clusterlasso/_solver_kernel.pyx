# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loop of the accelerated proximal-gradient solver.

Mirrors ``_solver_py.run_block`` step for step (monotone FISTA with
backtracking and gradient restarts); matrix-vector products go through BLAS.
The row-major design matrix is handed to Fortran BLAS as its own transpose,
so "T" below computes X @ v and "N" computes X.T @ v.
"""

from libc.math cimport fabs, sqrt

from scipy.linalg.cython_blas cimport dgemv

BACKEND_NAME = "compiled"


cdef void _design_vec(double[:, ::1] x_mat, double[::1] v, double[::1] out) noexcept nogil:
    cdef int m = x_mat.shape[1]
    cdef int n = x_mat.shape[0]
    cdef int inc = 1
    cdef double one = 1.0
    cdef double zero = 0.0
    cdef char trans = b'T'
    dgemv(&trans, &m, &n, &one, &x_mat[0, 0], &m, &v[0], &inc, &zero, &out[0], &inc)


cdef void _design_t_vec(double[:, ::1] x_mat, double[::1] v, double[::1] out) noexcept nogil:
    cdef int m = x_mat.shape[1]
    cdef int n = x_mat.shape[0]
    cdef int inc = 1
    cdef double one = 1.0
    cdef double zero = 0.0
    cdef char trans = b'N'
    dgemv(&trans, &m, &n, &one, &x_mat[0, 0], &m, &v[0], &inc, &zero, &out[0], &inc)


def run_block(double[:, ::1] X, double[::1] y, double lam, int steps,
              double[::1] x, double[::1] xp, double[::1] yv,
              double[::1] z, double[::1] grad, double[::1] rn, double[::1] un,
              double[::1] dbuf, double t, double fx, double lip,
              hist, long hist_pos):
    """Advance ``steps`` iterations; returns updated (t, fx, lip, hist_pos)."""
    cdef bint track = hist is not None
    cdef double[::1] hist_view = hist if track else y
    cdef int n = X.shape[0]
    cdef int p = X.shape[1]
    cdef int k, i, j
    cdef double fy, fz, fz_total, gd, dd, d, l1, rest, tn, a, b, thresh, v

    with nogil:
        for k in range(steps):
            _design_vec(X, yv, rn)
            for i in range(n):
                rn[i] -= y[i]
            fy = 0.0
            for i in range(n):
                fy += rn[i] * rn[i]
            fy *= 0.5
            _design_t_vec(X, rn, grad)

            while True:
                thresh = lam / lip
                for j in range(p):
                    v = yv[j] - grad[j] / lip
                    if v > thresh:
                        z[j] = v - thresh
                    elif v < -thresh:
                        z[j] = v + thresh
                    else:
                        z[j] = 0.0
                _design_vec(X, z, un)
                for i in range(n):
                    un[i] -= y[i]
                fz = 0.0
                for i in range(n):
                    fz += un[i] * un[i]
                fz *= 0.5
                gd = 0.0
                dd = 0.0
                for j in range(p):
                    d = z[j] - yv[j]
                    gd += grad[j] * d
                    dd += d * d
                if fz <= fy + gd + 0.5 * lip * dd + 1e-12 * fabs(fy):
                    break
                lip *= 2.0

            l1 = 0.0
            for j in range(p):
                l1 += fabs(z[j])
            fz_total = fz + lam * l1

            rest = 0.0
            for j in range(p):
                rest += (yv[j] - z[j]) * (z[j] - xp[j])
            if rest > 0.0:
                t = 1.0
            tn = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
            a = t / tn
            b = (t - 1.0) / tn
            if fz_total <= fx:
                for j in range(p):
                    yv[j] = z[j] + b * (z[j] - xp[j])
                for j in range(p):
                    xp[j] = z[j]
                    x[j] = z[j]
                fx = fz_total
            else:
                for j in range(p):
                    yv[j] = x[j] + a * (z[j] - x[j]) + b * (x[j] - xp[j])
                for j in range(p):
                    xp[j] = x[j]
            t = tn
            if track:
                hist_view[hist_pos] = fx
                hist_pos += 1
    return t, fx, lip, hist_pos
