# cython: language_level=3
"""Compiled CSR propagation kernels; see ``_kernels_py`` for the reference semantics."""
import numpy as np
import scipy.sparse as sp

from libc.math cimport fabs


cdef double _sweep(const long long[::1] indptr, const long long[::1] indices,
                   const double[::1] data, const double[:, ::1] base,
                   double alpha, const double[:, ::1] F, double[:, ::1] G,
                   double[::1] acc) noexcept nogil:
    cdef Py_ssize_t n = F.shape[0], c = F.shape[1]
    cdef Py_ssize_t i, p, j, col
    cdef double a, v, diff, delta = 0.0
    for i in range(n):
        for col in range(c):
            acc[col] = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            a = data[p]
            for col in range(c):
                acc[col] += a * F[j, col]
        for col in range(c):
            v = alpha * acc[col] + base[i, col]
            G[i, col] = v
            diff = fabs(v - F[i, col])
            if diff > delta:
                delta = diff
    return delta


def fixed_point(A, Y, double alpha, double tol, long long max_iter, F0=None):
    A = sp.csr_matrix(A)
    cdef const long long[::1] indptr = np.ascontiguousarray(A.indptr, dtype=np.int64)
    cdef const long long[::1] indices = np.ascontiguousarray(A.indices, dtype=np.int64)
    cdef const double[::1] data = np.ascontiguousarray(A.data, dtype=np.float64)
    Yarr = np.ascontiguousarray(Y, dtype=np.float64)
    base_arr = (1.0 - alpha) * Yarr
    cdef const double[:, ::1] base = base_arr
    F_arr = Yarr.copy() if F0 is None else np.array(F0, dtype=np.float64, order="C", copy=True)
    G_arr = np.empty_like(F_arr)
    cdef double[:, ::1] F = F_arr
    cdef double[:, ::1] G = G_arr
    cdef double[:, ::1] tmp
    cdef double[::1] acc = np.zeros(max(F_arr.shape[1], 1))
    cdef double delta
    cdef long long it
    deltas = []
    for it in range(1, max_iter + 1):
        with nogil:
            delta = _sweep(indptr, indices, data, base, alpha, F, G, acc)
        tmp = F
        F = G
        G = tmp
        deltas.append(delta)
        if delta < tol:
            return np.asarray(F).copy(), int(it), True, np.array(deltas)
    return np.asarray(F).copy(), int(max_iter), False, np.array(deltas)


def row_products(A, rows, F):
    A = sp.csr_matrix(A)
    cdef const long long[::1] indptr = np.ascontiguousarray(A.indptr, dtype=np.int64)
    cdef const long long[::1] indices = np.ascontiguousarray(A.indices, dtype=np.int64)
    cdef const double[::1] data = np.ascontiguousarray(A.data, dtype=np.float64)
    cdef const long long[::1] r = np.ascontiguousarray(rows, dtype=np.int64)
    cdef const double[:, ::1] Fv = np.ascontiguousarray(F, dtype=np.float64)
    out_arr = np.zeros((r.shape[0], Fv.shape[1]))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t k, i, p, j, col
    cdef double a
    with nogil:
        for k in range(r.shape[0]):
            i = r[k]
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                a = data[p]
                for col in range(Fv.shape[1]):
                    out[k, col] += a * Fv[j, col]
    return out_arr
