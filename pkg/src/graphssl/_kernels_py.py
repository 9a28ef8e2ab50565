"""Pure numpy/scipy implementations of the hot propagation kernels.

These mirror ``_kernels.pyx`` operation for operation so both backends give
the same numbers; this module is used when the extension is not built.
"""
import numpy as np
import scipy.sparse as sp


def fixed_point(A, Y, alpha, tol, max_iter, F0=None):
    """Iterate ``F <- alpha * A @ F + (1 - alpha) * Y`` until the max-abs
    update drops below ``tol``.

    Returns ``(F, iterations, converged, deltas)`` where ``deltas[t]`` is the
    max-abs update of iteration ``t + 1``.
    """
    A = sp.csr_matrix(A)
    Y = np.ascontiguousarray(Y, dtype=float)
    F = Y.copy() if F0 is None else np.array(F0, dtype=float, copy=True)
    base = (1.0 - alpha) * Y
    deltas = []
    for it in range(1, int(max_iter) + 1):
        G = alpha * (A @ F) + base
        delta = float(np.max(np.abs(G - F))) if G.size else 0.0
        F = G
        deltas.append(delta)
        if delta < tol:
            return F, it, True, np.array(deltas)
    return F, int(max_iter), False, np.array(deltas)


def row_products(A, rows, F):
    """``A[rows] @ F`` for a subset of rows of a CSR matrix."""
    A = sp.csr_matrix(A)
    rows = np.asarray(rows, dtype=np.int64)
    return np.asarray(A[rows] @ np.asarray(F, dtype=float))
