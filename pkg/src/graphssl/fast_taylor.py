"""Near-linear LGC through a first-order Taylor factorization of the Gaussian kernel.

The Gaussian kernel splits as

    exp(-|xi - xj|^2 / 2s^2) = a_i * a_j * exp(xi.xj / s^2),   a_i = exp(-|xi|^2 / 2s^2)

and ``exp(z) ~ 1 + z`` turns the last factor into an inner product of
(d+1)-vectors, so the approximate kernel is ``W~ = G G^T`` with
``G_i = a_i [1, x_i / s]``.  The LGC ranking operator ``(I - alpha S~)^{-1}``
on that kernel is "diagonal minus rank d+1" and is applied through the
Woodbury identity without forming any n x n matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, SingularSystemError
from .graph import Dataset
from .propagation import PropagationResult, as_seed_matrix, check_alpha

# inner systems with a worse condition number are treated as singular
MAX_INNER_COND = 1e14


@dataclass(frozen=True)
class KernelFactorization:
    """Low-rank pieces of the approximate Gaussian kernel ``W~ = G M^T``.

    ``K`` holds the diagonal of the approximate degree matrix as a vector.
    """

    a: np.ndarray
    G: np.ndarray
    M: np.ndarray
    K: np.ndarray
    sigma: float

    def kernel(self) -> np.ndarray:
        """Dense ``G M^T``; for tests and small problems only."""
        return self.G @ self.M.T


def _features(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.features
    X = np.asarray(data, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def factorize_kernel(data, sigma: float, normalize: bool = False) -> KernelFactorization:
    """Factor the first-order Taylor approximation of the Gaussian kernel.

    ``normalize=True`` sets ``M = K^{-1} G`` (random-walk form) instead of
    the symmetric default ``M = G``.
    """
    sigma = float(sigma)
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    X = _features(data)
    n = X.shape[0]
    a = np.exp(-np.sum(X * X, axis=1) / (2.0 * sigma * sigma))
    G = a[:, None] * np.hstack([np.ones((n, 1)), X / sigma])
    deg = G @ (G.T @ np.ones(n))
    bad = np.flatnonzero(deg <= 0)
    if bad.size:
        raise InvalidParameterError(
            f"approximate degree of node {bad[0]} is {deg[bad[0]]:.3g} <= 0; "
            f"the Taylor term dominates, use a larger sigma (got {sigma})")
    M = G / deg[:, None] if normalize else G
    return KernelFactorization(a=a, G=G, M=M, K=deg, sigma=sigma)


def woodbury_apply(diag, A, B, right=None) -> np.ndarray:
    """Return ``(D + A C^T)^{-1} B`` with ``D = diag(diag)`` and ``C = right``.

    ``C`` defaults to ``A``, giving ``(A A^T + D)^{-1} B``.  Only an r x r
    system is solved, where r is the number of columns of A.
    """
    d = np.asarray(diag, dtype=float)
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = A if right is None else np.asarray(right, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if C.ndim == 1:
        C = C[:, None]
    squeeze = B.ndim == 1
    if squeeze:
        B = B[:, None]
    n = d.shape[0]
    if A.shape[0] != n or C.shape != A.shape or B.shape[0] != n:
        raise InvalidParameterError(
            f"shape mismatch: diag {d.shape}, A {A.shape}, C {C.shape}, B {B.shape}")
    if np.any(d == 0):
        raise SingularSystemError("diagonal part has zero entries")
    DinvB = B / d[:, None]
    if A.shape[1] == 0:
        return DinvB[:, 0] if squeeze else DinvB
    DinvA = A / d[:, None]
    inner = np.eye(A.shape[1]) + C.T @ DinvA
    if not np.all(np.isfinite(inner)) or np.linalg.cond(inner) > MAX_INNER_COND:
        raise SingularSystemError("inner Woodbury system is singular")
    X = DinvB - DinvA @ np.linalg.solve(inner, C.T @ DinvB)
    return X[:, 0] if squeeze else X


def fast_lgc(data, seeds, alpha: float, sigma: float, center: bool = True,
             zero_diagonal: bool = True) -> PropagationResult:
    """LGC on the Taylor-approximated fully connected Gaussian graph.

    Computes ``(1 - alpha) (I - alpha S~)^{-1} Y`` with
    ``S~ = D~^{-1/2} W~ D~^{-1/2}`` in O(n d^2 + d^3).  Writing
    ``H = D~^{-1/2} G`` the system matrix is ``K - alpha H H^T`` with
    diagonal ``K``, so the ranking operator is ``K^{-1}`` plus a rank-(d+1)
    correction.  The Gaussian kernel is translation invariant, so centering
    the features first (``center=True``) only shrinks the Taylor error.
    """
    alpha = check_alpha(alpha)
    X = np.array(_features(data), dtype=float)
    Y = as_seed_matrix(seeds if seeds is not None else data, X.shape[0])
    if center:
        X = X - X.mean(axis=0)
    fac = factorize_kernel(X, sigma)
    G = fac.G
    self_weight = np.einsum("ij,ij->i", G, G)
    deg = fac.K - self_weight if zero_diagonal else fac.K
    bad = np.flatnonzero(deg <= 0)
    if bad.size:
        raise InvalidParameterError(
            f"approximate degree of node {bad[0]} is nonpositive; use a larger sigma (got {sigma})")
    H = G / np.sqrt(deg)[:, None]
    K = 1.0 + alpha * self_weight / deg if zero_diagonal else np.ones(X.shape[0])
    F = (1.0 - alpha) * woodbury_apply(K, -alpha * H, Y, right=H)
    return PropagationResult(F, iterations=0, converged=True, info={"sigma": fac.sigma})
