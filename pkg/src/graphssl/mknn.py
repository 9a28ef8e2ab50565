"""Manifold k-nearest-neighbor classification.

Global similarity comes from the fatigued random walk ``(I - alpha P)^{-1}``
on a label-constrained graph.  New samples are placed on the manifold by a
two-step local reconstruction instead of recomputing the inverse.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import InvalidParameterError, SingularSystemError
from .graph import Dataset, Graph, random_walk_matrix
from .propagation import PropagationResult, check_alpha

REFINE_TOL = 1e-10
KKT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ManifoldSimilarity:
    matrix: np.ndarray
    alpha: float
    graph: Graph


def fatigue_similarity(g: Graph, alpha: float) -> ManifoldSimilarity:
    """``(I - alpha P)^{-1} = sum_k (alpha P)^k`` with one step of iterative refinement."""
    alpha = check_alpha(alpha)
    P = random_walk_matrix(g).toarray()
    n = g.n
    M = np.eye(n) - alpha * P
    lu = sla.lu_factor(M)
    Pbar = sla.lu_solve(lu, np.eye(n))
    Pbar += sla.lu_solve(lu, np.eye(n) - M @ Pbar)
    resid = np.abs(np.eye(n) - M @ Pbar).max()
    if not resid <= REFINE_TOL:
        raise SingularSystemError(f"fatigue walk inverse residual {resid:.3g} exceeds {REFINE_TOL}")
    Pbar.flags.writeable = False
    return ManifoldSimilarity(Pbar, alpha, g)


def _vote(sims: np.ndarray, labels: np.ndarray, k: int, num_classes: int) -> np.ndarray:
    # stable sort over ascending candidate order: ties go to the lowest index
    order = np.argsort(-sims, kind="stable")[:k]
    return np.bincount(labels[order], weights=sims[order], minlength=num_classes)


def _effective_k(k: int, num_labeled: int) -> int:
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    if k > num_labeled:
        warnings.warn(f"k={k} exceeds the {num_labeled} labeled samples; voting with all of them",
                      stacklevel=3)
        return num_labeled
    return k


def mknn_classify(sim: ManifoldSimilarity, data: Dataset, k: int) -> PropagationResult:
    """Weighted vote of the k labeled samples most similar on the manifold."""
    data.require_labels()
    lab = data.labeled_indices
    k = _effective_k(int(k), lab.size)
    scores = data.seeds()
    lab_y = data.labels[lab]
    for i in data.unlabeled_indices:
        scores[i] = _vote(sim.matrix[i, lab], lab_y, k, data.num_classes)
    return PropagationResult(scores, iterations=0, converged=True)


def reconstruct_weights(x, neighbors) -> np.ndarray:
    """Simplex-constrained least squares ``min |x - X_k^T z|^2, z >= 0, sum z = 1``.

    Primal active-set method started from the closest neighbor's vertex.
    Blocking constraints and released constraints are chosen by lowest
    index on ties, so the result is deterministic.
    """
    x = np.asarray(x, dtype=float).ravel()
    Xk = np.atleast_2d(np.asarray(neighbors, dtype=float))
    k = Xk.shape[0]
    if k < 1:
        raise InvalidParameterError("need at least one neighbor")
    if Xk.shape[1] != x.size:
        raise InvalidParameterError(f"neighbors have dimension {Xk.shape[1]}, x has {x.size}")
    Q = Xk @ Xk.T
    q = Xk @ x
    scale = max(1.0, np.abs(Q).max())

    z = np.zeros(k)
    z[int(np.argmin(np.sum((Xk - x) ** 2, axis=1)))] = 1.0
    free = z > 0
    for _ in range(50 * k + 50):
        F = np.flatnonzero(free)
        kkt = np.zeros((F.size + 1, F.size + 1))
        kkt[:F.size, :F.size] = Q[np.ix_(F, F)]
        kkt[:F.size, F.size] = 1.0
        kkt[F.size, :F.size] = 1.0
        rhs = np.concatenate([q[F], [1.0]])
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        target = np.zeros(k)
        target[F] = sol[:F.size]
        step = target - z
        if np.abs(step).max() > KKT_TOL:
            shrinking = F[step[F] < -KKT_TOL]
            t, block = 1.0, -1
            for j in shrinking:
                tj = z[j] / -step[j]
                if tj < t:
                    t, block = tj, j
            z = z + t * step
            if block >= 0:
                z[block] = 0.0
                free[block] = False
                continue
        grad = Q @ z - q
        nu = grad[F].mean()
        lam = grad - nu
        lam[F] = 0.0
        j = int(np.argmin(lam))
        if lam[j] >= -KKT_TOL * scale:
            break
        free[j] = True
    z = np.clip(z, 0.0, None)
    return z / z.sum()


def online_similarity(z, W_k) -> np.ndarray:
    """``max(W_k^T z, 0)``: the nonnegativity-constrained fit is separable."""
    z = np.asarray(z, dtype=float).ravel()
    W_k = np.atleast_2d(np.asarray(W_k, dtype=float))
    if W_k.shape[0] != z.size:
        raise InvalidParameterError(f"{z.size} weights but {W_k.shape[0]} similarity rows")
    return np.maximum(W_k.T @ z, 0.0)


def online_classify(sim: ManifoldSimilarity, data: Dataset, x, k_nn: int = 5, k_vote: int = 3) -> int:
    """Classify a new sample without recomputing the fatigue-walk inverse."""
    data.require_labels()
    x = np.asarray(x, dtype=float).ravel()
    k_nn = min(int(k_nn), data.n)
    if k_nn < 1:
        raise InvalidParameterError("k_nn must be >= 1")
    d2 = np.sum((data.features - x) ** 2, axis=1)
    nbrs = np.lexsort((np.arange(data.n), d2))[:k_nn]
    z = reconstruct_weights(x, data.features[nbrs])
    w = online_similarity(z, sim.matrix[nbrs])
    lab = data.labeled_indices
    k = _effective_k(int(k_vote), lab.size)
    return int(np.argmax(_vote(w[lab], data.labels[lab], k, data.num_classes)))
