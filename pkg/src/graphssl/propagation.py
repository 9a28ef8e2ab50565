"""Transductive label propagation: GFHF, LGC and Fick's-law propagation (FLAP).

Multi-class problems are handled with one seed column per class and a
row-wise argmax (lowest class index wins ties).  Closed forms are solved as
sparse linear systems factored once for all columns.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import _backend
from .errors import DisconnectedError, InvalidParameterError, SingularSystemError
from .graph import Dataset, Graph, normalized_smoother, random_walk_matrix

DISTANCE_FLOOR = 1e-12


def check_alpha(alpha) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


@dataclass(frozen=True)
class PropagationConfig:
    alpha: float = 0.99
    tolerance: float = 1e-8
    max_iterations: int = 10000

    def __post_init__(self):
        check_alpha(self.alpha)
        if not self.tolerance > 0:
            raise InvalidParameterError(f"tolerance must be positive, got {self.tolerance}")
        if int(self.max_iterations) < 1:
            raise InvalidParameterError(f"max_iterations must be >= 1, got {self.max_iterations}")


@dataclass
class PropagationResult:
    """Soft scores plus the hardened prediction (row argmax)."""

    scores: np.ndarray
    iterations: int = 0
    converged: bool = True
    update_norms: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def predicted(self) -> np.ndarray:
        return np.argmax(self.scores, axis=1)


def as_seed_matrix(seeds, n: int | None = None) -> np.ndarray:
    if isinstance(seeds, Dataset):
        seeds.require_labels()
        return seeds.seeds()
    Y = np.asarray(seeds, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if n is not None and Y.shape[0] != n:
        raise InvalidParameterError(f"seed matrix has {Y.shape[0]} rows, graph has {n} nodes")
    if not np.all(np.isfinite(Y)):
        raise InvalidParameterError("seed matrix contains non-finite values")
    return Y


def _solve_shifted(A: sp.csr_matrix, alpha: float, B: np.ndarray) -> np.ndarray:
    """Solve ``(I - alpha A) X = B`` with a single sparse LU factorization."""
    n = A.shape[0]
    M = (sp.identity(n, format="csc") - alpha * A.tocsc()).tocsc()
    try:
        lu = splu(M)
    except RuntimeError as exc:
        raise SingularSystemError(f"(I - alpha A) is singular: {exc}") from exc
    X = lu.solve(np.asfortranarray(B))
    if not np.all(np.isfinite(X)):
        raise SingularSystemError("(I - alpha A) solve produced non-finite values")
    return np.asarray(X)


def lgc_closed(g: Graph, seeds, alpha: float) -> PropagationResult:
    """``F* = (1 - alpha) (I - alpha S)^{-1} Y`` with ``S = D^{-1/2} W D^{-1/2}``."""
    alpha = check_alpha(alpha)
    Y = as_seed_matrix(seeds, g.n)
    S = normalized_smoother(g)
    F = _solve_shifted(S, alpha, (1.0 - alpha) * Y)
    return PropagationResult(F, iterations=0, converged=True)


def lgc_iterate(g: Graph, seeds, cfg: PropagationConfig = PropagationConfig()) -> PropagationResult:
    """Fixed-point iteration ``F <- alpha S F + (1 - alpha) Y`` starting from Y.

    Hitting ``max_iterations`` yields ``converged=False`` rather than raising.
    """
    Y = as_seed_matrix(seeds, g.n)
    S = normalized_smoother(g)
    F, it, ok, deltas = _backend.fixed_point(S, Y, cfg.alpha, cfg.tolerance, cfg.max_iterations)
    return PropagationResult(F, iterations=it, converged=ok, update_norms=deltas)


def _require_labeled_components(g: Graph, labeled: np.ndarray):
    comp = g.component_labels
    has_label = np.zeros(comp.max() + 1, dtype=bool)
    has_label[comp[labeled]] = True
    bad = np.flatnonzero(~has_label)
    if bad.size:
        nodes = np.flatnonzero(comp == bad[0])
        raise DisconnectedError(
            f"connected component {int(bad[0])} (nodes {nodes[:10].tolist()}"
            f"{'...' if nodes.size > 10 else ''}) has no labeled node",
            component=nodes.tolist(),
        )


def gfhf(g: Graph, data: Dataset) -> PropagationResult:
    """Harmonic solution with labeled rows clamped to their one-hot seeds.

    Solves ``L_UU f_U = W_UL f_L``, which is ``(I - P_UU) f_U = P_UL f_L``
    scaled by the unlabeled degrees.
    """
    if data.n != g.n:
        raise InvalidParameterError("dataset and graph sizes differ")
    data.require_labels()
    lab = data.labeled_indices
    unl = data.unlabeled_indices
    _require_labeled_components(g, lab)
    F = data.seeds()
    if unl.size:
        W = g.weights
        L_uu = (sp.diags(g.degrees[unl]) - W[unl][:, unl]).tocsc()
        rhs = W[unl][:, lab] @ F[lab]
        try:
            F[unl] = np.asarray(splu(L_uu).solve(np.asfortranarray(rhs)))
        except RuntimeError as exc:
            raise SingularSystemError(f"unlabeled Laplacian block is singular: {exc}") from exc
    return PropagationResult(F, iterations=0, converged=True)


def fick_diffusion_matrix(data, g: Graph, gamma: float = 1.0) -> sp.csr_matrix:
    """Row-normalized conductances ``gamma * W_ij / r_ij`` on the graph's edges.

    ``r_ij`` is the Euclidean distance, floored at 1e-12 so duplicate points
    stay finite.  Row normalization makes the result independent of gamma.
    """
    if not gamma > 0:
        raise InvalidParameterError(f"gamma must be positive, got {gamma}")
    X = data.features if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    W = g.weights.tocoo()
    r = np.sqrt(np.sum((X[W.row] - X[W.col]) ** 2, axis=1))
    cond = gamma * W.data / np.maximum(r, DISTANCE_FLOOR)
    C = sp.csr_matrix((cond, (W.row, W.col)), shape=W.shape)
    rowsum = np.asarray(C.sum(axis=1)).ravel()
    return (sp.diags(1.0 / rowsum) @ C).tocsr()


def flap_closed(g: Graph, data: Dataset, alpha: float, gamma: float = 1.0, seeds=None) -> PropagationResult:
    """``f* = (1 - alpha) (I - alpha P)^{-1} y`` with the Fick diffusion matrix P."""
    alpha = check_alpha(alpha)
    Y = as_seed_matrix(data if seeds is None else seeds, g.n)
    P = fick_diffusion_matrix(data, g, gamma)
    F = _solve_shifted(P, alpha, (1.0 - alpha) * Y)
    return PropagationResult(F, iterations=0, converged=True)


def flap(g: Graph, data: Dataset, cfg: PropagationConfig = PropagationConfig(),
         gamma: float = 1.0, seeds=None, closed: bool = False) -> PropagationResult:
    """Fick's-law propagation ``f <- alpha P f + (1 - alpha) y``.

    With ``closed=True`` the fixed point is computed directly.
    """
    if closed:
        return flap_closed(g, data, cfg.alpha, gamma, seeds)
    Y = as_seed_matrix(data if seeds is None else seeds, g.n)
    P = fick_diffusion_matrix(data, g, gamma)
    F, it, ok, deltas = _backend.fixed_point(P, Y, cfg.alpha, cfg.tolerance, cfg.max_iterations)
    return PropagationResult(F, iterations=it, converged=ok, update_norms=deltas)
