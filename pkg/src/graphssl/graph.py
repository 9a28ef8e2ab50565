"""Datasets, similarity graphs and the matrices derived from them.

Every algorithm in the package consumes a :class:`Graph`: a sparse,
symmetric, nonnegative weight matrix with zero diagonal and no isolated
nodes.  Graphs are immutable; derived quantities that are expensive
(the Laplacian pseudoinverse, connected components) are cached on first use.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import (
    DisconnectedError,
    GraphConstructionError,
    InvalidParameterError,
)

UNLABELED = -1
PINV_RTOL = 1e-10

Sigma = Union[float, str]


def _readonly(a):
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix plus a label slot per sample.

    ``labels[i] == UNLABELED`` (-1) marks an unlabeled sample.  ``truth``
    optionally keeps the ground-truth classes for scoring; algorithms never
    read it.
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    truth: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise InvalidParameterError(f"features must be a non-empty n x d matrix, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise InvalidParameterError("features contain non-finite values")
        y = np.asarray(self.labels, dtype=np.int64)
        if y.shape != (X.shape[0],):
            raise InvalidParameterError(f"labels must have length {X.shape[0]}, got shape {y.shape}")
        c = int(self.num_classes)
        if c < 2:
            raise InvalidParameterError(f"num_classes must be >= 2, got {c}")
        if np.any((y < UNLABELED) | (y >= c)):
            raise InvalidParameterError(f"labels must be -1 (unlabeled) or in 0..{c - 1}")
        object.__setattr__(self, "features", _readonly(X))
        object.__setattr__(self, "labels", _readonly(y))
        object.__setattr__(self, "num_classes", c)
        if self.truth is not None:
            t = np.asarray(self.truth, dtype=np.int64)
            if t.shape != y.shape:
                raise InvalidParameterError("truth must have the same length as labels")
            if np.any((t < 0) | (t >= c)):
                raise InvalidParameterError(f"truth entries must lie in 0..{c - 1}")
            object.__setattr__(self, "truth", _readonly(t))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def labeled_mask(self) -> np.ndarray:
        return self.labels != UNLABELED

    @property
    def labeled_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labeled_mask)

    @property
    def unlabeled_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.labeled_mask)

    def require_labels(self):
        if not self.labeled_mask.any():
            raise InvalidParameterError("dataset has no labeled samples")

    def seeds(self) -> np.ndarray:
        """One-hot seed matrix: labeled rows are indicator rows, the rest zero."""
        Y = np.zeros((self.n, self.num_classes))
        idx = self.labeled_indices
        Y[idx, self.labels[idx]] = 1.0
        return Y

    def signed_seeds(self) -> np.ndarray:
        """Per-class +1 / -1 / 0 encoding (own class, other class, unlabeled)."""
        Y = np.zeros((self.n, self.num_classes))
        idx = self.labeled_indices
        Y[idx, :] = -1.0
        Y[idx, self.labels[idx]] = 1.0
        return Y

    def class_sets(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == c) for c in range(self.num_classes)]

    def with_labels(self, labels) -> "Dataset":
        return Dataset(self.features, labels, self.num_classes, self.truth)


def _canonical_pairs(pairs) -> frozenset:
    out = set()
    for i, j in pairs:
        i, j = int(i), int(j)
        if i == j:
            raise InvalidParameterError(f"constraint pair ({i}, {j}) links a node to itself")
        out.add((min(i, j), max(i, j)))
    return frozenset(out)


@dataclass(frozen=True)
class GraphConstraints:
    """Pairwise must-link / cannot-link constraints between labeled samples."""

    must_link: frozenset = field(default_factory=frozenset)
    cannot_link: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        ml = _canonical_pairs(self.must_link)
        cl = _canonical_pairs(self.cannot_link)
        both = ml & cl
        if both:
            raise InvalidParameterError(f"pairs in both must-link and cannot-link: {sorted(both)[:5]}")
        object.__setattr__(self, "must_link", ml)
        object.__setattr__(self, "cannot_link", cl)

    @classmethod
    def from_labels(cls, data: Dataset) -> "GraphConstraints":
        """All labeled pairs: same class -> must-link, different class -> cannot-link."""
        idx = data.labeled_indices
        ml, cl = [], []
        for i, j in combinations(idx.tolist(), 2):
            (ml if data.labels[i] == data.labels[j] else cl).append((i, j))
        return cls(frozenset(ml), frozenset(cl))

    def check_against(self, data: Dataset):
        for i, j in self.must_link | self.cannot_link:
            for v in (i, j):
                if not 0 <= v < data.n:
                    raise InvalidParameterError(f"constraint index {v} out of range")
                if data.labels[v] == UNLABELED:
                    raise InvalidParameterError(f"constraint index {v} refers to an unlabeled sample")


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected weighted graph stored as a symmetric CSR matrix."""

    weights: sp.csr_matrix
    degrees: np.ndarray = field(init=False)
    volume: float = field(init=False)

    def __post_init__(self):
        W = sp.csr_matrix(self.weights, dtype=float, copy=True)
        if W.shape[0] != W.shape[1]:
            raise GraphConstructionError(f"weight matrix must be square, got {W.shape}")
        W.eliminate_zeros()
        W.sort_indices()
        if W.nnz and (np.any(W.data < 0) or not np.all(np.isfinite(W.data))):
            raise GraphConstructionError("weights must be finite and nonnegative")
        if np.any(W.diagonal() != 0):
            raise GraphConstructionError("weight matrix must have a zero diagonal")
        if (W != W.T).nnz:
            raise GraphConstructionError("weight matrix must be exactly symmetric")
        deg = np.asarray(W.sum(axis=1)).ravel()
        isolated = np.flatnonzero(deg <= 0)
        if isolated.size:
            raise GraphConstructionError(f"node {isolated[0]} is isolated (degree 0)", node=int(isolated[0]))
        W.data.flags.writeable = False
        deg.flags.writeable = False
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "degrees", deg)
        object.__setattr__(self, "volume", float(deg.sum()))

    @classmethod
    def from_dense(cls, W) -> "Graph":
        return cls(sp.csr_matrix(np.asarray(W, dtype=float)))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable) -> "Graph":
        """Build from ``(i, j)`` or ``(i, j, w)`` tuples; each edge is mirrored."""
        rows, cols, vals = [], [], []
        for e in edges:
            i, j = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            rows += [i, j]
            cols += [j, i]
            vals += [w, w]
        W = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        return cls(W)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def dense(self) -> np.ndarray:
        return self.weights.toarray()

    @cached_property
    def component_labels(self) -> np.ndarray:
        _, comp = connected_components(self.weights, directed=False)
        return comp

    @cached_property
    def component_volumes(self) -> np.ndarray:
        return np.bincount(self.component_labels, weights=self.degrees)

    @property
    def is_connected(self) -> bool:
        return bool(np.all(self.component_labels == 0))

    @cached_property
    def laplacian_pinv(self) -> np.ndarray:
        """Moore-Penrose pseudoinverse of L via eigendecomposition."""
        L = laplacian(self).toarray()
        vals, vecs = np.linalg.eigh(L)
        cutoff = PINV_RTOL * max(vals.max(), 0.0)
        inv = np.zeros_like(vals)
        keep = vals > cutoff
        inv[keep] = 1.0 / vals[keep]
        Lp = (vecs * inv) @ vecs.T
        Lp = 0.5 * (Lp + Lp.T)
        Lp.flags.writeable = False
        return Lp


def _as_features(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.features
    X = np.asarray(data, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def knn_search(X: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Distances and indices of each row's ``k`` nearest other rows.

    A row's own index is removed even when duplicates of it exist.
    """
    n = X.shape[0]
    tree = cKDTree(X)
    dist, idx = tree.query(X, k=k + 1)
    dist = np.atleast_2d(dist).reshape(n, k + 1)
    idx = np.atleast_2d(idx).reshape(n, k + 1)
    keep = idx != np.arange(n)[:, None]
    no_self = keep.all(axis=1)
    keep[no_self, -1] = False
    return dist[keep].reshape(n, k), idx[keep].reshape(n, k)


def auto_sigma(X, k: int) -> float:
    """Mean distance from each point to its k-th nearest neighbor."""
    X = _as_features(X)
    dist, _ = knn_search(X, k)
    s = float(dist[:, -1].mean())
    return s if s > 0 else 1.0


def _resolve_sigma(sigma: Sigma, kth_dist: np.ndarray) -> float:
    if isinstance(sigma, str):
        if sigma.lower() != "auto":
            raise InvalidParameterError(f"sigma must be positive or 'auto', got {sigma!r}")
        s = float(kth_dist.mean())
        return s if s > 0 else 1.0
    s = float(sigma)
    if not s > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    return s


def build_knn_graph(data, k: int, sigma: Sigma = "auto",
                    constraints: GraphConstraints | None = None) -> Graph:
    """Gaussian-weighted k-NN graph, symmetrized by union.

    Edge (i, j) exists when j is among the k nearest neighbors of i or vice
    versa and carries ``exp(-|x_i - x_j|^2 / (2 sigma^2))``.  Constraints are
    applied afterwards: must-link pairs get weight 1 (added if absent),
    cannot-link pairs are removed.
    """
    X = _as_features(data)
    n = X.shape[0]
    k = int(k)
    if not 1 <= k < n:
        raise InvalidParameterError(f"k must satisfy 1 <= k < n = {n}, got {k}")
    dist, idx = knn_search(X, k)
    sigma = _resolve_sigma(sigma, dist[:, -1])

    rows = np.repeat(np.arange(n), k)
    cols = idx.ravel()
    pattern = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n)).tocsr()
    pattern = (pattern + pattern.T).tocoo()
    r, c = pattern.row, pattern.col
    sq = np.sum((X[r] - X[c]) ** 2, axis=1)
    w = np.exp(-sq / (2.0 * sigma * sigma))
    W = sp.csr_matrix((w, (r, c)), shape=(n, n))

    if constraints is not None:
        if isinstance(data, Dataset):
            constraints.check_against(data)
        W = W.tolil()
        for i, j in constraints.must_link:
            W[i, j] = 1.0
            W[j, i] = 1.0
        for i, j in constraints.cannot_link:
            W[i, j] = 0.0
            W[j, i] = 0.0
        W = W.tocsr()
        W.eliminate_zeros()
        deg = np.asarray(W.sum(axis=1)).ravel()
        isolated = np.flatnonzero(deg <= 0)
        if isolated.size:
            raise GraphConstructionError(
                f"node {isolated[0]} is isolated after cannot-link removal", node=int(isolated[0]))
    return Graph(W)


def build_constrained_graph(data: Dataset, k: int, sigma: Sigma = "auto") -> Graph:
    """k-NN graph with must-link/cannot-link constraints derived from the labels."""
    return build_knn_graph(data, k, sigma, GraphConstraints.from_labels(data))


def laplacian(g: Graph) -> sp.csr_matrix:
    """Combinatorial Laplacian ``L = D - W``."""
    return (sp.diags(g.degrees) - g.weights).tocsr()


def _check_degrees(g: Graph):
    zero = np.flatnonzero(g.degrees <= 0)
    if zero.size:
        raise GraphConstructionError(f"node {zero[0]} has zero degree", node=int(zero[0]))


def normalized_smoother(g: Graph) -> sp.csr_matrix:
    """``S = D^{-1/2} W D^{-1/2}``; symmetric with spectrum in [-1, 1]."""
    _check_degrees(g)
    s = 1.0 / np.sqrt(g.degrees)
    W = g.weights.tocoo()
    # s_i * s_j is commutative, so S is exactly symmetric
    return sp.csr_matrix((W.data * (s[W.row] * s[W.col]), (W.row, W.col)), shape=W.shape)


def random_walk_matrix(g: Graph) -> sp.csr_matrix:
    """Row-stochastic single-step transition matrix ``P = D^{-1} W``."""
    _check_degrees(g)
    return (sp.diags(1.0 / g.degrees) @ g.weights).tocsr()


def _check_node(g: Graph, i) -> int:
    i = int(i)
    if not 0 <= i < g.n:
        raise InvalidParameterError(f"node {i} out of range for a graph with {g.n} nodes")
    return i


def commute_time(g: Graph, i: int, j: int) -> float:
    """Expected steps of the natural random walk from i to j and back.

    Uses ``vol * (L+_ii + L+_jj - 2 L+_ij)`` where ``vol`` is the volume of the
    connected component holding both nodes.
    """
    i, j = _check_node(g, i), _check_node(g, j)
    comp = g.component_labels
    if comp[i] != comp[j]:
        raise DisconnectedError(f"nodes {i} and {j} are in different components; commute time is infinite")
    if i == j:
        return 0.0
    Lp = g.laplacian_pinv
    r = Lp[i, i] + Lp[j, j] - 2.0 * Lp[i, j]
    return float(g.component_volumes[comp[i]] * max(r, 0.0))


def commute_time_matrix(g: Graph) -> np.ndarray:
    """All pairwise commute times; ``inf`` between different components."""
    Lp = g.laplacian_pinv
    diag = np.diag(Lp)
    R = np.maximum(diag[:, None] + diag[None, :] - 2.0 * Lp, 0.0)
    np.fill_diagonal(R, 0.0)
    comp = g.component_labels
    same = comp[:, None] == comp[None, :]
    vol = g.component_volumes[comp]
    return np.where(same, vol[:, None] * R, np.inf)


def commute_time_to_set(g: Graph, i: int, B) -> float:
    """Mean commute time between node ``i`` and the nodes of ``B``."""
    B = [int(b) for b in B]
    if not B:
        raise InvalidParameterError("target set B must be nonempty")
    return float(np.mean([commute_time(g, i, b) for b in B]))
