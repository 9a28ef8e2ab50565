"""Posterior distribution learning.

Two stages: constrained label propagation estimates a posterior for every
sample of the learning set, then a weighted vector-output least-squares
kernel machine is fitted to those posteriors so that new samples can be
classified without re-propagating.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.spatial.distance import cdist

from .errors import InvalidParameterError, SingularSystemError
from .graph import Dataset, Graph, Sigma, build_constrained_graph, knn_search, normalized_smoother

SCHEMA_VERSION = 1


def gaussian_gram(X, Z, sigma: float) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    return np.exp(-cdist(X, Z, "sqeuclidean") / (2.0 * sigma * sigma))


@dataclass(frozen=True)
class PosteriorEstimate:
    posteriors: np.ndarray
    graph: Graph | None = None

    @property
    def predicted(self) -> np.ndarray:
        return np.argmax(self.posteriors, axis=1)


@dataclass(frozen=True, eq=False)
class KernelModel:
    """Kernel expansion ``f(x) = sum_i A_i k(x_i, x) + b``.

    Shared by the posterior regressor (with bias) and the deformed-Laplacian
    inductive model (``bias_free=True``, zero bias).
    """

    support_points: np.ndarray
    coefficients: np.ndarray
    bias: np.ndarray
    sigma: float
    gamma: float
    bias_free: bool = False
    kind: str = "pdl"

    @property
    def num_classes(self) -> int:
        return self.coefficients.shape[1]

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        K = gaussian_gram(X[None, :] if single else X, self.support_points, self.sigma)
        out = K @ self.coefficients + self.bias
        return out[0] if single else out

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "kind": self.kind,
            "sigma": self.sigma,
            "gamma": self.gamma,
            "bias_free": self.bias_free,
            "support_points": self.support_points.tolist(),
            "coefficients": self.coefficients.tolist(),
            "bias": self.bias.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "KernelModel":
        if doc.get("schema") != SCHEMA_VERSION:
            raise InvalidParameterError(f"unsupported model schema {doc.get('schema')!r}")
        coef = np.asarray(doc["coefficients"], dtype=float)
        return cls(
            support_points=np.asarray(doc["support_points"], dtype=float).reshape(coef.shape[0], -1),
            coefficients=coef,
            bias=np.asarray(doc["bias"], dtype=float),
            sigma=float(doc["sigma"]),
            gamma=float(doc["gamma"]),
            bias_free=bool(doc["bias_free"]),
            kind=str(doc["kind"]),
        )

    def save(self, path):
        # json writes floats with repr(), which round-trips float64 exactly
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path) -> "KernelModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


PdlModel = KernelModel


def _normalize_rows(F: np.ndarray) -> np.ndarray:
    F = np.clip(F, 0.0, None)
    s = F.sum(axis=1, keepdims=True)
    out = np.full_like(F, 1.0 / F.shape[1])
    nz = s[:, 0] > 0
    out[nz] = F[nz] / s[nz]
    return out


def estimate_posteriors(data: Dataset, k: int = 10, sigma: Sigma = "auto", alpha: float = 0.99,
                        local=None, graph: Graph | None = None) -> PosteriorEstimate:
    """Constrained LGC posteriors for every sample.

    Solves the fixed point of ``F <- Lam S F + (I - Lam) Y`` on the
    must-link/cannot-link graph, where ``Lam`` is the diagonal local
    propagation matrix (``alpha * I`` unless ``local`` gives per-node values
    in (0, 1)).  Negative scores are clamped, rows normalized, and all-zero
    rows become uniform.  Passing ``graph`` skips graph construction.
    """
    counts = np.bincount(data.labels[data.labeled_mask], minlength=data.num_classes)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise InvalidParameterError(f"class {missing[0]} has no labeled samples")
    if graph is None:
        graph = build_constrained_graph(data, k, sigma)
    lam = np.full(data.n, float(alpha)) if local is None else np.asarray(local, dtype=float)
    if lam.shape != (data.n,) or np.any((lam <= 0) | (lam >= 1)):
        raise InvalidParameterError("local propagation values must lie in (0, 1), one per sample")
    S = normalized_smoother(graph)
    Y = data.seeds()
    M = (sp.identity(data.n, format="csc") - sp.diags(lam) @ S).tocsc()
    F = np.asarray(splu(M).solve(np.asfortranarray((1.0 - lam)[:, None] * Y)))
    return PosteriorEstimate(_normalize_rows(F), graph)


def fit_posterior_regressor(features, targets, sigma: float, gamma: float, weights=None) -> KernelModel:
    """Weighted multi-output LS-SVM fit.

    Each class column solves the same bordered system
    ``[[Omega + V^{-1}/gamma, 1], [1^T, 0]] [a; b] = [F; 0]``.
    """
    X = np.atleast_2d(np.asarray(features, dtype=float))
    T = np.asarray(targets.posteriors if isinstance(targets, PosteriorEstimate) else targets, dtype=float)
    if T.ndim == 1:
        T = T[:, None]
    m = X.shape[0]
    if T.shape[0] != m:
        raise InvalidParameterError(f"{m} training points but {T.shape[0]} target rows")
    if not gamma > 0 or not sigma > 0:
        raise InvalidParameterError("sigma and gamma must be positive")
    v = np.ones(m) if weights is None else np.asarray(weights, dtype=float)
    if v.shape != (m,) or np.any(v <= 0):
        raise InvalidParameterError("weights must be positive, one per training point")

    A = np.zeros((m + 1, m + 1))
    A[:m, :m] = gaussian_gram(X, X, sigma) + np.diag(1.0 / (gamma * v))
    A[:m, m] = 1.0
    A[m, :m] = 1.0
    rhs = np.vstack([T, np.zeros((1, T.shape[1]))])
    try:
        sol = sla.solve(A, rhs, assume_a="sym")
    except (sla.LinAlgError, ValueError) as exc:
        raise SingularSystemError(f"LS-SVM system is singular ({exc}); try a smaller gamma") from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystemError("LS-SVM system is singular; try a smaller gamma")
    return KernelModel(X.copy(), sol[:m], sol[m], float(sigma), float(gamma))


def training_residuals(model: KernelModel, targets) -> np.ndarray:
    """Per-point fit error norms ``|F_j - f(x_j)|``."""
    T = np.asarray(targets.posteriors if isinstance(targets, PosteriorEstimate) else targets, dtype=float)
    return np.linalg.norm(T - model.decision_function(model.support_points), axis=1)


def robust_weights(residual_norms, c1: float = 2.5, c2: float = 3.0) -> np.ndarray:
    """Hampel-type weights from residual magnitudes.

    The robust scale is ``1.483 * median(|r|)``: residual norms are
    deviations from a zero-error fit, so the MAD is taken about zero.
    """
    r = np.abs(np.asarray(residual_norms, dtype=float))
    s = 1.483 * np.median(r) if r.size else 0.0
    if s <= 0:
        return np.ones_like(r)
    u = r / s
    return np.where(u <= c1, 1.0, np.where(u <= c2, (c2 - u) / (c2 - c1), 1e-4))


def _posterior(raw: np.ndarray) -> np.ndarray:
    return _normalize_rows(np.clip(raw, 0.0, 1.0))


def predict_posterior(model: KernelModel, x) -> np.ndarray:
    """Posterior vector(s): raw output clamped to [0, 1] and renormalized."""
    raw = model.decision_function(x)
    return _posterior(raw[None, :])[0] if raw.ndim == 1 else _posterior(raw)


@dataclass(frozen=True)
class PdlResult:
    model: KernelModel
    estimate: PosteriorEstimate
    weights: np.ndarray


def fit_pdl(data: Dataset, k: int = 10, sigma: Sigma = "auto", alpha: float = 0.99,
            gamma: float = 1e5, kernel_sigma: float | None = None, local=None,
            reweight: bool = True) -> PdlResult:
    """Estimate posteriors, fit with unit weights, reweight residuals, refit once."""
    estimate = estimate_posteriors(data, k, sigma, alpha, local)
    if kernel_sigma is None:
        if isinstance(sigma, str):
            kernel_sigma = float(knn_search(data.features, k)[0][:, -1].mean()) or 1.0
        else:
            kernel_sigma = float(sigma)
    model = fit_posterior_regressor(data.features, estimate, kernel_sigma, gamma)
    v = np.ones(data.n)
    if reweight:
        v = robust_weights(training_residuals(model, estimate))
        model = fit_posterior_regressor(data.features, estimate, kernel_sigma, gamma, v)
    return PdlResult(model, estimate, v)
