"""Semi-supervised learning with the deformed graph Laplacian.

Besides the usual smoothness term ``f^T L f`` the objective carries a
per-node penalty ``sum_i (1 - D_ii / vol) f_i^2`` that shrinks low-degree
(boundary or bridge) nodes more than high-degree interior nodes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import InvalidParameterError, SingularSystemError
from .graph import Dataset, Graph, Sigma, knn_search, laplacian
from .pdl import KernelModel, gaussian_gram
from .propagation import PropagationResult

PSD_RTOL = 1e-12


@dataclass(frozen=True)
class DeformedConfig:
    beta: float = 1.0
    gamma: float = 0.1
    alpha_rkhs: float = 1e-3
    sigma: Sigma = "auto"

    def __post_init__(self):
        if self.beta < 0 or self.gamma < 0:
            raise InvalidParameterError("beta and gamma must be nonnegative")
        if not self.alpha_rkhs > 0:
            raise InvalidParameterError("alpha_rkhs must be positive")

    def kernel_sigma(self, data: Dataset, k: int = 10) -> float:
        if isinstance(self.sigma, str):
            k = min(k, data.n - 1)
            s = float(knn_search(data.features, k)[0][:, -1].mean()) if k >= 1 else 1.0
            return s if s > 0 else 1.0
        return float(self.sigma)


def deformation_diagonal(g: Graph) -> np.ndarray:
    """Diagonal of ``I - D / vol``."""
    return 1.0 - g.degrees / g.volume


def deformed_penalty(g: Graph, f) -> float:
    f = np.asarray(f, dtype=float)
    return float(np.sum(deformation_diagonal(g) * f * f))


def _selector(data: Dataset) -> np.ndarray:
    return data.labeled_mask.astype(float)


def system_matrix(g: Graph, data: Dataset, cfg: DeformedConfig) -> np.ndarray:
    """``J + beta L + gamma (I - D/vol)``, dense."""
    A = cfg.beta * laplacian(g).toarray()
    A[np.diag_indices_from(A)] += _selector(data) + cfg.gamma * deformation_diagonal(g)
    return A


def objective(g: Graph, data: Dataset, cfg: DeformedConfig, F, Y=None) -> float:
    """Transductive objective summed over score columns (signed seeds by default)."""
    F = np.asarray(F, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    if Y is None:
        Y = data.signed_seeds()[:, :F.shape[1]]
    Y = np.asarray(Y, dtype=float).reshape(F.shape)
    J = _selector(data)
    fit = np.sum(J[:, None] * (F - Y) ** 2)
    smooth = np.sum(F * (laplacian(g) @ F))
    deform = np.sum(deformation_diagonal(g)[:, None] * F * F)
    return float(fit + cfg.beta * smooth + cfg.gamma * deform)


def deformed_transductive(g: Graph, data: Dataset, cfg: DeformedConfig = DeformedConfig()) -> PropagationResult:
    """Per class column, ``f* = (J + beta L + gamma (I - D/vol))^{-1} J y``.

    Seeds use +1 for the column's class, -1 for other labeled samples and 0
    for unlabeled ones.  A positive semidefinite but singular system (e.g.
    ``beta = gamma = 0``) returns the minimum-norm minimizer; an indefinite
    one raises.
    """
    if data.n != g.n:
        raise InvalidParameterError("dataset and graph sizes differ")
    data.require_labels()
    A = system_matrix(g, data, cfg)
    rhs = _selector(data)[:, None] * data.signed_seeds()
    try:
        F = sla.cho_solve(sla.cho_factor(A, lower=True), rhs)
    except sla.LinAlgError:
        w = np.linalg.eigvalsh(A)
        if w[0] < -PSD_RTOL * max(abs(w[-1]), 1.0):
            raise SingularSystemError(
                f"system matrix is indefinite (smallest eigenvalue {w[0]:.4g}); use a smaller gamma")
        F = np.linalg.lstsq(A, rhs, rcond=None)[0]
    return PropagationResult(F, iterations=0, converged=True)


def deformed_inductive(data: Dataset, g: Graph, cfg: DeformedConfig = DeformedConfig()) -> KernelModel:
    """Bias-free kernel expansion ``f = sum_i a_i k(x_i, .)`` over all samples.

    Coefficients solve ``(alpha I + J Omega + beta L Omega + gamma N Omega) a = J y``
    per class, ``N = I - D/vol``.  The returned model stores ``alpha_rkhs``
    in its ``gamma`` slot.
    """
    if data.n != g.n:
        raise InvalidParameterError("dataset and graph sizes differ")
    data.require_labels()
    sigma = cfg.kernel_sigma(data)
    Omega = gaussian_gram(data.features, data.features, sigma)
    J = _selector(data)
    B = cfg.beta * (laplacian(g) @ Omega) + (J + cfg.gamma * deformation_diagonal(g))[:, None] * Omega
    B[np.diag_indices_from(B)] += cfg.alpha_rkhs
    rhs = J[:, None] * data.signed_seeds()
    try:
        coef = sla.solve(B, rhs)
    except (sla.LinAlgError, ValueError) as exc:
        raise SingularSystemError(f"inductive system is singular: {exc}") from exc
    if not np.all(np.isfinite(coef)):
        raise SingularSystemError("inductive system is singular")
    return KernelModel(data.features.copy(), coef, np.zeros(coef.shape[1]), sigma,
                       float(cfg.alpha_rkhs), bias_free=True, kind="deformed")


def deformed_inductive_result(data: Dataset, g: Graph, cfg: DeformedConfig = DeformedConfig()) -> PropagationResult:
    model = deformed_inductive(data, g, cfg)
    return PropagationResult(model.decision_function(data.features), info={"model": model})
