"""Teaching-to-learn and learning-to-teach curriculum propagation.

A teacher picks a small batch of "easy" unlabeled nodes adjacent to the
labeled set: reliable (low conditional entropy under a Gaussian Markov
field) and discriminable (a large commute-time margin between the two
nearest classes).  The learner labels the batch by one random-walk step, and
its confidence sets the size of the next batch.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from . import _backend
from .errors import DisconnectedError, InvalidParameterError
from .graph import Dataset, Graph, commute_time_matrix, laplacian, random_walk_matrix
from .propagation import PropagationResult

LOG_2PI_E = math.log(2.0 * math.pi * math.e)


@dataclass(frozen=True)
class TeacherConfig:
    gamma_fb: float = 1.0
    epsilon_gmrf: float = 1e-6
    s_initial: int = 1

    def __post_init__(self):
        if not (self.gamma_fb > 0 and self.epsilon_gmrf > 0 and int(self.s_initial) >= 1):
            raise InvalidParameterError("gamma_fb, epsilon_gmrf and s_initial must be positive")


@dataclass
class RoundRecord:
    t: int
    selected: list
    s: int
    g: float
    accuracy: float | None = None
    fallback: bool = False

    def to_dict(self) -> dict:
        out = {"t": self.t, "S_t": self.selected, "s_t": self.s, "g_t": self.g}
        if self.accuracy is not None:
            out["accuracy_so_far"] = self.accuracy
        if self.fallback:
            out["fallback"] = True
        return out


@dataclass
class CurriculumState:
    """Mutable loop state; ``labeled`` is L_t, its complement U_t."""

    initial: np.ndarray
    labeled: np.ndarray
    selected: np.ndarray
    F: np.ndarray
    assigned: np.ndarray
    t: int = 0
    history: list = field(default_factory=list)

    @classmethod
    def start(cls, data: Dataset) -> "CurriculumState":
        mask = data.labeled_mask.copy()
        return cls(initial=mask.copy(), labeled=mask, selected=np.zeros(data.n, dtype=bool),
                   F=data.seeds(), assigned=data.labels.copy())

    @property
    def unlabeled(self) -> np.ndarray:
        return np.flatnonzero(~self.labeled)

    def class_sets(self, num_classes: int) -> list:
        return [np.flatnonzero(self.labeled & (self.assigned == c)) for c in range(num_classes)]


class ConditionalCovariance:
    """Covariance of the unlabeled field given the labeled nodes.

    Precision ``Q = L + eps I``; conditioning on ``labeled`` leaves
    ``Sigma = (Q_UU)^{-1}``.
    """

    def __init__(self, g: Graph, labeled, eps: float):
        labeled = np.asarray(labeled)
        mask = np.zeros(g.n, dtype=bool)
        if labeled.dtype == bool:
            mask[:] = labeled
        else:
            mask[labeled.astype(int)] = True
        self.unlabeled = np.flatnonzero(~mask)
        self.position = np.full(g.n, -1)
        self.position[self.unlabeled] = np.arange(self.unlabeled.size)
        Q = laplacian(g).toarray()
        Q[np.diag_indices_from(Q)] += eps
        Q_uu = Q[np.ix_(self.unlabeled, self.unlabeled)]
        try:
            factor = sla.cho_factor(Q_uu, lower=True)
        except sla.LinAlgError as exc:
            raise InvalidParameterError(
                f"precision block is not positive definite; increase epsilon ({exc})") from exc
        self.cov = sla.cho_solve(factor, np.eye(self.unlabeled.size)) if self.unlabeled.size else np.zeros((0, 0))

    def reliability(self, S) -> float:
        S = [int(s) for s in S]
        if not S:
            return 0.0
        pos = self.position[S]
        if np.any(pos < 0):
            raise InvalidParameterError("reliability set must not contain labeled nodes")
        sign, logdet = np.linalg.slogdet(self.cov[np.ix_(pos, pos)])
        if sign <= 0:
            raise InvalidParameterError("conditional covariance is not positive definite; increase epsilon")
        return -0.5 * (len(S) * LOG_2PI_E + logdet)


def reliability(g: Graph, S, L, eps: float = 1e-6) -> float:
    """``R(S) = -H(y_S | y_L)`` for the Gaussian field with precision ``L + eps I``."""
    return ConditionalCovariance(g, np.asarray(list(L), dtype=int), eps).reliability(S)


def _margins(T: np.ndarray, nodes, class_sets) -> np.ndarray:
    sets = [np.asarray(c, dtype=int) for c in class_sets if len(c)]
    nodes = np.asarray(list(nodes), dtype=int)
    if len(sets) < 2:
        warnings.warn("fewer than two classes are labeled; discriminability is 0", stacklevel=3)
        return np.zeros(nodes.size)
    finite = np.isfinite(T)
    if not finite.all():
        # an unreachable class counts as far away as anything on the graph
        T = np.where(finite, T, T[finite].max())
    means = np.column_stack([T[np.ix_(nodes, c)].mean(axis=1) for c in sets])
    means.sort(axis=1)
    return means[:, 1] - means[:, 0]


def discriminability(g: Graph, S, class_sets) -> float:
    """Sum over S of the commute-time margin between the two nearest classes.

    Each node contributes ``T(x, second nearest) - T(x, nearest) >= 0``.
    Classes in another connected component are placed at the largest finite
    commute time of the graph.
    """
    S = list(S)
    if not S:
        return 0.0
    return float(_margins(commute_time_matrix(g), S, class_sets).sum())


def frontier(g: Graph, labeled: np.ndarray) -> np.ndarray:
    """Unlabeled nodes adjacent to at least one labeled node."""
    touches = np.asarray(g.weights @ labeled.astype(float)).ravel() > 0
    return np.flatnonzero(touches & ~labeled)


def select_batch(g: Graph, candidates, labeled, class_sets, s: int, eps: float = 1e-6,
                 commute=None, covariance: ConditionalCovariance | None = None) -> list:
    """Greedy maximization of ``R(S) + D(S)`` over subsets of ``candidates``.

    Each step adds the candidate with the largest marginal gain; ties go to
    the lowest node index.  ``commute`` and ``covariance`` may be passed to
    reuse precomputed matrices.
    """
    cand = np.unique(np.asarray(list(candidates), dtype=int))
    if cand.size == 0:
        raise DisconnectedError("no unlabeled node is adjacent to the labeled set")
    s = int(s)
    if not 1 <= s <= cand.size:
        raise InvalidParameterError(f"batch size must lie in 1..{cand.size}, got {s}")
    if covariance is None:
        lab = np.asarray(labeled)
        covariance = ConditionalCovariance(g, lab if lab.dtype == bool else lab.astype(int), eps)
    T = commute_time_matrix(g) if commute is None else commute
    margin = dict(zip(cand.tolist(), _margins(T, cand, class_sets)))

    chosen: list = []
    base = 0.0
    remaining = cand.tolist()
    for _ in range(s):
        best, best_gain, best_r = None, -np.inf, 0.0
        for x in remaining:
            r = covariance.reliability(chosen + [x])
            gain = (r - base) + margin[x]
            if gain > best_gain:
                best, best_gain, best_r = x, gain, r
        chosen.append(best)
        remaining.remove(best)
        base = best_r
    return sorted(chosen)


def learner_step(P, state: CurriculumState, S_t) -> np.ndarray:
    """One learner update: every selected row becomes ``P_i F^(t-1)``.

    Rows of the initial labeled set keep their seeds and untouched unlabeled
    rows stay zero.  Nodes of ``S_t`` are then hardened to their argmax class
    and moved into the labeled set.
    """
    S_t = np.asarray(list(S_t), dtype=int)
    if np.any(state.labeled[S_t]):
        raise InvalidParameterError("selected nodes must be unlabeled")
    rows_mask = state.selected.copy()
    rows_mask[S_t] = True
    rows = np.flatnonzero(rows_mask)
    F_new = state.F.copy()
    F_new[rows] = _backend.row_products(P, rows, state.F)
    state.F = F_new
    state.assigned[S_t] = np.argmax(F_new[S_t], axis=1)
    state.selected[S_t] = True
    state.labeled[S_t] = True
    state.t += 1
    return F_new


def feedback(F_S, gamma_fb: float, s: int) -> float:
    """``2 / (1 + exp(-gamma (|F_S|_F^2 - s/c))) - 1``, evaluated as a tanh."""
    F_S = np.atleast_2d(np.asarray(F_S, dtype=float))
    c = F_S.shape[1]
    if s < 1 or c < 2:
        raise InvalidParameterError("feedback needs s >= 1 and at least two classes")
    z = float(np.sum(F_S * F_S)) - s / c
    return math.tanh(0.5 * gamma_fb * z)


def next_batch_size(num_frontier: int, g: float) -> int:
    """``max(1, ceil(b * max(g, 0)))``; the floor of one guarantees progress."""
    return max(1, math.ceil(num_frontier * max(g, 0.0)))


@dataclass
class TlltResult(PropagationResult):
    history: list = field(default_factory=list)
    assigned: np.ndarray | None = None


def _accuracy_so_far(state: CurriculumState, truth) -> float | None:
    if truth is None:
        return None
    done = state.labeled & ~state.initial
    if not done.any():
        return None
    return float(np.mean(state.assigned[done] == np.asarray(truth)[done]))


def tllt_run(data: Dataset, g: Graph, cfg: TeacherConfig = TeacherConfig(), truth=None) -> TlltResult:
    """Alternate teacher selection, learner propagation and feedback until
    every node is labeled.

    Prediction for each node is the class it was assigned when selected;
    ``scores`` holds the learner's final soft rows.  A residual component
    unreachable from the labeled set is labeled by the nearest (Euclidean)
    labeled sample, with a warning.
    """
    if data.n != g.n:
        raise InvalidParameterError("dataset and graph sizes differ")
    if np.unique(data.labels[data.labeled_mask]).size < 2:
        raise InvalidParameterError("TLLT needs labeled samples from at least two classes")
    if truth is None:
        truth = data.truth
    state = CurriculumState.start(data)
    P = random_walk_matrix(g)
    T = commute_time_matrix(g)
    s = int(cfg.s_initial)

    while not state.labeled.all():
        fr = frontier(g, state.labeled)
        if fr.size == 0:
            rest = state.unlabeled
            warnings.warn(f"{rest.size} nodes are unreachable from the labeled set; "
                          "assigning them to the nearest labeled sample", stacklevel=2)
            lab = np.flatnonzero(state.labeled)
            d2 = ((data.features[rest, None, :] - data.features[None, lab, :]) ** 2).sum(axis=2)
            state.assigned[rest] = state.assigned[lab[np.argmin(d2, axis=1)]]
            state.F[rest] = 0.0
            state.F[rest, state.assigned[rest]] = 1.0
            state.labeled[rest] = True
            state.t += 1
            state.history.append(RoundRecord(state.t, rest.tolist(), int(rest.size), 0.0,
                                             _accuracy_so_far(state, truth), fallback=True))
            break
        s_t = min(s, fr.size)
        cov = ConditionalCovariance(g, state.labeled, cfg.epsilon_gmrf)
        S_t = select_batch(g, fr, state.labeled, state.class_sets(data.num_classes), s_t,
                           commute=T, covariance=cov)
        learner_step(P, state, S_t)
        g_t = feedback(state.F[S_t], cfg.gamma_fb, s_t)
        state.history.append(RoundRecord(state.t, [int(v) for v in S_t], s_t, g_t,
                                         _accuracy_so_far(state, truth)))
        s = next_batch_size(frontier(g, state.labeled).size, g_t)

    scores = np.zeros_like(state.F)
    scores[np.arange(data.n), state.assigned] = 1.0
    return TlltResult(scores, iterations=state.t, converged=True,
                      info={"soft_scores": state.F}, history=state.history,
                      assigned=state.assigned.copy())


def write_history_jsonl(history, path):
    with Path(path).open("w") as fh:
        for rec in history:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
