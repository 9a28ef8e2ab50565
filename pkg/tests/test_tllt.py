import json
import math

import numpy as np
import pytest

from graphssl import (
    Dataset,
    DisconnectedError,
    Graph,
    InvalidParameterError,
    TeacherConfig,
    lgc_closed,
    tllt_run,
)
from graphssl.graph import random_walk_matrix
from graphssl.tllt import (
    ConditionalCovariance,
    CurriculumState,
    discriminability,
    feedback,
    frontier,
    learner_step,
    next_batch_size,
    reliability,
    select_batch,
    write_history_jsonl,
)
from oracles import commute_brute, exhaustive_best_subset, random_connected_weights

LOG_2PI_E = math.log(2 * math.pi * math.e)


def reliability_oracle(W, S, L, eps):
    """-H(y_S | y_L) from the Schur complement of the joint covariance."""
    Q = np.diag(W.sum(axis=1)) - W + eps * np.eye(W.shape[0])
    C = np.linalg.inv(Q)
    S, L = list(S), list(L)
    if not S:
        return 0.0
    cond = C[np.ix_(S, S)] - C[np.ix_(S, L)] @ np.linalg.solve(C[np.ix_(L, L)], C[np.ix_(L, S)])
    return -0.5 * (len(S) * LOG_2PI_E + np.linalg.slogdet(cond)[1])


def margin_oracle(W, x, class_sets):
    means = sorted(np.mean([commute_brute(W, x, j) for j in c]) for c in class_sets)
    return means[1] - means[0]


def random_instance(seed, n=8):
    rng = np.random.default_rng(seed)
    W = random_connected_weights(rng, n, p=0.4)
    L = [0, 1]
    return W, Graph.from_dense(W), L, [[0], [1]]


def chain(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


class TestReliability:
    def test_empty_set(self, path3):
        assert reliability(path3, [], [0]) == 0.0

    def test_unit_variance(self):
        # one unlabeled node tied to a labeled one with weight 1 - eps has
        # precision 1 and conditional variance 1
        eps = 1e-6
        g = Graph.from_dense([[0, 1 - eps], [1 - eps, 0]])
        assert reliability(g, [1], [0], eps) == pytest.approx(-0.5 * LOG_2PI_E, rel=1e-12)
        assert -0.5 * LOG_2PI_E == pytest.approx(-1.4189, abs=1e-4)

    def test_matches_schur_complement_oracle(self):
        for seed in range(10):
            W, g, L, _ = random_instance(seed)
            for S in ([2], [3, 5], [2, 4, 7]):
                assert reliability(g, S, L, 1e-3) == pytest.approx(reliability_oracle(W, S, L, 1e-3), rel=1e-8)

    def test_more_labeled_neighbors_more_reliable(self):
        # node 3 touches labeled nodes 0, 1, 2; node 4 only touches node 5
        g = Graph.from_edges(6, [(0, 3), (1, 3), (2, 3), (0, 1), (1, 2), (2, 5), (4, 5)])
        assert reliability(g, [3], [0, 1, 2]) > reliability(g, [4], [0, 1, 2])

    def test_labeled_member_rejected(self, path3):
        with pytest.raises(InvalidParameterError):
            reliability(path3, [0], [0])


class TestDiscriminability:
    def test_equidistant_contributes_zero(self):
        g = chain(5)
        assert discriminability(g, [2], [[0], [4]]) == pytest.approx(0.0, abs=1e-9)

    def test_matches_oracle(self):
        for seed in range(5):
            W, g, _, classes = random_instance(seed)
            for x in range(2, 8):
                assert discriminability(g, [x], classes) == pytest.approx(margin_oracle(W, x, classes), rel=1e-8)

    def test_barbell_side(self):
        edges = [(i, j) for i in range(4) for j in range(i + 1, 4)]
        edges += [(i + 4, j + 4) for i, j in edges] + [(3, 4)]
        g = Graph.from_edges(8, edges)
        near_a = discriminability(g, [1], [[0], [7]])
        mid = discriminability(g, [3], [[0], [7]])
        assert near_a > mid > 0

    def test_additive(self):
        W, g, _, classes = random_instance(3)
        a = discriminability(g, [2, 3], classes)
        b = discriminability(g, [4, 6], classes)
        assert discriminability(g, [2, 3, 4, 6], classes) == pytest.approx(a + b, rel=1e-12)

    def test_single_class_warns(self, path3):
        with pytest.warns(UserWarning):
            assert discriminability(path3, [1], [[0], []]) == 0.0

    def test_unreachable_class_uses_largest_finite_time(self):
        g = Graph.from_edges(5, [(0, 1), (1, 2), (3, 4)])
        # class 1 lives in the other component
        val = discriminability(g, [1], [[0], [3]])
        assert np.isfinite(val) and val > 0


class TestSelectBatch:
    def score(self, g, L, classes, eps=1e-6):
        cov = ConditionalCovariance(g, np.array(L), eps)
        return lambda S: cov.reliability(S) + discriminability(g, S, classes)

    def test_greedy_equals_exhaustive_for_single(self):
        for seed in range(20):
            W, g, L, classes = random_instance(seed)
            lab = np.zeros(g.n, dtype=bool)
            lab[L] = True
            fr = frontier(g, lab)
            best, _ = exhaustive_best_subset(self.score(g, L, classes), fr.tolist(), 1)
            assert select_batch(g, fr, lab, classes, 1) == best

    def test_pair_on_six_nodes(self):
        g = Graph.from_dense(random_connected_weights(np.random.default_rng(7), 6, p=0.6))
        lab = np.zeros(6, dtype=bool)
        lab[[0, 1]] = True
        fr = frontier(g, lab)
        best, best_val = exhaustive_best_subset(self.score(g, [0, 1], [[0], [1]]), fr.tolist(), 2)
        got = select_batch(g, fr, lab, [[0], [1]], 2)
        assert self.score(g, [0, 1], [[0], [1]])(got) == pytest.approx(best_val, rel=1e-9)

    def test_pair_greedy_rate(self):
        hits = 0
        for seed in range(50):
            W, g, L, classes = random_instance(100 + seed)
            lab = np.zeros(g.n, dtype=bool)
            lab[L] = True
            fr = frontier(g, lab)
            if fr.size < 2:
                hits += 1
                continue
            f = self.score(g, L, classes)
            _, best_val = exhaustive_best_subset(f, fr.tolist(), 2)
            hits += f(select_batch(g, fr, lab, classes, 2)) >= best_val - 1e-9 * abs(best_val)
        assert hits >= 45

    def test_tie_goes_to_lowest_index(self):
        # nodes 1 and 3 are mirror images around seed 2
        g = chain(5)
        lab = np.array([False, False, True, False, False])
        with pytest.warns(UserWarning):
            assert select_batch(g, [1, 3], lab, [[2], []], 1) == [1]

    def test_strictly_better_node_wins(self):
        # node 4 is a pendant of node 3, both far from class 1; duplicating
        # node 3's structure through node 5 does not beat node 2
        g = Graph.from_edges(6, [(0, 2, 5.0), (2, 1), (0, 3), (3, 1), (3, 4), (0, 5), (5, 1)])
        lab = np.zeros(6, dtype=bool)
        lab[[0, 1]] = True
        f = self.score(g, [0, 1], [[0], [1]])
        pick = select_batch(g, [2, 3, 5], lab, [[0], [1]], 1)
        assert pick == [2] and f([2]) > max(f([3]), f([5]))

    def test_errors(self, path3):
        lab = np.array([True, False, False])
        with pytest.raises(DisconnectedError):
            select_batch(path3, [], lab, [[0], [2]], 1)
        with pytest.raises(InvalidParameterError):
            select_batch(path3, [1], lab, [[0], [2]], 2)


class TestLearner:
    def test_chain_first_round(self):
        g = chain(5)
        data = Dataset(np.arange(5.0)[:, None], [0, -1, -1, -1, 1], 2)
        state = CurriculumState.start(data)
        F0 = state.F.copy()
        learner_step(random_walk_matrix(g), state, [1, 3])
        np.testing.assert_array_equal(state.F[[0, 4]], F0[[0, 4]])
        np.testing.assert_allclose(state.F[1], [0.5, 0])
        np.testing.assert_allclose(state.F[3], [0, 0.5])
        np.testing.assert_array_equal(state.F[2], [0, 0])
        assert state.assigned[1] == 0 and state.assigned[3] == 1
        assert state.labeled.tolist() == [True, True, False, True, True]

    def test_all_neighbors_one_class(self):
        g = Graph.from_edges(4, [(0, 3), (1, 3), (2, 3)])
        data = Dataset(np.zeros((4, 1)), [0, 0, 1, -1], 2)
        state = CurriculumState.start(data)
        learner_step(random_walk_matrix(g), state, [3])
        assert state.assigned[3] == 0

    def test_seed_rows_never_change(self):
        W, g, L, _ = random_instance(2, n=10)
        labels = -np.ones(10, dtype=int)
        labels[L] = [0, 1]
        data = Dataset(np.zeros((10, 1)), labels, 2)
        state = CurriculumState.start(data)
        P = random_walk_matrix(g)
        F0 = state.F[L].copy()
        while not state.labeled.all():
            fr = frontier(g, state.labeled)
            learner_step(P, state, fr[:1])
            np.testing.assert_array_equal(state.F[L], F0)

    def test_rejects_labeled(self, path3):
        data = Dataset(np.zeros((3, 1)), [0, -1, 1], 2)
        with pytest.raises(InvalidParameterError):
            learner_step(random_walk_matrix(path3), CurriculumState.start(data), [0])


class TestFeedback:
    def test_zero_point(self):
        assert feedback(np.full((2, 2), 0.5), 1.0, 2) == pytest.approx(0.0, abs=1e-15)

    def test_known_value(self):
        # |F|^2 - s/c = 1.5 - 0.5 = 1
        F = np.array([[math.sqrt(1.5), 0.0]])
        assert feedback(F, 1.0, 1) == pytest.approx(2 / (1 + math.exp(-1)) - 1, rel=1e-12)
        assert feedback(F, 1.0, 1) == pytest.approx(0.46212, abs=1e-5)

    def test_limits_and_monotonicity(self):
        vals = [feedback(np.array([[v, 0.0]]), 1.0, 1) for v in (0.0, 0.5, 1.0, 2.0, 3.0)]
        assert np.all(np.diff(vals) > 0)
        assert all(-1 < v < 1 for v in vals)
        assert feedback(np.array([[1e3, 0.0]]), 1.0, 1) == pytest.approx(1.0)

    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            feedback(np.ones((1, 1)), 1.0, 1)

    def test_batch_size_rule(self):
        assert next_batch_size(10, 0.46) == 5
        assert next_batch_size(10, -0.3) == 1
        assert next_batch_size(0, 0.9) == 1
        assert next_batch_size(7, 1.0) == 7


class TestRun:
    def test_labeled_only(self):
        data = Dataset([[0.0], [1.0]], [0, 1], 2)
        res = tllt_run(data, Graph.from_dense([[0, 1], [1, 0]]))
        assert res.iterations == 0 and res.history == []
        np.testing.assert_array_equal(res.scores, np.eye(2))

    def test_history_partitions_nodes(self, moons200):
        data, g = moons200
        res = tllt_run(data, g)
        seen = np.concatenate([data.labeled_indices] + [np.asarray(r.selected) for r in res.history])
        assert np.array_equal(np.sort(seen), np.arange(data.n))
        assert len(res.history) <= data.n
        for r in res.history:
            assert r.s >= 1 and len(r.selected) == r.s
            assert -1 < r.g < 1

    def test_accuracy_against_lgc(self, moons200):
        data, g = moons200
        mask = ~data.labeled_mask
        tllt_acc = np.mean(tllt_run(data, g).predicted[mask] == data.truth[mask])
        lgc_acc = np.mean(lgc_closed(g, data, 0.99).predicted[mask] == data.truth[mask])
        assert tllt_acc >= lgc_acc - 0.02

    def test_disconnected_residual_falls_back(self):
        g = Graph.from_edges(5, [(0, 1), (1, 2), (3, 4)])
        X = np.array([[0.0], [1.0], [2.0], [10.0], [11.0]])
        data = Dataset(X, [0, -1, 1, -1, -1], 2)
        with pytest.warns(UserWarning, match="unreachable"):
            res = tllt_run(data, g)
        assert res.history[-1].fallback
        assert res.predicted[3] == 1 and res.predicted[4] == 1

    def test_needs_two_classes(self, path3):
        data = Dataset(np.zeros((3, 1)), [0, -1, -1], 2)
        with pytest.raises(InvalidParameterError):
            tllt_run(data, path3)

    def test_history_jsonl(self, tmp_path):
        g = chain(6)
        data = Dataset(np.arange(6.0)[:, None], [0, -1, -1, -1, -1, 1], 2, truth=[0, 0, 0, 1, 1, 1])
        res = tllt_run(data, g, TeacherConfig(s_initial=2))
        path = tmp_path / "h.jsonl"
        write_history_jsonl(res.history, path)
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert [r["t"] for r in rows] == list(range(1, len(rows) + 1))
        assert set(rows[0]) == {"t", "S_t", "s_t", "g_t", "accuracy_so_far"}
        assert rows[0]["s_t"] == 2

    def test_config_validation(self):
        with pytest.raises(InvalidParameterError):
            TeacherConfig(gamma_fb=0)
        with pytest.raises(InvalidParameterError):
            TeacherConfig(s_initial=0)
