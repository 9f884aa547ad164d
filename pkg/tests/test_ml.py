import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from quenchmap.ml import (GbtModel, SvmModel, compute_metrics, gbt_predict, gbt_train,
                          gram_fidelity, gram_linear, roc_auc, svm_predict, svm_train)
from quenchmap.ml.gbt import Tree
from quenchmap.ml.svm import _bias, duality_gap, kkt_violations
from quenchmap.quench import StateVector


def blobs(n=20, seed=0, gap=3.0):
    rng = np.random.default_rng(seed)
    y = np.array([0, 1] * (n // 2))
    x = rng.normal(scale=0.5, size=(n, 2)) + np.where(y[:, None] == 1, gap, -gap) * np.array([1.0, 0.5])
    return x, y


def random_problem(seed, n=40, d=3):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    y = (x @ rng.normal(size=d) + 0.7 * rng.normal(size=n) > 0).astype(int)
    y[:2] = [0, 1]
    return x, y


class TestGram:
    def test_single_row(self):
        assert gram_linear([[3.0, 4.0]]).values.tolist() == [[25.0]]

    def test_orthogonal(self):
        assert gram_linear([[1.0, 0.0]], [[0.0, 2.0]]).values.tolist() == [[0.0]]

    def test_loop_oracle(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
        k = gram_linear(a, b).values
        for i in range(3):
            for j in range(3):
                assert k[i, j] == pytest.approx(sum(a[i, t] * b[j, t] for t in range(4)), abs=1e-14)

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            gram_linear(np.ones((2, 3)), np.ones((2, 4)))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_psd_and_symmetric(self, seed):
        f = np.random.default_rng(seed).uniform(-1, 1, size=(25, 6))
        g = gram_linear(f)
        assert np.array_equal(g.values, g.values.T)
        assert g.is_psd()

    def test_fidelity_basics(self):
        e0 = StateVector(1, [1.0, 0.0])
        e1 = StateVector(1, [0.0, 1.0])
        k = gram_fidelity([e0, e1, e0]).values
        assert k.tolist() == [[1.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]

    def test_fidelity_by_hand(self):
        rng = np.random.default_rng(4)
        states = []
        for _ in range(2):
            v = rng.normal(size=4) + 1j * rng.normal(size=4)
            states.append(v / np.linalg.norm(v))
        overlap = sum(np.conj(states[0][t]) * states[1][t] for t in range(4))
        k = gram_fidelity(states).values
        assert k[0, 1] == pytest.approx(abs(overlap) ** 2, abs=1e-14)
        assert np.all(np.abs(np.diag(k) - 1.0) <= 1e-10)
        assert np.all((k >= 0) & (k <= 1))

    def test_fidelity_dimension_mismatch(self):
        with pytest.raises(ValueError):
            gram_fidelity([np.ones(2) / math.sqrt(2)], [np.ones(4) / 2])


class TestSvm:
    def test_two_point_closed_form(self):
        model = svm_train(np.eye(2), [0, 1], C=10.0)
        assert model.alphas.tolist() == [1.0, 1.0]
        assert model.bias == 0.0
        assert model.support_rows.tolist() == [0, 1]

    def test_separable_blobs(self):
        x, y = blobs()
        model = svm_train(gram_linear(x), y, C=10.0)
        _, labels = svm_predict(model, gram_linear(x, x))
        assert compute_metrics(y, labels, labels.astype(float)).accuracy == 1.0
        assert labels.tolist() == y.tolist()

    def test_contradictory_duplicates(self):
        x = np.array([[1.0, 1.0], [1.0, 1.0], [-1.0, 0.0], [2.0, -1.0]])
        y = np.array([0, 1, 0, 1])
        model = svm_train(gram_linear(x), y, C=0.5)
        assert model.alphas[0] == pytest.approx(0.5) and model.alphas[1] == pytest.approx(0.5)

    def test_zero_alphas_predict_bias(self):
        model = SvmModel(np.zeros(3), -0.7, 1.0, np.array([1.0, -1.0, 1.0]))
        scores, labels = svm_predict(model, np.ones((4, 3)))
        assert scores.tolist() == [-0.7] * 4 and labels.tolist() == [0] * 4

    def test_single_support_vector_by_hand(self):
        model = SvmModel(np.array([0.0, 2.0]), 0.25, 5.0, np.array([1.0, -1.0]))
        scores, labels = svm_predict(model, np.array([[9.0, 0.5], [1.0, -1.0]]))
        assert scores.tolist() == [2.0 * -1.0 * 0.5 + 0.25, 2.0 * -1.0 * -1.0 + 0.25]
        assert labels.tolist() == [0, 1]

    def test_errors(self):
        with pytest.raises(ValueError):
            svm_train(np.eye(3), [1, 1, 1])
        with pytest.raises(ValueError):
            svm_train(np.eye(2), [0, 1], C=0.0)
        model = svm_train(np.eye(2), [0, 1])
        with pytest.raises(ValueError):
            svm_predict(model, np.ones((1, 3)))

    def test_non_psd_is_shifted_or_rejected(self):
        k = np.array([[1.0, 0.0], [0.0, -1.2e-8]])
        with pytest.warns(UserWarning):
            svm_train(k, [0, 1])
        with pytest.raises(ValueError), pytest.warns(UserWarning):
            svm_train(np.array([[1.0, 2.0], [2.0, 1.0]]), [0, 1])

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([0.1, 1.0, 10.0, 100.0]))
    def test_optimality_conditions(self, seed, C):
        x, y = random_problem(seed)
        k = gram_linear(x)
        model = svm_train(k, y, C=C)
        assert model.converged
        ys = np.where(y == 1, 1.0, -1.0)
        assert abs(float(model.alphas @ ys)) < 1e-8
        assert np.all((model.alphas >= 0) & (model.alphas <= C))
        q = ys[:, None] * ys[None, :] * k.values
        primal, dual = duality_gap(q, model.alphas, model.bias, ys, C)
        assert primal - dual <= 1e-6 * max(1.0, abs(dual))
        assert np.max(kkt_violations(model, k, y)) <= 1e-4

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.01, 100.0))
    def test_scaling_invariance(self, seed, factor):
        x, y = random_problem(seed, n=30)
        k = gram_linear(x).values
        base = svm_train(k, y, C=1.0)
        scaled = svm_train(factor * k, y, C=1.0 / factor)
        _, l1 = svm_predict(base, k)
        _, l2 = svm_predict(scaled, factor * k)
        assert l1.tolist() == l2.tolist()

    def test_deterministic_and_round_trip(self, tmp_path):
        x, y = random_problem(3)
        a = svm_train(gram_linear(x), y, C=3.0)
        b = svm_train(gram_linear(x), y, C=3.0)
        assert a.alphas.tobytes() == b.alphas.tobytes() and a.bias == b.bias
        a.save(tmp_path / "m.json")
        back = SvmModel.from_dict(json.loads((tmp_path / "m.json").read_text()))
        assert back.alphas.tobytes() == a.alphas.tobytes() and back.bias == a.bias
        with pytest.raises(ValueError):
            SvmModel.from_dict({"format": "other"})

    def test_bias_when_every_alpha_is_bounded(self):
        # K = 0, y = (+1, +1, -1), alpha = (C, 0, C): a positive at zero needs
        # b >= 1 and a positive at C needs b <= 1, so KKT pins b = 1
        y = np.array([1.0, 1.0, -1.0])
        alpha = np.array([1.0, 0.0, 1.0])
        assert _bias(alpha, -np.ones(3), y, 1.0) == 1.0

    def test_tiny_features_predict_majority(self):
        x, y = random_problem(8, n=41)
        k = gram_linear(1e-6 * x)
        model = svm_train(k, y, C=1.0)
        _, labels = svm_predict(model, k)
        majority = int(y.mean() > 0.5)
        assert (labels == majority).all()
        assert np.max(kkt_violations(model, k, y)) <= 1e-4


class TestGbt:
    def test_single_binary_feature(self):
        rng = np.random.default_rng(0)
        y = rng.integers(0, 2, 40)
        y[:2] = [0, 1]
        x = np.column_stack([rng.normal(size=40), y.astype(float)])
        model = gbt_train(x, y, n_trees=10, max_depth=1)
        _, labels = gbt_predict(model, x)
        assert (labels == y).all()

    def test_zero_trees(self):
        y = np.array([1, 0, 0, 0])
        prob, _ = gbt_predict(gbt_train(np.zeros((4, 1)), y, n_trees=0), np.ones((3, 1)))
        np.testing.assert_allclose(prob, 0.25, atol=1e-15)

    def test_xor(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(-1, 1, size=(50, 2))
        y = ((x[:, 0] > 0) ^ (x[:, 1] > 0)).astype(int)
        model = gbt_train(x, y, n_trees=100, max_depth=2, learning_rate=0.3)
        _, labels = gbt_predict(model, x)
        assert np.mean(labels == y) >= 0.95

    def test_empty_model_is_one_half(self):
        model = GbtModel([], 0.1, 2, 0, 0.0, 3)
        assert gbt_predict(model, np.zeros((5, 3)))[0].tolist() == [0.5] * 5

    def test_leaf_clamp(self):
        # perfectly separated rows push the Newton step towards infinity
        x = np.array([[0.0], [1.0]])
        model = gbt_train(x, [0, 1], n_trees=1, max_depth=1, learning_rate=1.0)
        assert max(abs(v) for v in model.trees[0].value) <= 10.0
        prob, _ = gbt_predict(model, x)
        assert prob.max() <= expit(10.0)

    def test_hand_built_stump(self):
        tree = Tree(feature=[0, -1, -1], threshold=[0.5, 0.0, 0.0], left=[1, -1, -1],
                    right=[2, -1, -1], value=[0.0, -2.0, 3.0])
        model = GbtModel([tree], 0.5, 1, 1, 0.1, 1)
        prob, labels = gbt_predict(model, np.array([[0.0], [0.5], [2.0]]))
        np.testing.assert_allclose(prob, expit([0.1 - 1.0, 0.1 - 1.0, 0.1 + 1.5]), atol=1e-15)
        assert labels.tolist() == [0, 0, 1]

    def test_thresholds_between_observed_values(self):
        x, y = random_problem(2, n=60, d=4)
        model = gbt_train(x, y, n_trees=20, max_depth=3)
        for tree in model.trees:
            for f, thr in zip(tree.feature, tree.threshold):
                if f >= 0:
                    col = x[:, f]
                    assert col.min() < thr < col.max()
                    assert not np.any(col == thr)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([0.05, 0.1, 0.3]), st.integers(1, 3))
    def test_monotone_training_loss(self, seed, rate, depth):
        x, y = random_problem(seed, n=50)
        model = gbt_train(x, y, n_trees=30, max_depth=depth, learning_rate=rate)
        assert np.all(np.diff(model.train_loss) <= 1e-12)

    def test_subsample_uses_seed(self):
        x, y = random_problem(5, n=60)
        a = gbt_train(x, y, n_trees=5, subsample=0.5, seed=1)
        b = gbt_train(x, y, n_trees=5, subsample=0.5, seed=1)
        c = gbt_train(x, y, n_trees=5, subsample=0.5, seed=2)
        assert a.to_dict() == b.to_dict() and a.to_dict() != c.to_dict()
        assert gbt_train(x, y, n_trees=5, seed=1).to_dict() == gbt_train(x, y, n_trees=5, seed=9).to_dict()

    def test_round_trip(self, tmp_path):
        x, y = random_problem(6)
        model = gbt_train(x, y, n_trees=8, max_depth=2)
        model.save(tmp_path / "g.json")
        back = GbtModel.from_dict(json.loads((tmp_path / "g.json").read_text()))
        assert gbt_predict(back, x)[0].tobytes() == gbt_predict(model, x)[0].tobytes()

    def test_errors(self):
        with pytest.raises(ValueError):
            gbt_train(np.zeros((3, 1)), [1, 1, 1])
        model = gbt_train(np.arange(4.0)[:, None], [0, 0, 1, 1], n_trees=2)
        with pytest.raises(ValueError):
            gbt_predict(model, np.zeros((2, 2)))


class TestMetrics:
    def test_perfect(self):
        y = np.array([0, 1, 1, 0, 1])
        r = compute_metrics(y, y, y.astype(float))
        assert (r.accuracy, r.precision, r.recall, r.f1, r.auc) == (1.0, 1.0, 1.0, 1.0, 1.0)

    def test_random_scores(self):
        rng = np.random.default_rng(0)
        y = rng.integers(0, 2, 1000)
        assert abs(roc_auc(y, rng.random(1000)) - 0.5) <= 0.05

    def test_all_positive_quarter_prevalence(self):
        y = np.array([1] * 25 + [0] * 75)
        r = compute_metrics(y, np.ones(100, dtype=int), np.ones(100))
        assert (r.recall, r.precision, r.accuracy) == (1.0, 0.25, 0.5)
        assert r.accuracy_plain == 0.25
        assert r.auc == 0.5

    def test_f1_identity(self):
        y = np.array([1, 1, 0, 0, 1, 0])
        p = np.array([1, 0, 1, 0, 1, 0])
        r = compute_metrics(y, p, p.astype(float))
        assert r.f1 == pytest.approx(2 * r.precision * r.recall / (r.precision + r.recall), abs=1e-15)

    def test_zero_denominators(self):
        y = np.array([1, 0, 1])
        r = compute_metrics(y, np.zeros(3, dtype=int), np.zeros(3))
        assert (r.precision, r.recall, r.f1) == (0.0, 0.0, 0.0)

    def test_auc_ties_half_credit(self):
        assert roc_auc([0, 1], [0.3, 0.3]) == 0.5
        assert roc_auc([0, 1, 1], [0.1, 0.1, 0.9]) == 0.75

    def test_single_class(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            r = compute_metrics([1, 1], [1, 0], [0.2, 0.1])
        assert math.isnan(r.auc) and r.recall == 0.5 and caught
        with pytest.raises(ValueError):
            roc_auc([1, 1], [0.1, 0.2])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            compute_metrics([0, 1], [0, 1, 1], [0.0, 1.0])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_auc_monotone_invariance(self, seed):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, 60)
        y[:2] = [0, 1]
        s = rng.normal(size=60)
        assert roc_auc(y, np.exp(3 * s) + 7) == roc_auc(y, s)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_ranges(self, seed):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, 30)
        y[:2] = [0, 1]
        r = compute_metrics(y, rng.integers(0, 2, 30), rng.random(30))
        for v in r.as_dict().values():
            assert 0.0 <= v <= 1.0
