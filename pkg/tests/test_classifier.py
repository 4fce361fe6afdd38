import json

import numpy as np
import pytest

from flame.classifier import (
    KernelSpec,
    bce_loss,
    deserialize_svm,
    kernel_eval,
    kernel_matrix,
    median_heuristic_gamma,
    mlp_flat_params,
    mlp_forward,
    mlp_from_flat,
    mlp_gradients,
    mlp_init,
    serialize_svm,
    svm_decision,
    svm_weight_vector,
    train_mlp,
    train_svm,
)
from flame.errors import ConfigError, DimensionError, SingleClassError

from .datasets import separable_2d
from .oracles import central_difference_gradient, svm_dual_qp_oracle


class TestKernelEval:
    def test_rbf_zero_distance(self):
        spec = KernelSpec(kind="rbf", gamma=2.0)
        assert kernel_eval(spec, [1.0, 2.0], [1.0, 2.0]) == 1.0

    def test_rbf_log_two(self):
        spec = KernelSpec(kind="rbf", gamma=1.0)
        x = np.array([0.0])
        y = np.array([np.sqrt(np.log(2.0))])
        assert kernel_eval(spec, x, y) == pytest.approx(0.5, rel=1e-12)

    def test_linear_arithmetic(self):
        spec = KernelSpec(kind="linear")
        assert kernel_eval(spec, [1.0, 2.0], [3.0, 4.0]) == 11.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            kernel_eval(KernelSpec(kind="linear"), [1.0], [1.0, 2.0])

    def test_rbf_requires_gamma(self):
        with pytest.raises(ConfigError):
            KernelSpec(kind="rbf")

    def test_matrix_matches_scalar(self):
        rng = np.random.default_rng(1)
        A = rng.normal(size=(7, 3))
        B = rng.normal(size=(5, 3))
        spec = KernelSpec(kind="rbf", gamma=0.7)
        K = kernel_matrix(spec, A, B)
        for i in range(7):
            for j in range(5):
                assert K[i, j] == pytest.approx(
                    kernel_eval(spec, A[i], B[j]), rel=1e-12)


class TestTrainSvm:
    def test_two_point_hard_margin(self):
        X = np.array([[1.0, 0.0], [-1.0, 0.0]])
        y = np.array([1.0, -1.0])
        model = train_svm(X, y, C=10.0, kernel=KernelSpec(kind="linear"))
        w = svm_weight_vector(model)
        np.testing.assert_allclose(w, [1.0, 0.0], atol=1e-6)
        assert model.bias == pytest.approx(0.0, abs=1e-6)
        assert len(model.alphas) == 2
        np.testing.assert_allclose(model.alphas, [0.5, 0.5], atol=1e-6)

    def test_xor_with_rbf(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
        y = np.array([1.0, 1.0, -1.0, -1.0])
        model = train_svm(X, y, C=10.0, kernel=KernelSpec(kind="rbf", gamma=1.0))
        scores = svm_decision(model, X)
        assert np.all(np.sign(scores) == y)

    def test_matches_dense_qp_oracle(self):
        X, y = separable_2d(seed=42)
        kernel = KernelSpec(kind="linear")
        model = train_svm(X, y, C=1e6, kernel=kernel)
        K = kernel_matrix(kernel, X, X)
        alpha_oracle, bias_oracle = svm_dual_qp_oracle(X, y, 1e6, K)
        w_ours = svm_weight_vector(model)
        w_oracle = (alpha_oracle * y) @ X
        assert np.linalg.norm(w_ours - w_oracle) / np.linalg.norm(
            w_oracle) < 1e-3
        assert abs(model.bias - bias_oracle) < 1e-3 * max(1.0, abs(bias_oracle))

    def test_single_class_rejected(self):
        X = np.eye(3)
        with pytest.raises(SingleClassError):
            train_svm(X, np.ones(3), C=1.0, kernel=KernelSpec(kind="linear"))

    def test_dual_constraints_hold(self):
        rng = np.random.default_rng(7)
        X = np.vstack([rng.normal(-1, 1, size=(40, 3)),
                       rng.normal(1, 1, size=(40, 3))])
        y = np.concatenate([-np.ones(40), np.ones(40)])
        C = 1.0
        model = train_svm(X, y, C=C, kernel=KernelSpec(kind="rbf", gamma=0.5))
        assert np.all(model.alphas > 0)
        assert np.all(model.alphas <= C + 1e-8)
        assert abs(model.alphas @ model.support_labels) <= 1e-6

    def test_margin_support_vector_slackness(self):
        X, y = separable_2d(seed=3, n=50)
        C = 10.0
        model = train_svm(X, y, C=C, kernel=KernelSpec(kind="linear"))
        scores = svm_decision(model, model.support_vectors)
        free = model.alphas < C * (1 - 1e-9)
        margins = model.support_labels[free] * scores[free]
        assert np.all(np.abs(margins - 1.0) <= 1e-3)

    def test_dual_objective_nondecreasing(self):
        rng = np.random.default_rng(11)
        X = np.vstack([rng.normal(-0.6, 1, size=(30, 2)),
                       rng.normal(0.6, 1, size=(30, 2))])
        y = np.concatenate([-np.ones(30), np.ones(30)])
        trace: list = []
        train_svm(X, y, C=1.0, kernel=KernelSpec(kind="rbf", gamma=1.0),
                  objective_trace=trace)
        assert len(trace) > 1
        diffs = np.diff(np.asarray(trace))
        assert np.all(diffs >= -1e-12)

    def test_decision_invariant_to_permutation(self):
        X, y = separable_2d(seed=19, n=40)
        kernel = KernelSpec(kind="rbf", gamma=1.0)
        m1 = train_svm(X, y, C=1.0, kernel=kernel)
        rng = np.random.default_rng(5)
        perm = rng.permutation(len(y))
        m2 = train_svm(X[perm], y[perm], C=1.0, kernel=kernel)
        probes = rng.uniform(-3, 3, size=(200, 2))
        np.testing.assert_allclose(svm_decision(m1, probes),
                                   svm_decision(m2, probes), atol=1e-3)


class TestSvmDecision:
    def test_on_margin(self):
        X = np.array([[1.0, 0.0], [-1.0, 0.0]])
        y = np.array([1.0, -1.0])
        model = train_svm(X, y, C=10.0, kernel=KernelSpec(kind="linear"))
        assert svm_decision(model, np.array([1.0, 0.0])) == pytest.approx(
            1.0, abs=1e-6)

    def test_midpoint_zero(self):
        X = np.array([[1.0, 0.0], [-1.0, 0.0]])
        y = np.array([1.0, -1.0])
        model = train_svm(X, y, C=10.0, kernel=KernelSpec(kind="linear"))
        assert svm_decision(model, np.array([0.0, 0.0])) == pytest.approx(
            0.0, abs=1e-6)

    def test_batch_matches_loop_oracle(self):
        rng = np.random.default_rng(23)
        X = np.vstack([rng.normal(-1, 0.8, size=(20, 3)),
                       rng.normal(1, 0.8, size=(20, 3))])
        y = np.concatenate([-np.ones(20), np.ones(20)])
        model = train_svm(X, y, C=1.0, kernel=KernelSpec(kind="rbf", gamma=0.6))
        probes = rng.normal(size=(100, 3))
        batch = svm_decision(model, probes)
        for k, probe in enumerate(probes):
            loop = model.bias
            for alpha, label, sv in zip(model.alphas, model.support_labels,
                                        model.support_vectors):
                diff = probe - sv
                loop += alpha * label * np.exp(-0.6 * (diff @ diff))
            assert batch[k] == pytest.approx(loop, abs=1e-12)

    def test_dimension_mismatch(self):
        X = np.array([[1.0, 0.0], [-1.0, 0.0]])
        y = np.array([1.0, -1.0])
        model = train_svm(X, y, C=1.0, kernel=KernelSpec(kind="linear"))
        with pytest.raises(DimensionError):
            svm_decision(model, np.ones(3))


class TestSerialization:
    def test_round_trip_bit_exact_scores(self):
        rng = np.random.default_rng(29)
        X = np.vstack([rng.normal(-1, 1, size=(25, 4)),
                       rng.normal(1, 1, size=(25, 4))])
        y = np.concatenate([-np.ones(25), np.ones(25)])
        model = train_svm(X, y, C=2.0, kernel=KernelSpec(kind="rbf", gamma=0.3))
        probes = rng.normal(size=(50, 4))
        restored = deserialize_svm(serialize_svm(model))
        before = svm_decision(model, probes)
        after = svm_decision(restored, probes)
        assert np.array_equal(before, after)

    def test_versioned_document(self):
        X = np.array([[1.0, 0.0], [-1.0, 0.0]])
        model = train_svm(X, np.array([1.0, -1.0]), C=1.0,
                          kernel=KernelSpec(kind="linear"))
        doc = json.loads(serialize_svm(model))
        assert doc["schema_version"] == 1
        assert "config_hash" in doc

    def test_serialization_deterministic(self):
        X = np.array([[1.0, 0.5], [-1.0, -0.5], [0.5, 1.0], [-0.5, -1.0]])
        y = np.array([1.0, -1.0, 1.0, -1.0])
        m1 = train_svm(X, y, C=1.0, kernel=KernelSpec(kind="rbf", gamma=1.0))
        m2 = train_svm(X, y, C=1.0, kernel=KernelSpec(kind="rbf", gamma=1.0))
        assert serialize_svm(m1) == serialize_svm(m2)


class TestMedianHeuristic:
    def test_positive_and_deterministic(self):
        rng = np.random.default_rng(31)
        X = rng.normal(size=(30, 5))
        g1 = median_heuristic_gamma(X)
        assert g1 > 0
        assert g1 == median_heuristic_gamma(X)

    def test_degenerate_inputs(self):
        assert median_heuristic_gamma(np.ones((5, 4))) == pytest.approx(0.25)


class TestTrainMlp:
    def test_separable_reaches_full_accuracy(self):
        rng = np.random.default_rng(37)
        X = np.vstack([rng.normal(-2, 0.5, size=(10, 2)),
                       rng.normal(2, 0.5, size=(10, 2))])
        y = np.concatenate([np.zeros(10), np.ones(10)])
        model, trace = train_mlp(X, y, hidden=8, epochs=2000, lr=0.1, seed=0)
        logits = mlp_forward(model, X)
        assert np.all((logits > 0) == (y == 1))
        assert trace[-1] < trace[0]

    def test_single_class_rejected(self):
        with pytest.raises(SingleClassError):
            train_mlp(np.eye(3), np.ones(3), hidden=4, epochs=10, lr=0.1, seed=0)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(41)
        hidden, dim = 6, 3
        # resample until no pre-activation sits near a ReLU kink
        for attempt in range(50):
            X = rng.normal(size=(12, dim))
            y = (rng.uniform(size=12) > 0.5).astype(float)
            if y.min() == y.max():
                continue
            model = mlp_init(dim, hidden, seed=attempt)
            pre = X @ model.w1.T
            if np.min(np.abs(pre)) > 1e-3:
                break
        dw1, dw2, _ = mlp_gradients(model, X, y)
        analytic = np.concatenate([dw1.ravel(), dw2.ravel()])

        def loss_fn(flat):
            m = mlp_from_flat(flat, dim, hidden)
            return bce_loss(mlp_forward(m, X), y)

        numeric = central_difference_gradient(
            loss_fn, mlp_flat_params(model), step=1e-5)
        scale = np.maximum(np.abs(numeric), 1e-8)
        assert np.max(np.abs(analytic - numeric) / scale) < 1e-4

    def test_zero_input_zero_preactivation(self):
        model = mlp_init(4, 8, seed=1)
        assert mlp_forward(model, np.zeros((1, 4)))[0] == 0.0
