import dataclasses
import json

import numpy as np
import pytest

from flame.classifier import (
    KernelSpec,
    MlpModel,
    mlp_forward,
    mlp_init,
    train_svm,
)
from flame.errors import ConfigError, NotSeparableError
from flame.support_theory import (
    extend_reduced_kkt,
    homogeneous_gradient_flow_experiment,
    kkt_check_hard_margin,
    kkt_check_soft_margin,
    normalized_margins,
    probe_points,
    retrain_on_support,
)

from .datasets import overlapping_gaussians, separable_2d, two_blobs

LINEAR = KernelSpec(kind="linear")
RBF = KernelSpec(kind="rbf", gamma=1.0)


def two_point_model():
    X = np.array([[1.0, 0.0], [-1.0, 0.0]])
    y = np.array([1.0, -1.0])
    return train_svm(X, y, C=1e6, kernel=LINEAR, tol=1e-8), X, y


class TestHardMarginKkt:
    def test_canonical_two_point(self):
        model, X, y = two_point_model()
        report = kkt_check_hard_margin(model, X, y)
        assert report.passed
        for residual in (report.stationarity_residual, report.primal_violation,
                         report.dual_violation, report.slackness_residual):
            assert residual <= 1e-10

    def test_perturbed_alpha_fails(self):
        model, X, y = two_point_model()
        skewed = dataclasses.replace(
            model, alphas=model.alphas + np.array([0.1, 0.0]))
        report = kkt_check_hard_margin(skewed, X, y)
        assert not report.passed
        assert max(report.stationarity_residual,
                   report.slackness_residual) > 1e-2

    def test_random_separable_instances(self):
        for seed in range(5):
            X, y = separable_2d(seed, n=60)
            model = train_svm(X, y, C=1e6, kernel=LINEAR, tol=1e-8)
            report = kkt_check_hard_margin(model, X, y)
            assert report.passed, f"seed {seed}: {report}"

    def test_not_separable_rejected(self):
        X, y = overlapping_gaussians(seed=0, shift=0.2)
        model = train_svm(X, y, C=10.0, kernel=LINEAR, tol=1e-6)
        with pytest.raises(NotSeparableError):
            kkt_check_hard_margin(model, X, y)

    def test_requires_linear_kernel(self):
        X, y = separable_2d(seed=1)
        model = train_svm(X, y, C=1e6, kernel=RBF, tol=1e-8)
        with pytest.raises(ConfigError):
            kkt_check_hard_margin(model, X, y)

    def test_monotone_in_tolerance(self):
        X, y = separable_2d(seed=2)
        model = train_svm(X, y, C=1e6, kernel=LINEAR, tol=1e-8)
        tight = kkt_check_hard_margin(model, X, y, tolerance=1e-8)
        loose = kkt_check_hard_margin(model, X, y, tolerance=1e-3)
        if tight.passed:
            assert loose.passed

    def test_report_serializes(self):
        model, X, y = two_point_model()
        doc = json.loads(kkt_check_hard_margin(model, X, y).to_json())
        assert doc["passed"] is True


class TestSoftMarginKkt:
    def test_large_c_reduces_to_hard_margin(self):
        # the beta*xi product amplifies margin noise by C, so the hard-margin
        # regime needs a solver tolerance well below tolerance / C
        X, y = separable_2d(seed=5)
        model = train_svm(X, y, C=1e6, kernel=LINEAR, tol=1e-10)
        report = kkt_check_soft_margin(model, X, y, C=1e6)
        assert report.passed

    def test_overlapping_gaussians(self):
        X, y = overlapping_gaussians(seed=7)
        model = train_svm(X, y, C=1.0, kernel=RBF, tol=1e-8)
        report = kkt_check_soft_margin(model, X, y, C=1.0)
        assert report.passed
        assert report.tolerance == 1e-3

    def test_bound_sv_clamp_algebra(self):
        X, y = overlapping_gaussians(seed=9)
        C = 1.0
        model = train_svm(X, y, C=C, kernel=RBF, tol=1e-8)
        from flame.classifier import svm_decision
        scores = svm_decision(model, model.support_vectors)
        margins = model.support_labels * scores
        at_bound = model.alphas >= C * (1 - 1e-9)
        violating = at_bound & (margins < 1.0)
        assert violating.any(), "expected at least one bound SV over the margin"
        beta = C - model.alphas[violating]
        xi = 1.0 - margins[violating]
        assert np.all(np.abs(beta * xi) <= 1e-9)

    def test_extension_to_full_problem(self):
        for seed in range(3):
            X, y = overlapping_gaussians(seed=20 + seed)
            for C in (0.5, 1.0, 10.0):
                full = train_svm(X, y, C, RBF, tol=1e-8)
                support = np.asarray(full.support_indices)
                reduced = train_svm(X[support], y[support], C, RBF, tol=1e-8)
                report = extend_reduced_kkt(reduced, X, y, C, support)
                assert report.passed, (seed, C, report)


class TestRetrainOnSupport:
    def test_two_point_trivial(self):
        X = np.array([[1.0, 0.0], [-1.0, 0.0]])
        y = np.array([1.0, -1.0])
        report = retrain_on_support(X, y, C=1e6, kernel=LINEAR)
        assert sorted(report.support_before) == [0, 1]
        assert report.prediction_agreement == 1.0
        assert report.weight_relative_error <= 1e-8

    def test_hard_margin_equivalence(self):
        X, y = separable_2d(seed=11, n=60)
        report = retrain_on_support(X, y, C=1e6, kernel=LINEAR)
        assert report.error is None
        assert report.weight_relative_error <= 1e-4
        assert report.bias_error <= 1e-4
        assert report.prediction_agreement == 1.0

    def test_soft_margin_rbf_agreement(self):
        X, y = overlapping_gaussians(seed=13)
        report = retrain_on_support(X, y, C=1.0, kernel=RBF)
        assert report.error is None
        assert report.prediction_agreement >= 0.999
        assert report.score_max_diff <= 1e-3
        assert report.weight_relative_error is None

    def test_probe_grid_size(self):
        X, y = separable_2d(seed=17, n=30)
        grid = probe_points(X)
        assert grid.shape == (2500, 2)
        lo, hi = X.min(axis=0), X.max(axis=0)
        assert np.all(grid.min(axis=0) < lo)
        assert np.all(grid.max(axis=0) > hi)

    def test_report_serializes(self):
        X, y = separable_2d(seed=19, n=30)
        doc = json.loads(retrain_on_support(X, y, 1e6, LINEAR).to_json())
        assert doc["prediction_agreement"] == 1.0


class TestHomogeneousExperiment:
    def test_two_blob_agreement(self):
        X, y = two_blobs(seed=2)
        report = homogeneous_gradient_flow_experiment(
            X, y, hidden=16, steps=50000, lr=0.05, seed=2)
        assert report.prediction_agreement >= 0.99
        assert len(report.inferred_support_set) >= 1
        assert np.all(np.isfinite(report.normalized_margins))
        assert report.direction_cosine > 0.9

    def test_scaling_weights_scales_output_quadratically(self):
        model = mlp_init(3, 8, seed=4)
        rng = np.random.default_rng(4)
        X = rng.normal(size=(20, 3))
        base = mlp_forward(model, X)
        for c in (0.5, 2.0, 10.0):
            scaled = MlpModel(w1=c * model.w1, w2=c * model.w2)
            got = mlp_forward(scaled, X)
            assert np.max(np.abs(got - c ** 2 * base)) <= 1e-10 * np.max(
                np.abs(c ** 2 * base))

    def test_normalized_margins_scale_invariant(self):
        X, y = two_blobs(seed=5, n_per=8)
        model = mlp_init(2, 8, seed=5)
        base = normalized_margins(model, X, y)
        for c in (0.5, 2.0, 10.0):
            scaled = MlpModel(w1=c * model.w1, w2=c * model.w2)
            got = normalized_margins(scaled, X, y)
            assert np.max(np.abs(got - base)) <= 1e-10 * max(
                1.0, np.max(np.abs(base)))

    def test_not_separable_raises(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(40, 2))
        y = (rng.uniform(size=40) > 0.5).astype(float)
        y[0], y[1] = 0.0, 1.0
        X[1] = X[0]  # identical points, opposite labels: unseparable
        with pytest.raises(NotSeparableError):
            homogeneous_gradient_flow_experiment(
                X, y, hidden=8, steps=3000, lr=0.05, seed=6)

    def test_report_serializes(self):
        X, y = two_blobs(seed=7, n_per=10)
        report = homogeneous_gradient_flow_experiment(
            X, y, hidden=8, steps=20000, lr=0.05, seed=7)
        doc = json.loads(report.to_json())
        assert 0.0 <= doc["prediction_agreement"] <= 1.0
