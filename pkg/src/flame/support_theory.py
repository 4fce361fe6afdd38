"""Executable support-set theory checks.

Three families of checks, all built on the trained models:

* hard-margin KKT residuals (realized as soft margin with a huge C plus a
  slack audit) and retrain-on-support weight equivalence,
* soft-margin KKT residuals with the multiplier extension to dropped points,
* the max-margin behavior of a bias-free homogeneous ReLU net trained by
  gradient descent on logistic loss, with support-only retraining.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .classifier import (
    KernelSpec,
    MlpModel,
    SvmModel,
    mlp_flat_params,
    mlp_forward,
    mlp_gradients,
    mlp_init,
    svm_decision,
    svm_weight_vector,
    train_svm,
)
from .errors import ConfigError, DivergenceError, NotSeparableError, SingleClassError

HARD_MARGIN_C = 1e6
HARD_MARGIN_SLACK_BUDGET = 1e-6


def separable_instance(seed: int, n: int = 60, margin: float = 0.5
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Random linearly separable 2-D set with a guaranteed margin band."""
    rng = np.random.default_rng(seed)
    w = rng.normal(size=2)
    w /= np.linalg.norm(w)
    b = rng.uniform(-0.5, 0.5)
    X, y = [], []
    while len(X) < n:
        x = rng.uniform(-3, 3, size=2)
        score = w @ x + b
        if abs(score) < margin:
            continue
        X.append(x)
        y.append(1.0 if score > 0 else -1.0)
    X, y = np.asarray(X), np.asarray(y)
    if np.all(y == y[0]):  # rare one-sided draw; nudge a point across
        X[0] = -3.0 * w * y[0] + X[0]
        y[0] = -y[0]
    return X, y


def overlapping_instance(seed: int, n_per: int = 40, shift: float = 0.7
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Two overlapping Gaussian classes with plus-minus labels."""
    rng = np.random.default_rng(1000 + seed)
    X = np.vstack([rng.normal(-shift, 1.0, size=(n_per, 2)),
                   rng.normal(shift, 1.0, size=(n_per, 2))])
    y = np.concatenate([-np.ones(n_per), np.ones(n_per)])
    return X, y


def two_blob_instance(seed: int, n_per: int = 20, sep: float = 2.0
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Well-separated blobs with 0/1 labels for the network experiment."""
    rng = np.random.default_rng(seed)
    a = rng.normal([-sep, 0.0], 0.5, size=(n_per, 2))
    b = rng.normal([sep, 0.0], 0.5, size=(n_per, 2))
    X = np.vstack([a, b])
    y = np.concatenate([np.zeros(n_per), np.ones(n_per)])
    return X, y


@dataclass
class KktReport:
    """Residuals of the four KKT blocks at a stated tolerance."""

    stationarity_residual: float
    primal_violation: float
    dual_violation: float
    slackness_residual: float
    tolerance: float
    passed: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _full_alphas(model: SvmModel, n: int) -> np.ndarray:
    alpha = np.zeros(n)
    alpha[model.support_indices] = model.alphas
    return alpha


def kkt_check_hard_margin(model: SvmModel, X, y, *,
                          tolerance: float = 1e-4) -> KktReport:
    """KKT residuals of the separable (hard-margin) problem.

    The model must be linear and trained in the hard-margin regime; the
    separability assumption is audited by requiring every slack to be below
    ``HARD_MARGIN_SLACK_BUDGET``.
    """
    if model.kernel.kind != "linear":
        raise ConfigError("hard-margin check requires a linear kernel")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    f = svm_decision(model, X)
    margins = y * f
    slack = np.maximum(0.0, 1.0 - margins)
    if float(slack.max()) > HARD_MARGIN_SLACK_BUDGET:
        raise NotSeparableError(
            "data is not separated at the hard-margin slack budget",
            max_slack=float(slack.max()))
    alpha = _full_alphas(model, X.shape[0])
    w = svm_weight_vector(model)
    grad_w = w - (alpha * y) @ X
    stationarity = abs(float(alpha @ y)) + float(np.linalg.norm(grad_w))
    primal = float(np.maximum(0.0, 1.0 - margins).max())
    dual = float(np.maximum(0.0, -alpha).max())
    slackness = float(np.abs(alpha * (margins - 1.0)).max())
    passed = max(stationarity, primal, dual, slackness) <= tolerance
    return KktReport(stationarity_residual=stationarity, primal_violation=primal,
                     dual_violation=dual, slackness_residual=slackness,
                     tolerance=tolerance, passed=passed)


def _soft_margin_report(f: np.ndarray, y: np.ndarray, alpha: np.ndarray,
                        C: float, tolerance: float,
                        stationarity_extra: float = 0.0) -> KktReport:
    margins = y * f
    beta = C - alpha
    xi = np.maximum(0.0, 1.0 - margins)
    stationarity = abs(float(alpha @ y)) + stationarity_extra
    primal = float(np.maximum(0.0, 1.0 - xi - margins).max())
    dual = float(max(np.maximum(0.0, -alpha).max(),
                     np.maximum(0.0, alpha - C).max()))
    slackness = float(max(np.abs(alpha * (1.0 - xi - margins)).max(),
                          np.abs(beta * xi).max()))
    passed = max(stationarity, primal, dual, slackness) <= tolerance
    return KktReport(stationarity_residual=stationarity, primal_violation=primal,
                     dual_violation=dual, slackness_residual=slackness,
                     tolerance=tolerance, passed=passed)


def kkt_check_soft_margin(model: SvmModel, X, y, C: float, *,
                          tolerance: float = 1e-3) -> KktReport:
    """KKT residuals of the soft-margin problem.

    Recovers slacks as ``xi_i = max(0, 1 - y_i f(x_i))`` and the box
    multipliers as ``beta_i = C - alpha_i``, then checks stationarity, both
    feasibility blocks, and both complementary-slackness products.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    f = svm_decision(model, X)
    alpha = _full_alphas(model, X.shape[0])
    extra = 0.0
    if model.kernel.kind == "linear":
        w = svm_weight_vector(model)
        extra = float(np.linalg.norm(w - (alpha * y) @ X))
    return _soft_margin_report(f, y, alpha, C, tolerance, extra)


def extend_reduced_kkt(model: SvmModel, X, y, C: float,
                       subset_indices, *, tolerance: float = 1e-3) -> KktReport:
    """Check the zero-extension of a support-only solution on the full set.

    ``model`` was trained on ``X[subset_indices]``; its multipliers are
    extended by ``alpha_i = 0, beta_i = C, xi_i = 0`` for every dropped
    point, and the full KKT system is evaluated at that extended point. This
    is the executable reduced-to-full direction of the soft-margin support
    lemma: it passes exactly when the dropped constraints are inactive.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    subset = np.asarray(subset_indices, dtype=np.int64)
    alpha = np.zeros(X.shape[0])
    alpha[subset[model.support_indices]] = model.alphas
    f = svm_decision(model, X)
    extra = 0.0
    if model.kernel.kind == "linear":
        w = svm_weight_vector(model)
        extra = float(np.linalg.norm(w - (alpha * y) @ X))
    return _soft_margin_report(f, y, alpha, C, tolerance, extra)


@dataclass
class EquivalenceReport:
    """Full-vs-support-retrained model comparison."""

    weight_relative_error: float | None
    bias_error: float | None
    prediction_agreement: float
    score_max_diff: float
    support_before: list[int]
    support_after: list[int]
    error: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def probe_points(X: np.ndarray, *, per_axis: int = 50, inflate: float = 0.2,
                 seed: int = 0, minimum: int = 1000) -> np.ndarray:
    """Probe set covering the data bounding box inflated by ``inflate``.

    2-D data gets a regular grid (``per_axis`` squared points); higher
    dimensions get a seeded uniform sample of at least ``minimum`` points.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    lo = lo - inflate * span
    hi = hi + inflate * span
    if X.shape[1] == 2:
        gx = np.linspace(lo[0], hi[0], per_axis)
        gy = np.linspace(lo[1], hi[1], per_axis)
        xx, yy = np.meshgrid(gx, gy)
        return np.column_stack([xx.ravel(), yy.ravel()])
    rng = np.random.default_rng(seed)
    count = max(minimum, per_axis * per_axis)
    return rng.uniform(lo, hi, size=(count, X.shape[1]))


def retrain_on_support(X, y, C: float, kernel: KernelSpec, seed: int = 0, *,
                       tol: float = 1e-8, probe: np.ndarray | None = None
                       ) -> EquivalenceReport:
    """Train, drop all non-support points, retrain, compare the classifiers.

    Both trainings use identical hyperparameters, including a solver
    tolerance tight enough (1e-8) that the two optima can be compared at the
    1e-4 level. Weight and bias errors are reported for linear kernels; sign
    agreement and the maximal score gap are measured over a probe set
    covering the inflated data bounding box.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    full = train_svm(X, y, C, kernel, seed, tol=tol)
    support = np.asarray(full.support_indices, dtype=np.int64)
    if np.unique(y[support]).size < 2:
        return EquivalenceReport(
            weight_relative_error=None, bias_error=None,
            prediction_agreement=0.0, score_max_diff=float("inf"),
            support_before=[int(i) for i in support], support_after=[],
            error="degenerate support set: single class among support vectors")
    reduced = train_svm(X[support], y[support], C, kernel, seed, tol=tol)
    if probe is None:
        probe = probe_points(X)
    f_full = svm_decision(full, probe)
    f_reduced = svm_decision(reduced, probe)
    agreement = float(np.mean((f_full >= 0) == (f_reduced >= 0)))
    score_gap = float(np.max(np.abs(f_full - f_reduced)))
    if kernel.kind == "linear":
        w_full = svm_weight_vector(full)
        w_reduced = svm_weight_vector(reduced)
        weight_err = float(np.linalg.norm(w_full - w_reduced)
                           / max(np.linalg.norm(w_full), 1e-12))
        bias_err = abs(full.bias - reduced.bias)
    else:
        weight_err = None
        bias_err = None
    support_after = [int(support[i]) for i in reduced.support_indices]
    return EquivalenceReport(
        weight_relative_error=weight_err, bias_error=bias_err,
        prediction_agreement=agreement, score_max_diff=score_gap,
        support_before=[int(i) for i in support],
        support_after=support_after)


@dataclass
class HomogeneousRunReport:
    """Outcome of the homogeneous-network margin experiment."""

    normalized_margins: np.ndarray = field(repr=False)
    inferred_support_set: list[int]
    direction_cosine: float
    prediction_agreement: float
    final_loss: float
    retrain_margins: np.ndarray = field(repr=False)

    def to_json(self) -> str:
        doc = asdict(self)
        doc["normalized_margins"] = self.normalized_margins.tolist()
        doc["retrain_margins"] = self.retrain_margins.tolist()
        return json.dumps(doc, sort_keys=True)


def normalized_margins(model: MlpModel, X, y01) -> np.ndarray:
    """Margins y * logit / ||theta||^2 with plus-minus labels.

    Invariant under positive rescaling of the parameters because the net is
    homogeneous of degree 2 in the weights.
    """
    y_pm = np.where(np.asarray(y01) > 0, 1.0, -1.0)
    theta_sq = float(np.sum(model.w1 ** 2) + np.sum(model.w2 ** 2))
    return y_pm * mlp_forward(model, X) / theta_sq


def _train_homogeneous(X: np.ndarray, y01: np.ndarray, hidden: int,
                       steps: int, lr: float, seed: int) -> tuple[MlpModel, float]:
    """Gradient descent on logistic loss with loss-normalized step size.

    Late-phase margin growth under plain GD is logarithmically slow; scaling
    the step by 1/loss keeps directional progress roughly constant while the
    loss decays. The scale factor is capped to avoid overshooting right after
    separation is reached.
    """
    model = mlp_init(X.shape[1], hidden, seed)
    loss = float("inf")
    for _ in range(steps):
        dw1, dw2, loss = mlp_gradients(model, X, y01)
        if not np.isfinite(loss):
            raise DivergenceError(
                "homogeneous training diverged; lower the learning rate", lr=lr)
        step = lr * min(1.0 / max(loss, 1e-12), 1e7)
        model.w1 -= step * dw1
        model.w2 -= step * dw2
    return model, loss


def homogeneous_gradient_flow_experiment(
        X, y01, hidden: int, steps: int, lr: float, seed: int, *,
        margin_tol: float = 0.1, probe: np.ndarray | None = None
) -> HomogeneousRunReport:
    """Train the homogeneous net, infer its support set, retrain on it.

    The support set is the examples whose normalized margin sits within a
    factor ``1 + margin_tol`` of the minimum. The retrained model starts from
    the same seeded initialization. Reports the cosine between the two
    normalized parameter vectors and sign agreement over the probe set.
    Raises ``NotSeparableError`` when full training accuracy is not reached.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y01 = np.asarray(y01, dtype=np.float64).ravel()
    if np.all(y01 == y01[0]):
        raise SingleClassError("experiment needs both classes")
    model, loss = _train_homogeneous(X, y01, hidden, steps, lr, seed)
    logits = mlp_forward(model, X)
    predicted = (logits > 0).astype(float)
    if not np.all(predicted == y01):
        raise NotSeparableError(
            "network did not reach 100% training accuracy",
            accuracy=float(np.mean(predicted == y01)))
    margins = normalized_margins(model, X, y01)
    cutoff = margins.min() * (1.0 + margin_tol)
    support = [int(i) for i in np.flatnonzero(margins <= cutoff)]
    sub_model, _ = _train_homogeneous(X[support], y01[support], hidden,
                                      steps, lr, seed)
    theta_full = mlp_flat_params(model)
    theta_sub = mlp_flat_params(sub_model)
    cosine = float(theta_full @ theta_sub
                   / (np.linalg.norm(theta_full) * np.linalg.norm(theta_sub)))
    if probe is None:
        probe = probe_points(X)
    agreement = float(np.mean((mlp_forward(model, probe) >= 0)
                              == (mlp_forward(sub_model, probe) >= 0)))
    retrain_m = normalized_margins(sub_model, X[support], y01[support])
    return HomogeneousRunReport(
        normalized_margins=margins, inferred_support_set=support,
        direction_cosine=cosine, prediction_agreement=agreement,
        final_loss=loss, retrain_margins=retrain_m)
