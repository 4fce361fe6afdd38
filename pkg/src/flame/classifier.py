"""Lightweight binary classifiers trained on the few shots.

The default is a soft-margin kernel SVM solved in the dual by sequential
minimal optimization with maximal-violating-pair working-set selection. A
bias-free two-layer ReLU perceptron (positively homogeneous of degree 2)
trained with full-batch gradient descent on cross-entropy is the alternative.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    ConvergenceError,
    DimensionError,
    DivergenceError,
    FormatError,
    SingleClassError,
)

SUPPORT_TOLERANCE = 1e-8
MODEL_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class KernelSpec:
    kind: str                  # "linear" | "rbf"
    gamma: float | None = None  # rbf width; required for rbf

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ConfigError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and (self.gamma is None or self.gamma <= 0):
            raise ConfigError(f"rbf kernel needs gamma > 0, got {self.gamma}")


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Kernel value for a single pair of vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if spec.kind == "linear":
        return float(x @ y)
    diff = x - y
    return float(np.exp(-spec.gamma * (diff @ diff)))


def kernel_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Gram matrix K[i, j] = k(A[i], B[j])."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise DimensionError(
            f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if spec.kind == "linear":
        return A @ B.T
    sq = (np.einsum("ij,ij->i", A, A)[:, None]
          + np.einsum("ij,ij->i", B, B)[None, :] - 2.0 * A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-spec.gamma * sq)


def median_heuristic_gamma(X) -> float:
    """Default rbf width: 1 / (dim * median pairwise squared distance)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, d = X.shape
    sq = (np.einsum("ij,ij->i", X, X)[:, None]
          + np.einsum("ij,ij->i", X, X)[None, :] - 2.0 * X @ X.T)
    pairs = sq[np.triu_indices(n, k=1)]
    med = float(np.median(pairs)) if pairs.size else 0.0
    if med <= 0.0:
        return 1.0 / d
    return 1.0 / (d * med)


@dataclass
class SvmModel:
    """Dual solution of the soft-margin SVM, truncated to support vectors."""

    support_vectors: np.ndarray   # (m, d)
    support_labels: np.ndarray    # (m,) in {-1, +1}
    alphas: np.ndarray            # (m,) in (0, C]
    bias: float
    C: float
    kernel: KernelSpec
    support_indices: list[int]    # indices into the training set
    training_dim: int

    def config_hash(self) -> str:
        blob = json.dumps({
            "C": self.C, "kind": self.kernel.kind, "gamma": self.kernel.gamma,
            "dim": self.training_dim,
        }, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def train_svm(X, y, C: float, kernel: KernelSpec, seed: int = 0, *,
              tol: float = 1e-5, max_pair_updates: int = 10 ** 6,
              objective_trace: list | None = None) -> SvmModel:
    """Solve the soft-margin dual by SMO.

    Working pairs are chosen by maximal KKT violation; convergence is
    declared when the violation drops below ``tol``. The bias is averaged
    over margin support vectors (0 < alpha < C) when any exist. The solve is
    deterministic: pair selection depends only on the data order (``seed`` is
    accepted for interface uniformity and recorded nowhere). Pass a list as
    ``objective_trace`` to record the dual objective after every accepted
    pair update (diagnostics only; quadratic cost per update).
    """
    del seed
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    n = X.shape[0]
    if n < 2:
        raise ConfigError(f"need at least 2 training points, got {n}")
    if y.shape[0] != n:
        raise DimensionError(f"{n} points but {y.shape[0]} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ConfigError("labels must be -1/+1")
    if np.all(y == y[0]):
        raise SingleClassError("SVM training needs both classes")
    if C <= 0:
        raise ConfigError(f"C must be positive, got {C}")

    K = kernel_matrix(kernel, X, X)
    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - sum(a)
    # multipliers within an ulp-scale band of a bound count as at the bound
    # for working-set selection, else a clipped step of size ~eps could be
    # chosen as the maximal violator and stall the solver
    bound_eps = 1e-12 * C

    def selectable():
        can_up = ((y > 0) & (alpha < C - bound_eps)) | ((y < 0) & (alpha > bound_eps))
        can_low = ((y < 0) & (alpha < C - bound_eps)) | ((y > 0) & (alpha > bound_eps))
        return can_up, can_low

    converged = False
    for _ in range(max_pair_updates):
        v = -y * grad  # v_i = y_i - (decision without bias)
        up, low = selectable()
        v_up = np.where(up, v, -np.inf)
        v_low = np.where(low, v, np.inf)
        i = int(np.argmax(v_up))
        j = int(np.argmin(v_low))
        violation = v_up[i] - v_low[j]
        if violation < tol:
            converged = True
            break

        yi, yj = y[i], y[j]
        ai_old, aj_old = alpha[i], alpha[j]
        if yi != yj:
            L = max(0.0, aj_old - ai_old)
            H = min(C, C + aj_old - ai_old)
        else:
            L = max(0.0, ai_old + aj_old - C)
            H = min(C, ai_old + aj_old)

        # E_i - E_j with the (canceling) bias omitted
        ui = yi * (grad[i] + 1.0)
        uj = yj * (grad[j] + 1.0)
        delta_e = (ui - yi) - (uj - yj)
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta > 1e-12:
            aj_new = aj_old + yj * delta_e / eta
            aj_new = min(max(aj_new, L), H)
        else:
            # flat direction: slide to the bound that decreases the objective
            aj_new = H if yj * delta_e > 0 else L
        if abs(aj_new - aj_old) < 1e-14 * (aj_new + aj_old + 1e-14):
            raise ConvergenceError(
                "SMO made no progress on the maximal violating pair",
                violation=float(violation))
        ai_new = ai_old + yi * yj * (aj_old - aj_new)
        ai_new = min(max(ai_new, 0.0), C)
        grad += Q[:, i] * (ai_new - ai_old) + Q[:, j] * (aj_new - aj_old)
        alpha[i] = ai_new
        alpha[j] = aj_new
        if objective_trace is not None:
            objective_trace.append(float(alpha.sum() - 0.5 * alpha @ Q @ alpha))
    if not converged:
        v = -y * grad
        up, low = selectable()
        violation = float(np.max(np.where(up, v, -np.inf))
                          - np.min(np.where(low, v, np.inf)))
        raise ConvergenceError(
            f"SMO did not reach tolerance {tol} within {max_pair_updates} "
            "pair updates", violation=violation)

    u = (alpha * y) @ K  # decision values without bias
    free = (alpha > SUPPORT_TOLERANCE) & (alpha < C - bound_eps)
    if free.any():
        bias = float(np.mean(y[free] - u[free]))
    else:
        v = y - u
        up, low = selectable()
        hi = float(np.max(v[up])) if up.any() else None
        lo = float(np.min(v[low])) if low.any() else None
        if hi is None:
            bias = lo if lo is not None else 0.0
        elif lo is None:
            bias = hi
        else:
            bias = (hi + lo) / 2.0

    keep = np.flatnonzero(alpha > SUPPORT_TOLERANCE)
    return SvmModel(
        support_vectors=X[keep].copy(),
        support_labels=y[keep].copy(),
        alphas=alpha[keep].copy(),
        bias=bias,
        C=float(C),
        kernel=kernel,
        support_indices=[int(k) for k in keep],
        training_dim=X.shape[1])


def svm_decision(model: SvmModel, x) -> np.ndarray | float:
    """Signed decision score for one vector or a stack; sign is the label."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr.reshape(1, -1)
    if arr.shape[1] != model.training_dim:
        raise DimensionError(
            f"dimension mismatch: {arr.shape[1]} vs model dim {model.training_dim}")
    k = kernel_matrix(model.kernel, arr, model.support_vectors)
    scores = k @ (model.alphas * model.support_labels) + model.bias
    return float(scores[0]) if single else scores


def svm_weight_vector(model: SvmModel) -> np.ndarray:
    """Primal weights for a linear kernel: sum_i alpha_i y_i x_i."""
    if model.kernel.kind != "linear":
        raise ConfigError("weight vector is only defined for linear kernels")
    return (model.alphas * model.support_labels) @ model.support_vectors


def serialize_svm(model: SvmModel) -> str:
    """Versioned JSON document; floats round-trip bit-for-bit."""
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kernel": {"kind": model.kernel.kind, "gamma": model.kernel.gamma},
        "C": model.C,
        "bias": model.bias,
        "alphas": model.alphas.tolist(),
        "support_labels": model.support_labels.tolist(),
        "support_vectors": [row.tolist() for row in model.support_vectors],
        "support_indices": model.support_indices,
        "training_dim": model.training_dim,
        "config_hash": model.config_hash(),
    }
    return json.dumps(doc, sort_keys=True)


def deserialize_svm(text: str) -> SvmModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"model document is not valid JSON: {exc}") from exc
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise FormatError(
            f"unsupported model schema version {doc.get('schema_version')!r}")
    kernel = KernelSpec(kind=doc["kernel"]["kind"], gamma=doc["kernel"]["gamma"])
    return SvmModel(
        support_vectors=np.asarray(doc["support_vectors"], dtype=np.float64),
        support_labels=np.asarray(doc["support_labels"], dtype=np.float64),
        alphas=np.asarray(doc["alphas"], dtype=np.float64),
        bias=float(doc["bias"]),
        C=float(doc["C"]),
        kernel=kernel,
        support_indices=[int(i) for i in doc["support_indices"]],
        training_dim=int(doc["training_dim"]))


@dataclass
class MlpModel:
    """Bias-free two-layer ReLU net; positively homogeneous of degree 2."""

    w1: np.ndarray  # (hidden, d)
    w2: np.ndarray  # (hidden,)

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def dim(self) -> int:
        return self.w1.shape[1]


def mlp_init(dim: int, hidden: int, seed: int) -> MlpModel:
    """Seeded Gaussian(0, 1/sqrt(fan_in)) initialization."""
    rng = np.random.default_rng(seed)
    w1 = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(hidden, dim))
    w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=hidden)
    return MlpModel(w1=w1, w2=w2)


def mlp_forward(model: MlpModel, X) -> np.ndarray:
    """Pre-sigmoid logits for a stack of inputs."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.dim:
        raise DimensionError(
            f"dimension mismatch: {X.shape[1]} vs model dim {model.dim}")
    hidden = np.maximum(X @ model.w1.T, 0.0)
    return hidden @ model.w2


def bce_loss(logits: np.ndarray, y01: np.ndarray) -> float:
    """Binary cross-entropy of sigmoid(logits), numerically stable."""
    return float(np.mean(np.logaddexp(0.0, logits) - y01 * logits))


def mlp_gradients(model: MlpModel, X: np.ndarray,
                  y01: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Full-batch BCE gradients (dW1, dW2) and the current loss."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    pre = X @ model.w1.T
    hidden = np.maximum(pre, 0.0)
    logits = hidden @ model.w2
    loss = bce_loss(logits, y01)
    p = 1.0 / (1.0 + np.exp(-logits))
    dz = (p - y01) / X.shape[0]
    dw2 = hidden.T @ dz
    dhidden = np.outer(dz, model.w2)
    dhidden[pre <= 0.0] = 0.0
    dw1 = dhidden.T @ X
    return dw1, dw2, loss


def train_mlp(X, y01, hidden: int, epochs: int, lr: float,
              seed: int) -> tuple[MlpModel, list[float]]:
    """Full-batch gradient descent on binary cross-entropy.

    Returns the trained model and the per-epoch loss trace. Raises
    ``DivergenceError`` if the loss becomes non-finite (lower the learning
    rate) and ``SingleClassError`` when only one label value is present.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y01 = np.asarray(y01, dtype=np.float64).ravel()
    if not np.all(np.isin(y01, (0.0, 1.0))):
        raise ConfigError("labels must be 0/1")
    if np.all(y01 == y01[0]):
        raise SingleClassError("MLP training needs both classes")
    model = mlp_init(X.shape[1], hidden, seed)
    trace: list[float] = []
    for _ in range(epochs):
        dw1, dw2, loss = mlp_gradients(model, X, y01)
        if not np.isfinite(loss):
            raise DivergenceError(
                "loss became non-finite; try a lower learning rate", lr=lr)
        trace.append(loss)
        model.w1 -= lr * dw1
        model.w2 -= lr * dw2
    return model, trace


def mlp_flat_params(model: MlpModel) -> np.ndarray:
    return np.concatenate([model.w1.ravel(), model.w2.ravel()])


def mlp_from_flat(flat: np.ndarray, dim: int, hidden: int) -> MlpModel:
    w1 = flat[:hidden * dim].reshape(hidden, dim).copy()
    w2 = flat[hidden * dim:].copy()
    return MlpModel(w1=w1, w2=w2)
