"""Deterministic numeric kernels: cosine similarity, PCA, Gaussian KDE, k-means.

All functions are pure and seeded where randomness is involved; two runs with
identical inputs produce bit-identical outputs. Vectors are 1-D float64
ndarrays throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DegenerateVectorError,
    DimensionError,
    EmptyPoolError,
    InsufficientSamplesError,
)

_KDE_BLOCK_ELEMENTS = 2 ** 24  # cap on per-block distance-matrix entries


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array, rejecting NaN/Inf."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite entries")
    return arr


def as_matrix(rows, name: str = "points") -> np.ndarray:
    """Coerce a list of vectors to a finite 2-D float64 array."""
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite entries")
    return arr


def cosine_similarity(x, t) -> float:
    """Cosine of the angle between two vectors, in [-1, 1]."""
    x = as_vector(x, "x")
    t = as_vector(t, "t")
    if x.shape[0] != t.shape[0]:
        raise DimensionError(
            f"dimension mismatch: {x.shape[0]} vs {t.shape[0]}")
    nx = float(np.linalg.norm(x))
    nt = float(np.linalg.norm(t))
    if nx == 0.0 or nt == 0.0:
        raise DegenerateVectorError("cosine similarity undefined for zero-norm vector")
    return float(np.clip(float(x @ t) / (nx * nt), -1.0, 1.0))


def cosine_similarities(X: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Row-wise cosine similarity of a pool against one query vector."""
    X = as_matrix(X, "pool")
    t = as_vector(t, "t")
    if X.shape[1] != t.shape[0]:
        raise DimensionError(
            f"dimension mismatch: pool dim {X.shape[1]} vs query dim {t.shape[0]}")
    nt = float(np.linalg.norm(t))
    norms = np.linalg.norm(X, axis=1)
    if nt == 0.0 or np.any(norms == 0.0):
        raise DegenerateVectorError("cosine similarity undefined for zero-norm vector")
    return np.clip((X @ t) / (norms * nt), -1.0, 1.0)


@dataclass(frozen=True)
class PcaModel:
    """Principal axes of a centered sample.

    ``components`` rows are orthonormal and ordered by non-increasing
    ``explained_variance``. Deterministic sign convention: in every row the
    entry of largest absolute value is positive.
    """

    mean: np.ndarray
    components: np.ndarray          # (n_components, dim)
    explained_variance: np.ndarray  # (n_components,)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def fit_pca(X, n_components: int) -> PcaModel:
    """Top principal axes of the sample covariance (eigendecomposition).

    Requires ``2 <= len(X)`` and ``1 <= n_components <= min(len(X)-1, dim)``.
    Rank-deficient data is handled naturally: eigenvectors of (numerically)
    zero eigenvalues form an orthonormal completion and their explained
    variance is clamped to zero.
    """
    X = as_matrix(X, "X")
    n, d = X.shape
    if n < 2:
        raise ConfigError(f"PCA needs at least 2 samples, got {n}")
    if not (1 <= n_components <= min(n - 1, d)):
        raise ConfigError(
            f"n_components={n_components} outside [1, min(n-1, dim)]="
            f"[1, {min(n - 1, d)}]")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)  # ascending
    order = np.argsort(eigvals, kind="stable")[::-1]
    eigvals = eigvals[order][:n_components]
    components = eigvecs[:, order][:, :n_components].T.copy()
    eigvals = np.maximum(eigvals, 0.0)
    # sign convention: largest-|entry| coordinate of each axis is positive
    for row in components:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1.0
    return PcaModel(mean=mean, components=components, explained_variance=eigvals)


def project(model: PcaModel, x) -> np.ndarray:
    """Project one vector (or a stack of vectors) onto the principal axes."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr.reshape(1, -1)
    if arr.shape[1] != model.dim:
        raise DimensionError(
            f"dimension mismatch: {arr.shape[1]} vs model dim {model.dim}")
    out = (arr - model.mean) @ model.components.T
    return out[0] if single else out


@dataclass(frozen=True)
class KdeModel:
    """Gaussian kernel density estimate with one isotropic bandwidth."""

    samples: np.ndarray  # (n, dim)
    bandwidth: float

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ConfigError(f"bandwidth must be positive, got {self.bandwidth}")

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def fit_kde(samples, bandwidth: float) -> KdeModel:
    samples = as_matrix(samples, "samples")
    if samples.shape[0] == 0:
        raise EmptyPoolError("KDE requires at least one sample")
    return KdeModel(samples=samples, bandwidth=float(bandwidth))


def scott_bandwidth(samples) -> float:
    """Scott's rule, n**(-1/(dim+4)) times the mean per-axis std."""
    samples = as_matrix(samples, "samples")
    n, dim = samples.shape
    spread = float(np.mean(np.std(samples, axis=0)))
    if spread <= 0.0:
        spread = 1.0  # degenerate cloud; any positive bandwidth works
    return float(n ** (-1.0 / (dim + 4)) * spread)


def kde_density(model: KdeModel, queries) -> np.ndarray | float:
    """Density of the estimate at one point or a stack of points.

    Evaluates the normalized isotropic Gaussian kernel sum
    ``sum_i exp(-||s - s_i||^2 / (2 h^2)) / (n (2 pi)^{d/2} h^d)`` in fixed
    chunk order, so results are bit-identical across runs and batch sizes.
    """
    q = np.asarray(queries, dtype=np.float64)
    single = q.ndim == 1
    if single:
        q = q.reshape(1, -1)
    if q.shape[1] != model.dim:
        raise DimensionError(
            f"dimension mismatch: query dim {q.shape[1]} vs model dim {model.dim}")
    n, d = model.samples.shape
    h = model.bandwidth
    norm = 1.0 / (n * (2.0 * np.pi) ** (d / 2.0) * h ** d)
    sample_sq = np.einsum("ij,ij->i", model.samples, model.samples)
    chunk = max(1, min(2048, _KDE_BLOCK_ELEMENTS // n))
    out = np.empty(q.shape[0])
    for start in range(0, q.shape[0], chunk):
        block = q[start:start + chunk]
        sq = (np.einsum("ij,ij->i", block, block)[:, None]
              + sample_sq[None, :] - 2.0 * block @ model.samples.T)
        np.maximum(sq, 0.0, out=sq)
        out[start:start + chunk] = np.exp(-sq / (2.0 * h * h)).sum(axis=1)
    out *= norm
    return float(out[0]) if single else out


def kde_mode(model: KdeModel) -> tuple[np.ndarray, float]:
    """Sample point of maximum density and that density.

    The argmax is restricted to the fitted samples (ties broken by lowest
    index); the continuous mode lies within O(bandwidth) of it.
    """
    if model.samples.shape[0] == 0:
        raise EmptyPoolError("KDE mode undefined for empty sample set")
    dens = kde_density(model, model.samples)
    best = int(np.argmax(dens))
    return model.samples[best].copy(), float(dens[best])


@dataclass
class Clustering:
    """Result of Lloyd's algorithm: centers, assignment, total inertia."""

    centers: np.ndarray     # (k, dim)
    assignment: np.ndarray  # (n,) cluster ids in [0, k)
    inertia: float
    n_iter: int = field(default=0)

    @property
    def k(self) -> int:
        return self.centers.shape[0]


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    if k == 1:
        return centers
    dist_sq = np.einsum("ij,ij->i", X - centers[0], X - centers[0])
    for c in range(1, k):
        total = dist_sq.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=dist_sq / total))
        centers[c] = X[idx]
        cand = np.einsum("ij,ij->i", X - centers[c], X - centers[c])
        np.minimum(dist_sq, cand, out=dist_sq)
    return centers


def _claim_empty_clusters(X: np.ndarray, centers: np.ndarray,
                          assignment: np.ndarray, dists: np.ndarray) -> None:
    """Re-seed each empty cluster at the point farthest from its center.

    Mutates ``centers`` and ``assignment`` in place; only points from
    clusters with more than one member are claimed, so no cluster is
    emptied by the fix-up.
    """
    k = centers.shape[0]
    per_point = dists[np.arange(X.shape[0]), assignment].copy()
    for c in range(k):
        if (assignment == c).any():
            continue
        counts = np.bincount(assignment, minlength=k)
        eligible = counts[assignment] > 1
        candidates = np.where(eligible, per_point, -np.inf)
        far = int(np.argmax(candidates))
        assignment[far] = c
        centers[c] = X[far]
        per_point[far] = 0.0


def kmeans(X, k: int, seed: int, *, max_iter: int = 300,
           shift_tol: float = 1e-8) -> Clustering:
    """Lloyd's algorithm with k-means++ seeding, deterministic per seed.

    Converges when the largest center shift drops below ``shift_tol`` or
    after ``max_iter`` sweeps. Empty clusters are re-seeded at the point
    farthest from its current center, so all returned clusters are non-empty.
    """
    X = as_matrix(X, "X")
    n = X.shape[0]
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if n < k:
        raise InsufficientSamplesError(
            f"k-means needs at least k={k} points, got {n}", k=k, n=n)
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(X, k, rng)
    assignment = np.zeros(n, dtype=np.int64)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        dists = _pairwise_sq(X, centers)
        assignment = np.argmin(dists, axis=1)
        _claim_empty_clusters(X, centers, assignment, dists)
        new_centers = np.empty_like(centers)
        for c in range(k):
            new_centers[c] = X[assignment == c].mean(axis=0)
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if shift < shift_tol:
            break
    dists = _pairwise_sq(X, centers)
    assignment = np.argmin(dists, axis=1)
    _claim_empty_clusters(X, centers, assignment, dists)
    dists = _pairwise_sq(X, centers)
    inertia = float(dists[np.arange(n), assignment].sum())
    return Clustering(centers=centers, assignment=assignment,
                      inertia=inertia, n_iter=n_iter)


def nearest_to_centers(clustering: Clustering, X) -> list[int]:
    """Index of the member point closest to each cluster center.

    Ties resolve to the lowest index. Requires ``clustering`` to have been
    produced from ``X``.
    """
    X = as_matrix(X, "X")
    out = []
    for c in range(clustering.k):
        members = np.flatnonzero(clustering.assignment == c)
        if members.size == 0:
            raise ConfigError(f"cluster {c} is empty; clustering does not match X")
        d = np.linalg.norm(X[members] - clustering.centers[c], axis=1)
        out.append(int(members[int(np.argmin(d))]))
    return out


def _pairwise_sq(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    sq = (np.einsum("ij,ij->i", A, A)[:, None]
          + np.einsum("ij,ij->i", B, B)[None, :] - 2.0 * A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return sq
