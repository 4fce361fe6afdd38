"""Marginal-sample shot selection.

Pipeline: augment each pool embedding with its cosine similarity to the
query, project the augmented vectors with PCA, keep the points whose density
falls in a band below the mode ("marginal" candidates), then pick one
representative per k-means cluster for labeling. Includes the class-imbalance
handling (ratio gate + SMOTE oversampling) applied after labeling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    EmptyBandError,
    EmptyPoolError,
    InsufficientSamplesError,
    SingleClassError,
)
from .numerics import (
    as_matrix,
    as_vector,
    cosine_similarities,
    fit_kde,
    fit_pca,
    kde_density,
    kmeans,
    nearest_to_centers,
    project,
    scott_bandwidth,
)


@dataclass
class FlameConfig:
    """Hyperparameters of the selection algorithm plus classifier settings.

    ``bandwidth`` and ``gamma`` default to None, meaning Scott's rule and the
    median pairwise-distance heuristic respectively. ``similarity_floor``
    optionally drops pool points whose cosine score is below the floor before
    sampling (off by default).
    """

    shots_k: int = 30
    pca_dim: int = 1
    bandwidth: float | None = None
    ratio_lower: float = 0.3
    ratio_upper: float = 0.7
    imbalance_threshold: float = 2.0
    smote_neighbors: int = 5
    jitter_sigma: float = 1e-3
    seed: int = 0
    similarity_floor: float | None = None
    kernel: str = "rbf"
    gamma: float | None = None
    svm_c: float = 1.0

    def __post_init__(self):
        if self.shots_k < 2:
            raise ConfigError(f"shots_k must be >= 2, got {self.shots_k}")
        if self.pca_dim < 1:
            raise ConfigError(f"pca_dim must be >= 1, got {self.pca_dim}")
        if not (0.0 < self.ratio_lower < self.ratio_upper < 1.0):
            raise ConfigError(
                "density ratios must satisfy 0 < ratio_lower < ratio_upper < 1, "
                f"got ({self.ratio_lower}, {self.ratio_upper})")
        if self.imbalance_threshold <= 1.0:
            raise ConfigError(
                f"imbalance_threshold must exceed 1, got {self.imbalance_threshold}")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ConfigError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.smote_neighbors < 1:
            raise ConfigError(
                f"smote_neighbors must be >= 1, got {self.smote_neighbors}")
        if self.jitter_sigma < 0:
            raise ConfigError(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")
        if self.kernel not in ("rbf", "linear"):
            raise ConfigError(f"kernel must be 'rbf' or 'linear', got {self.kernel!r}")
        if self.gamma is not None and self.gamma <= 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if self.svm_c <= 0:
            raise ConfigError(f"svm_c must be positive, got {self.svm_c}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "FlameConfig":
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class AugmentedEmbedding:
    """A pool embedding extended with its query-similarity coordinate."""

    base: np.ndarray
    similarity: float
    augmented: np.ndarray  # base ++ [similarity]


def augment_pool(pool, query) -> list[AugmentedEmbedding]:
    """Append the cosine-to-query coordinate to every pool vector."""
    pool = np.asarray(pool, dtype=np.float64)
    if pool.ndim != 2 or pool.shape[0] == 0:
        if pool.size == 0:
            raise EmptyPoolError("cannot augment an empty pool")
        raise DimensionError(f"pool must be a 2-D array, got shape {pool.shape}")
    query = as_vector(query, "query")
    sims = cosine_similarities(pool, query)
    out = []
    for row, c in zip(pool, sims):
        out.append(AugmentedEmbedding(
            base=row.copy(), similarity=float(c),
            augmented=np.concatenate([row, [c]])))
    return out


@dataclass
class MarginalBand:
    """Pool indices whose projected density sits in [r_l, r_u] of the mode."""

    mode_density: float
    lower_threshold: float
    upper_threshold: float
    member_indices: np.ndarray   # sorted pool indices
    member_densities: np.ndarray  # densities aligned with member_indices
    bandwidth: float


def marginal_band(projections, config: FlameConfig) -> MarginalBand:
    """Density-band filter around the sample-restricted KDE mode.

    Fits a Gaussian KDE on the projected points and keeps every index whose
    density lies in ``[ratio_lower * f_mode, ratio_upper * f_mode]``. For a
    unimodal 1-D density this is exactly the pair of flank intervals between
    the two ratio level sets.
    """
    P = as_matrix(projections, "projections")
    if P.shape[0] == 0:
        raise EmptyPoolError("cannot band an empty projection set")
    h = config.bandwidth if config.bandwidth is not None else scott_bandwidth(P)
    kde = fit_kde(P, h)
    dens = np.atleast_1d(kde_density(kde, P))
    f_mode = float(dens.max())  # sample-restricted mode, same as kde_mode
    lower = config.ratio_lower * f_mode
    upper = config.ratio_upper * f_mode
    members = np.flatnonzero((dens >= lower) & (dens <= upper))
    if members.size == 0:
        raise EmptyBandError(
            f"no sample has density in [{lower:.6g}, {upper:.6g}]; "
            "widen the ratio interval",
            mode_density=f_mode,
            min_density=float(dens.min()),
            max_density=float(dens.max()))
    return MarginalBand(
        mode_density=f_mode, lower_threshold=float(lower),
        upper_threshold=float(upper), member_indices=members,
        member_densities=dens[members], bandwidth=float(h))


@dataclass(frozen=True)
class ShotProvenance:
    density: float
    cluster_id: int
    distance_to_center: float


@dataclass
class ShotSelection:
    """The marginal, diverse candidates chosen for labeling."""

    shot_indices: list[int]
    provenance: list[ShotProvenance]
    requested_k: int
    effective_k: int
    band: MarginalBand = field(repr=False)


def select_shots(pool: list[AugmentedEmbedding], config: FlameConfig) -> ShotSelection:
    """Pick the diverse marginal candidates from an augmented pool.

    Projects to ``pca_dim`` dimensions, filters to the marginal density band,
    clusters the band members' full augmented vectors into ``shots_k``
    clusters, and returns the member nearest each center. If the band holds
    fewer than ``shots_k`` points the effective K shrinks to the band size
    (with a warning).
    """
    if len(pool) < config.shots_k:
        raise InsufficientSamplesError(
            f"pool of {len(pool)} cannot yield {config.shots_k} shots",
            k=config.shots_k, n=len(pool))
    A = np.stack([e.augmented for e in pool])
    pca_dim = min(config.pca_dim, A.shape[0] - 1, A.shape[1])
    pca = fit_pca(A, pca_dim)
    projections = project(pca, A)
    band = marginal_band(projections, config)
    members = band.member_indices
    effective_k = min(config.shots_k, members.size)
    if effective_k < config.shots_k:
        warnings.warn(
            f"marginal band holds {members.size} points; reducing shots from "
            f"{config.shots_k} to {effective_k}", stacklevel=2)
    clustering = kmeans(A[members], effective_k, config.seed)
    local = nearest_to_centers(clustering, A[members])
    shot_indices = [int(members[i]) for i in local]
    provenance = []
    for cluster_id, li in enumerate(local):
        dist = float(np.linalg.norm(
            A[members][li] - clustering.centers[cluster_id]))
        provenance.append(ShotProvenance(
            density=float(band.member_densities[li]),
            cluster_id=cluster_id, distance_to_center=dist))
    return ShotSelection(shot_indices=shot_indices, provenance=provenance,
                         requested_k=config.shots_k, effective_k=effective_k,
                         band=band)


@dataclass(frozen=True)
class LabeledShot:
    """One labeled training example; synthetic shots carry no pool index."""

    pool_index: int | None
    augmented: np.ndarray
    label: int
    synthetic: bool = False

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ConfigError(f"label must be 0 or 1, got {self.label}")
        if self.synthetic and self.pool_index is not None:
            raise ConfigError("synthetic shots carry no pool index")


def imbalance_ratio(labels) -> float:
    """Majority count over minority count; requires both classes present."""
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError(
            "both classes must be present to compute an imbalance ratio",
            positives=n_pos, negatives=n_neg)
    return max(n_pos, n_neg) / min(n_pos, n_neg)


def _minority_label(labels: np.ndarray) -> int:
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 and n_neg == 0:
        raise SingleClassError("no labeled shots", positives=0, negatives=0)
    if n_pos == 0:
        raise SingleClassError("minority class is empty", positives=0, negatives=n_neg)
    if n_neg == 0:
        raise SingleClassError("minority class is empty", positives=n_pos, negatives=0)
    return 1 if n_pos <= n_neg else 0


def smote(labeled: list[LabeledShot], k_neighbors: int, target_count: int,
          seed: int, *, jitter_sigma: float = 1e-3) -> list[LabeledShot]:
    """Synthesize minority-class samples on segments between neighbors.

    Each synthetic point is ``x_a + u (x_b - x_a)`` with ``u ~ U(0, 1)`` and
    ``x_b`` drawn from ``x_a``'s ``min(k_neighbors, m-1)`` nearest minority
    neighbors; base points cycle round-robin through the minority set. A
    singleton minority falls back to Gaussian jitter of ``jitter_sigma``.
    """
    labels = np.asarray([s.label for s in labeled])
    minority = _minority_label(labels)
    min_vectors = np.stack([s.augmented for s in labeled if s.label == minority])
    m = min_vectors.shape[0]
    rng = np.random.default_rng(seed)
    synthetic: list[LabeledShot] = []
    if m == 1:
        lone = min_vectors[0]
        for _ in range(target_count):
            jittered = lone + rng.normal(0.0, jitter_sigma, size=lone.shape)
            synthetic.append(LabeledShot(
                pool_index=None, augmented=jittered, label=minority,
                synthetic=True))
        return synthetic
    k_eff = min(k_neighbors, m - 1)
    diffs = min_vectors[:, None, :] - min_vectors[None, :, :]
    dist = np.einsum("abi,abi->ab", diffs, diffs)
    np.fill_diagonal(dist, np.inf)
    neighbor_idx = np.argsort(dist, axis=1, kind="stable")[:, :k_eff]
    for j in range(target_count):
        a = j % m
        b = int(neighbor_idx[a][int(rng.integers(k_eff))])
        u = float(rng.uniform())
        point = min_vectors[a] + u * (min_vectors[b] - min_vectors[a])
        synthetic.append(LabeledShot(
            pool_index=None, augmented=point, label=minority, synthetic=True))
    return synthetic


def build_training_set(labeled: list[LabeledShot],
                       config: FlameConfig) -> list[LabeledShot]:
    """Equalize class counts with synthetic minority samples when needed.

    Returns the input unchanged when the imbalance ratio stays at or below
    the threshold; otherwise appends exactly ``majority - minority``
    synthetics so the counts match. Real shots are never altered.
    """
    labels = np.asarray([s.label for s in labeled])
    rho = imbalance_ratio(labels)
    if rho <= config.imbalance_threshold:
        return list(labeled)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    deficit = abs(n_pos - n_neg)
    synthetic = smote(labeled, config.smote_neighbors, deficit,
                      config.seed, jitter_sigma=config.jitter_sigma)
    return list(labeled) + synthetic
