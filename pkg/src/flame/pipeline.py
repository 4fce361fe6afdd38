"""End-to-end orchestration: evaluation, the synthetic benchmark, run_flame.

The benchmark stands in for the ambiguous fine-grained detection setting: two
embedding clusters (the target class and a confuser) whose cosine scores
against the emitted query overlap by a controllable amount, so the zero-shot
ranking degrades while the clusters stay separable in embedding space.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .classifier import (
    KernelSpec,
    SvmModel,
    median_heuristic_gamma,
    svm_decision,
    train_svm,
)
from .embedding_io import EmbeddingRecord, pool_gt_labels, pool_vectors
from .errors import (
    AnnotationIncompleteError,
    ConfigError,
    NoPositivesError,
    SingleClassError,
)
from .numerics import cosine_similarities
from .sampler import (
    FlameConfig,
    LabeledShot,
    ShotSelection,
    augment_pool,
    build_training_set,
    select_shots,
)


@dataclass
class EvalReport:
    """Precision-recall summary of a scored ranking against binary truth."""

    curve: list[tuple[float, float]] = field(repr=False)  # (recall, precision)
    average_precision: float
    true_positives: int
    false_positives: int
    false_negatives: int
    threshold: float
    baseline_ap: float | None = None

    def to_dict(self) -> dict:
        return {
            "average_precision": self.average_precision,
            "baseline_ap": self.baseline_ap,
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
            "threshold": self.threshold,
            "curve": [[r, p] for r, p in self.curve],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalReport":
        return cls(
            curve=[(float(r), float(p)) for r, p in doc["curve"]],
            average_precision=float(doc["average_precision"]),
            true_positives=int(doc["true_positives"]),
            false_positives=int(doc["false_positives"]),
            false_negatives=int(doc["false_negatives"]),
            threshold=float(doc["threshold"]),
            baseline_ap=(None if doc.get("baseline_ap") is None
                         else float(doc["baseline_ap"])))


def evaluate(scores, gt, *, threshold: float = 0.0) -> EvalReport:
    """All-points average precision with the precision envelope.

    Items are ranked by descending score; equal scores keep their input
    order. AP is the area under the envelope (running max of precision from
    the right), the all-points interpolated definition. TP/FP/FN counts are
    taken at ``score >= threshold``.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    gt = np.asarray(gt, dtype=np.int64).ravel()
    if scores.shape != gt.shape:
        raise ConfigError("scores and ground truth must align")
    n_pos = int(gt.sum())
    if n_pos == 0:
        raise NoPositivesError("cannot evaluate with zero positive items")
    order = np.argsort(-scores, kind="stable")
    ranked_gt = gt[order]
    tp = np.cumsum(ranked_gt)
    ranks = np.arange(1, scores.size + 1)
    precision = tp / ranks
    recall = tp / n_pos
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    ap = float(envelope[ranked_gt == 1].sum() / n_pos)
    predicted = scores >= threshold
    tp_at = int(np.sum(predicted & (gt == 1)))
    fp_at = int(np.sum(predicted & (gt == 0)))
    fn_at = int(np.sum(~predicted & (gt == 1)))
    curve = [(float(r), float(p)) for r, p in zip(recall, precision)]
    return EvalReport(curve=curve, average_precision=ap,
                      true_positives=tp_at, false_positives=fp_at,
                      false_negatives=fn_at, threshold=threshold)


@dataclass
class SyntheticBenchmarkSpec:
    """Shape of the desk-scale ambiguous two-cluster benchmark."""

    dim: int = 64
    pool_size: int = 5000
    positive_fraction: float = 0.3
    separation: float = 8.0
    overlap: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.positive_fraction < 1.0):
            raise ConfigError("positive_fraction must lie in (0, 1)")
        if self.separation < 0:
            raise ConfigError("separation must be >= 0")
        if not (0.0 <= self.overlap <= 1.0):
            raise ConfigError("overlap must lie in [0, 1]")
        if self.dim < 4:
            raise ConfigError("benchmark needs dim >= 4")


_SIM_WINDOW = 0.12     # width of each class's similarity interval
_SIM_CENTER = 0.55     # top of the positive-class interval sits near here
_CORE_NOISE = 0.02     # angular noise norm inside each class core
_HALO_NOISE = 0.12     # angular noise norm of the diffuse halo
_HALO_FRACTION = 0.25  # share of each class drawn from the halo
_RADIUS_JITTER = 0.02  # relative spread of embedding norms


def _unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def generate_synthetic_benchmark(
        spec: SyntheticBenchmarkSpec) -> tuple[list[EmbeddingRecord], np.ndarray]:
    """Emit a labeled pool and query with controlled score ambiguity.

    Each embedding is built as ``r (c t + sqrt(1-c^2) w)`` with ``c`` the
    exact cosine to the query ``t`` and ``w`` a unit direction orthogonal to
    ``t``. Per-class ``c`` values are uniform over windows whose overlap
    fraction equals ``spec.overlap`` (0 = score-separable, 1 = identical
    score distributions). The orthogonal directions give each class a dense
    core plus a diffuse halo (the usual shape of proposal-embedding clouds);
    the chord between class cores is ``separation`` times the core noise, so
    the classes stay mostly separable in embedding space even when the
    zero-shot score is ambiguous.
    """
    rng = np.random.default_rng(spec.seed)
    d = spec.dim
    t = _unit(rng.normal(size=d))

    def perp_unit() -> np.ndarray:
        w = rng.normal(size=d)
        w -= (w @ t) * t
        return _unit(w)

    u = perp_unit()
    v = rng.normal(size=d)
    v -= (v @ t) * t
    v -= (v @ u) * u
    v = _unit(v)

    n = spec.pool_size
    n_pos = max(1, min(n - 1, round(n * spec.positive_fraction)))
    labels = np.zeros(n, dtype=np.int64)
    labels[:n_pos] = 1

    lo_pos = _SIM_CENTER - _SIM_WINDOW
    shift = (1.0 - spec.overlap) * _SIM_WINDOW
    lo_neg = lo_pos - shift
    sims = np.where(labels == 1,
                    rng.uniform(lo_pos, lo_pos + _SIM_WINDOW, size=n),
                    rng.uniform(lo_neg, lo_neg + _SIM_WINDOW, size=n))

    # class core directions in the complement of t, `separation` core-noise
    # units apart (chord distance on the unit sphere)
    chord = spec.separation * _CORE_NOISE
    psi = 2.0 * np.arcsin(min(1.0, chord / 2.0))
    class_dir = {1: u, 0: np.cos(psi) * u + np.sin(psi) * v}

    in_halo = rng.uniform(size=n) < _HALO_FRACTION
    perp = np.empty((n, d))
    for i in range(n):
        noise = _HALO_NOISE if in_halo[i] else _CORE_NOISE
        perp[i] = _unit(class_dir[int(labels[i])] + noise * perp_unit())

    radius = rng.uniform(1.0 - _RADIUS_JITTER, 1.0 + _RADIUS_JITTER, size=n)
    X = radius[:, None] * (sims[:, None] * t
                           + np.sqrt(1.0 - sims ** 2)[:, None] * perp)

    order = rng.permutation(n)
    records = [EmbeddingRecord(id=f"e{i:05d}", vector=X[j],
                               gt_label=int(labels[j]),
                               meta={"cluster": "target" if labels[j] else "confuser"})
               for i, j in enumerate(order)]
    return records, t


Oracle = Callable[[str], int | None]


def make_file_oracle(pool: list[EmbeddingRecord]) -> Oracle:
    """Oracle that answers from the records' ground-truth labels."""
    gt = {rec.id: rec.gt_label for rec in pool}

    def oracle(shot_id: str) -> int | None:
        return gt.get(shot_id)

    return oracle


@dataclass
class FlameRunResult:
    model: SvmModel
    selection: ShotSelection
    report: EvalReport
    shot_ids: list[str]
    labels: dict[str, int]
    post_labeling_seconds: float
    effective_k: int


def resolve_kernel(config: FlameConfig, X: np.ndarray) -> KernelSpec:
    if config.kernel == "linear":
        return KernelSpec(kind="linear")
    gamma = config.gamma if config.gamma is not None else median_heuristic_gamma(X)
    return KernelSpec(kind="rbf", gamma=gamma)


def collect_labels(shot_ids: list[str], oracle: Oracle) -> dict[str, int]:
    """Query the oracle for every shot; partial results raise with payload."""
    labels: dict[str, int] = {}
    for shot_id in shot_ids:
        try:
            value = oracle(shot_id)
        except Exception as exc:  # oracle timeout / abort
            raise AnnotationIncompleteError(
                f"labeling stopped at shot {shot_id!r}: {exc}",
                partial_labels=labels) from exc
        if value is None:
            raise AnnotationIncompleteError(
                f"oracle returned no label for shot {shot_id!r}",
                partial_labels=labels)
        if value not in (0, 1):
            raise AnnotationIncompleteError(
                f"oracle returned non-binary label {value!r} for {shot_id!r}",
                partial_labels=labels)
        labels[shot_id] = int(value)
    return labels


def train_from_labels(pool: list[EmbeddingRecord], query: np.ndarray,
                      labels: dict[str, int],
                      config: FlameConfig) -> tuple[SvmModel, list[LabeledShot]]:
    """Build the (possibly oversampled) training set and fit the SVM."""
    ordered = sorted(pool, key=lambda rec: rec.id)
    index = {rec.id: i for i, rec in enumerate(ordered)}
    augmented = augment_pool(pool_vectors(ordered), query)
    labeled = []
    for shot_id, value in sorted(labels.items()):
        if shot_id not in index:
            raise ConfigError(f"label for id {shot_id!r} not present in pool")
        labeled.append(LabeledShot(
            pool_index=index[shot_id],
            augmented=augmented[index[shot_id]].augmented,
            label=int(value)))
    values = {s.label for s in labeled}
    if len(values) < 2:
        raise SingleClassError(
            "all collected labels belong to one class; label more shots or "
            "widen the density band", labels=sorted(values))
    training = build_training_set(labeled, config)
    X = np.stack([s.augmented for s in training])
    y = np.asarray([1.0 if s.label == 1 else -1.0 for s in training])
    kernel = resolve_kernel(config, X)
    model = train_svm(X, y, config.svm_c, kernel, config.seed)
    return model, training


def score_pool(model: SvmModel, pool: list[EmbeddingRecord],
               query: np.ndarray) -> tuple[list[str], np.ndarray]:
    """Decision scores for every pool record, in canonical id order."""
    ordered = sorted(pool, key=lambda rec: rec.id)
    augmented = augment_pool(pool_vectors(ordered), query)
    A = np.stack([e.augmented for e in augmented])
    return [rec.id for rec in ordered], svm_decision(model, A)


def sample_shots(pool: list[EmbeddingRecord], query: np.ndarray,
                 config: FlameConfig) -> tuple[ShotSelection, list[str]]:
    """Run the selection stage and map indices back to record ids.

    The pool is canonicalized by id sort first, so CLI and service paths
    produce identical selections for identical inputs.
    """
    ordered = sorted(pool, key=lambda rec: rec.id)
    if config.similarity_floor is not None:
        sims = cosine_similarities(pool_vectors(ordered), query)
        ordered = [rec for rec, c in zip(ordered, sims)
                   if c >= config.similarity_floor]
        if not ordered:
            raise ConfigError("similarity_floor filtered out the entire pool")
    augmented = augment_pool(pool_vectors(ordered), query)
    selection = select_shots(augmented, config)
    shot_ids = [ordered[i].id for i in selection.shot_indices]
    return selection, shot_ids


def candidate_payload(pool: list[EmbeddingRecord], query: np.ndarray,
                      config: FlameConfig, selection: ShotSelection,
                      shot_ids: list[str]) -> list[dict]:
    """JSON-ready candidate descriptions shared by the CLI and the service.

    Includes a 2-D PCA preview coordinate per shot so annotation clients can
    render something when no image crop is attached. Ground truth is never
    included.
    """
    from .numerics import fit_pca, project

    ordered = sorted(pool, key=lambda rec: rec.id)
    by_id = {rec.id: rec for rec in ordered}
    augmented = augment_pool(pool_vectors(ordered), query)
    A = np.stack([e.augmented for e in augmented])
    preview = None
    if A.shape[0] >= 3 and A.shape[1] >= 2:
        pca2 = fit_pca(A, 2)
        preview = project(pca2, A)
    index = {rec.id: i for i, rec in enumerate(ordered)}
    out = []
    for shot_id, prov in zip(shot_ids, selection.provenance):
        i = index[shot_id]
        entry = {
            "shot_id": shot_id,
            "similarity": augmented[i].similarity,
            "density": prov.density,
            "cluster_id": prov.cluster_id,
            "distance_to_center": prov.distance_to_center,
            "image_ref": by_id[shot_id].image_ref,
            "preview": (preview[i].tolist() if preview is not None else None),
        }
        out.append(entry)
    return out


def run_flame(pool: list[EmbeddingRecord], query: np.ndarray,
              config: FlameConfig, oracle: Oracle) -> FlameRunResult:
    """Full pipeline: select shots, label, balance, train, evaluate.

    The evaluation compares the trained classifier's ranking of the whole
    pool against the zero-shot cosine ranking on the same ground truth. The
    reported wall clock covers only the post-labeling phase.
    """
    selection, shot_ids = sample_shots(pool, query, config)
    labels = collect_labels(shot_ids, oracle)
    start = time.perf_counter()
    model, _ = train_from_labels(pool, query, labels, config)
    ordered_ids, scores = score_pool(model, pool, query)
    ordered = sorted(pool, key=lambda rec: rec.id)
    gt = pool_gt_labels(ordered)
    if gt is not None:
        report = evaluate(scores, gt)
        baseline_scores = cosine_similarities(pool_vectors(ordered), query)
        report.baseline_ap = evaluate(baseline_scores, gt).average_precision
    else:
        report = EvalReport(curve=[], average_precision=float("nan"),
                            true_positives=0, false_positives=0,
                            false_negatives=0, threshold=0.0)
    elapsed = time.perf_counter() - start
    return FlameRunResult(model=model, selection=selection, report=report,
                          shot_ids=shot_ids, labels=labels,
                          post_labeling_seconds=elapsed,
                          effective_k=selection.effective_k)
