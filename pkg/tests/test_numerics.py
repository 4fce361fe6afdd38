import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from flame.errors import (
    ConfigError,
    DegenerateVectorError,
    DimensionError,
    EmptyPoolError,
    InsufficientSamplesError,
)
from flame.numerics import (
    cosine_similarity,
    fit_kde,
    fit_pca,
    kde_density,
    kde_mode,
    kmeans,
    nearest_to_centers,
    project,
    scott_bandwidth,
)

from .oracles import kde_density_bruteforce, pca_projection_oracle


class TestCosineSimilarity:
    def test_identical_direction(self):
        assert cosine_similarity([1.0, 0.0], [1.0, 0.0]) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_hand_arithmetic(self):
        # (3,4).(4,3) = 24, norms 5 and 5
        assert cosine_similarity([3.0, 4.0], [4.0, 3.0]) == pytest.approx(
            24.0 / 25.0, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            cosine_similarity([1.0, 0.0], [1.0, 0.0, 0.0])

    def test_zero_norm(self):
        with pytest.raises(DegenerateVectorError):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])

    @given(arrays(np.float64, 5, elements=st.floats(-100, 100)),
           arrays(np.float64, 5, elements=st.floats(-100, 100)))
    def test_bounded(self, x, t):
        if np.linalg.norm(x) == 0 or np.linalg.norm(t) == 0:
            return
        assert -1.0 <= cosine_similarity(x, t) <= 1.0


class TestPca:
    def test_collinear_data(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        model = fit_pca(X, 1)
        np.testing.assert_allclose(model.components[0],
                                   [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-12)
        total = np.var(X, axis=0, ddof=1).sum()
        assert model.explained_variance[0] == pytest.approx(total, rel=1e-12)

    def test_symmetric_cross_equal_variance(self):
        X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        model = fit_pca(X, 2)
        assert model.explained_variance[0] == pytest.approx(
            model.explained_variance[1], rel=1e-12)

    def test_matches_eigendecomposition_oracle(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(50, 8)) * rng.uniform(0.5, 3.0, size=8)
        model = fit_pca(X, 3)
        ours = project(model, X)
        theirs, eigvals, _ = pca_projection_oracle(X, 3)
        for axis in range(3):
            direct = np.max(np.abs(ours[:, axis] - theirs[:, axis]))
            flipped = np.max(np.abs(ours[:, axis] + theirs[:, axis]))
            assert min(direct, flipped) < 1e-8
        np.testing.assert_allclose(model.explained_variance, eigvals, atol=1e-8)

    def test_components_orthonormal(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(30, 6))
        model = fit_pca(X, 4)
        gram = model.components @ model.components.T
        np.testing.assert_allclose(gram, np.eye(4), atol=1e-10)

    def test_variance_sorted_descending(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(40, 5))
        model = fit_pca(X, 4)
        assert np.all(np.diff(model.explained_variance) <= 1e-12)

    def test_rank_deficient_padding(self):
        # rank-1 data in 3-D, ask for 2 axes
        rng = np.random.default_rng(11)
        direction = np.array([1.0, 2.0, -1.0])
        X = np.outer(rng.normal(size=6), direction)
        model = fit_pca(X, 2)
        assert model.explained_variance[1] == pytest.approx(0.0, abs=1e-10)
        gram = model.components @ model.components.T
        np.testing.assert_allclose(gram, np.eye(2), atol=1e-10)

    def test_component_count_out_of_range(self):
        X = np.eye(3)
        with pytest.raises(ConfigError):
            fit_pca(X, 3)  # n-1 == 2 < 3
        with pytest.raises(ConfigError):
            fit_pca(X, 0)

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_orthonormal_property(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(12, 5))
        model = fit_pca(X, 3)
        gram = model.components @ model.components.T
        assert np.max(np.abs(gram - np.eye(3))) <= 1e-10


class TestProjection:
    def test_mean_projects_to_zero(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(20, 4))
        model = fit_pca(X, 2)
        np.testing.assert_allclose(project(model, X.mean(axis=0)),
                                   np.zeros(2), atol=1e-10)

    def test_collinear_signed_distance(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        model = fit_pca(X, 1)
        # (3,3) sits 3*sqrt(2) along the line; the mean (1,1) sits at sqrt(2)
        got = project(model, np.array([3.0, 3.0]))
        assert got[0] == pytest.approx(3 * np.sqrt(2) - np.sqrt(2), abs=1e-12)

    def test_dimension_mismatch(self):
        X = np.eye(4)
        model = fit_pca(X, 2)
        with pytest.raises(DimensionError):
            project(model, np.ones(3))


class TestKde:
    def test_single_kernel_peak(self):
        model = fit_kde(np.array([[0.0]]), 1.0)
        assert kde_density(model, np.array([0.0])) == pytest.approx(
            1.0 / np.sqrt(2 * np.pi), rel=1e-12)

    def test_tail_decay(self):
        model = fit_kde(np.array([[0.0]]), 1.0)
        assert kde_density(model, np.array([100.0])) < 1e-100

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(13)
        samples = rng.normal(size=(200, 2))
        model = fit_kde(samples, 0.4)
        queries = rng.normal(size=(20, 2)) * 1.5
        ours = kde_density(model, queries)
        for q, got in zip(queries, ours):
            want = kde_density_bruteforce(samples, 0.4, q)
            assert got == pytest.approx(want, rel=1e-12)

    def test_integrates_to_one_1d(self):
        rng = np.random.default_rng(19)
        samples = rng.normal(size=(80, 1))
        h = 0.5
        model = fit_kde(samples, h)
        grid = np.linspace(samples.min() - 6 * h, samples.max() + 6 * h, 4001)
        dens = kde_density(model, grid.reshape(-1, 1))
        integral = np.trapezoid(dens, grid)
        assert integral == pytest.approx(1.0, abs=1e-3)

    def test_integrates_to_one_2d(self):
        rng = np.random.default_rng(23)
        samples = rng.normal(size=(40, 2))
        h = 0.6
        model = fit_kde(samples, h)
        lo = samples.min(axis=0) - 6 * h
        hi = samples.max(axis=0) + 6 * h
        gx = np.linspace(lo[0], hi[0], 301)
        gy = np.linspace(lo[1], hi[1], 301)
        xx, yy = np.meshgrid(gx, gy)
        dens = kde_density(model, np.column_stack([xx.ravel(), yy.ravel()]))
        integral = np.trapezoid(np.trapezoid(dens.reshape(xx.shape), gy, axis=0), gx)
        assert integral == pytest.approx(1.0, abs=1e-3)

    def test_bandwidth_must_be_positive(self):
        with pytest.raises(ConfigError):
            fit_kde(np.array([[0.0]]), 0.0)

    def test_dimension_mismatch(self):
        model = fit_kde(np.zeros((3, 2)), 1.0)
        with pytest.raises(DimensionError):
            kde_density(model, np.zeros(3))


class TestKdeMode:
    def test_symmetric_center(self):
        model = fit_kde(np.array([[-1.0], [0.0], [1.0]]), 1.0)
        point, density = kde_mode(model)
        assert point[0] == 0.0
        assert density == pytest.approx(
            kde_density_bruteforce(model.samples, 1.0, np.array([0.0])), rel=1e-12)

    def test_single_sample(self):
        model = fit_kde(np.array([[4.2]]), 0.7)
        point, _ = kde_mode(model)
        assert point[0] == 4.2

    def test_bimodal_matches_exhaustive_scan(self):
        rng = np.random.default_rng(31)
        samples = np.concatenate([rng.normal(-3, 0.5, 250),
                                  rng.normal(3, 0.8, 250)]).reshape(-1, 1)
        model = fit_kde(samples, 0.3)
        point, density = kde_mode(model)
        scan = [kde_density_bruteforce(samples, 0.3, s) for s in samples]
        best = int(np.argmax(scan))
        assert point[0] == samples[best, 0]
        assert density == pytest.approx(scan[best], rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(EmptyPoolError):
            fit_kde(np.zeros((0, 1)), 1.0)


class TestKmeans:
    def test_k_distinct_points(self):
        X = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]])
        result = kmeans(X, 3, seed=0)
        assert result.inertia == pytest.approx(0.0, abs=1e-12)
        assert sorted(result.assignment.tolist()) == [0, 1, 2]

    def test_two_blobs(self):
        rng = np.random.default_rng(41)
        a = rng.normal([0, 0], 0.3, size=(25, 2))
        b = rng.normal([10, 10], 0.3, size=(25, 2))
        X = np.vstack([a, b])
        result = kmeans(X, 2, seed=1)
        first, second = result.assignment[:25], result.assignment[25:]
        assert len(set(first.tolist())) == 1
        assert len(set(second.tolist())) == 1
        assert first[0] != second[0]

    def test_beats_random_assignment_baseline(self):
        rng = np.random.default_rng(43)
        X = rng.normal(size=(40, 3))
        result = kmeans(X, 5, seed=7)
        baseline_rng = np.random.default_rng(99)
        for _ in range(100):
            assignment = baseline_rng.integers(0, 5, size=40)
            inertia = 0.0
            for c in range(5):
                members = X[assignment == c]
                if len(members) == 0:
                    continue
                center = members.mean(axis=0)
                inertia += float(((members - center) ** 2).sum())
            assert result.inertia <= inertia + 1e-9

    def test_deterministic(self):
        rng = np.random.default_rng(47)
        X = rng.normal(size=(60, 4))
        r1 = kmeans(X, 6, seed=3)
        r2 = kmeans(X, 6, seed=3)
        assert np.array_equal(r1.centers, r2.centers)
        assert np.array_equal(r1.assignment, r2.assignment)
        assert r1.inertia == r2.inertia

    def test_inertia_monotone_in_sweeps(self):
        rng = np.random.default_rng(53)
        X = rng.normal(size=(80, 2))
        inertias = [kmeans(X, 4, seed=11, max_iter=t).inertia
                    for t in range(1, 12)]
        assert all(a >= b - 1e-9 for a, b in zip(inertias, inertias[1:]))

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientSamplesError):
            kmeans(np.zeros((2, 2)), 3, seed=0)

    def test_duplicate_points_fill_all_clusters(self):
        X = np.array([[1.0, 1.0]] * 4 + [[2.0, 2.0]])
        result = kmeans(X, 3, seed=5)
        assert set(result.assignment.tolist()) == {0, 1, 2}


class TestNearestToCenters:
    def test_singletons(self):
        X = np.array([[0.0], [10.0]])
        result = kmeans(X, 2, seed=0)
        picks = nearest_to_centers(result, X)
        assert sorted(picks) == [0, 1]

    def test_blob_members_only(self):
        rng = np.random.default_rng(61)
        a = rng.normal([0, 0], 0.2, size=(20, 2))
        b = rng.normal([8, 8], 0.2, size=(20, 2))
        X = np.vstack([a, b])
        result = kmeans(X, 2, seed=2)
        picks = nearest_to_centers(result, X)
        sides = sorted(p // 20 for p in picks)
        assert sides == [0, 1]

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(67)
        X = rng.normal(size=(40, 2))
        result = kmeans(X, 5, seed=9)
        picks = nearest_to_centers(result, X)
        for c in range(5):
            best, best_d = None, np.inf
            for i in range(40):
                if result.assignment[i] != c:
                    continue
                d = float(np.linalg.norm(X[i] - result.centers[c]))
                if d < best_d:
                    best, best_d = i, d
            assert picks[c] == best


def test_scott_bandwidth_positive():
    rng = np.random.default_rng(71)
    assert scott_bandwidth(rng.normal(size=(100, 1))) > 0
    assert scott_bandwidth(np.ones((10, 2))) > 0
