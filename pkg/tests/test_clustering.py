import numpy as np
import pytest

from coffeevision.clustering import (AmbiguousMapping, DegenerateData,
                                     DimensionMismatch, KMeansModel,
                                     MaturityMap, TooFewPoints, kmeans_fit,
                                     kmeans_predict, load_maturity, load_model,
                                     order_clusters, pca_project, predict_many,
                                     purity, save_maturity, save_model,
                                     write_pca_csv)
from coffeevision.color import FEATURE_DIM
from oracles import exhaustive_two_means


def vec(a_value: float, b_value: float = 0.0) -> np.ndarray:
    """A feature vector with constant a- and b-planes."""
    v = np.empty(FEATURE_DIM)
    v[:784] = a_value
    v[784:] = b_value
    return v


def model_from_centroids(rows) -> KMeansModel:
    c = np.stack(rows)
    return KMeansModel(k=len(rows), centroids=c, inertia=0.0, seed=0,
                       iterations_run=0, feature_dim=c.shape[1])


class TestKMeansFit:
    def test_two_separated_groups(self):
        X = np.stack([vec(0.0)] * 6 + [vec(100.0)] * 6)
        X += np.linspace(0, 0.5, 12)[:, None]   # break exact duplicates
        model = kmeans_fit(X, k=2, seed=3)
        means = sorted(model.centroids[:, 0])
        expected = sorted([X[:6, 0].mean(), X[6:, 0].mean()])
        assert np.allclose(means, expected, atol=1e-12)

    def test_k1_closed_form(self):
        rng = np.random.default_rng(8)
        X = rng.normal(0, 10, size=(40, FEATURE_DIM))
        model = kmeans_fit(X, k=1, seed=0)
        assert np.allclose(model.centroids[0], X.mean(axis=0), atol=1e-12)
        assert model.inertia == pytest.approx(((X - X.mean(axis=0)) ** 2).sum(),
                                              rel=1e-12)

    def test_planted_instance_matches_exhaustive(self):
        rng = np.random.default_rng(12)
        pts = np.concatenate([rng.normal(0, 1, size=(4, 4)),
                              rng.normal(8, 1, size=(4, 4))])
        model = kmeans_fit(pts, k=2, seed=1)
        best_inertia, _ = exhaustive_two_means([tuple(p) for p in pts])
        assert model.inertia == pytest.approx(best_inertia, rel=1e-9)

    def test_too_few_points(self):
        with pytest.raises(TooFewPoints):
            kmeans_fit(np.zeros((2, FEATURE_DIM)), k=3, seed=0)

    def test_duplicate_points_cannot_make_k_distinct(self):
        X = np.zeros((5, FEATURE_DIM))
        with pytest.raises(TooFewPoints):
            kmeans_fit(X, k=2, seed=0)

    def test_deterministic_bit_identical(self):
        rng = np.random.default_rng(21)
        X = rng.normal(0, 5, size=(60, FEATURE_DIM))
        a = kmeans_fit(X, k=4, seed=77)
        b = kmeans_fit(X, k=4, seed=77)
        assert np.array_equal(a.centroids, b.centroids)
        assert a.inertia == b.inertia
        assert a.iterations_run == b.iterations_run

    def test_inertia_trace_non_increasing(self):
        rng = np.random.default_rng(33)
        X = rng.normal(0, 5, size=(80, FEATURE_DIM))
        trace = []
        model = kmeans_fit(X, k=3, seed=5, inertia_trace=trace)
        assert len(trace) == model.iterations_run + 1
        assert all(b <= a for a, b in zip(trace, trace[1:]))
        assert model.inertia == trace[-1] <= trace[0]

    def test_fuzz_models_stay_valid(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = int(rng.integers(6, 30))
            k = int(rng.integers(1, min(n, 7)))
            X = rng.normal(0, 1, size=(n, 8))
            model = kmeans_fit(X, k=k, seed=int(rng.integers(1 << 31)))
            assert model.centroids.shape == (k, 8)
            assert np.isfinite(model.inertia) and model.inertia >= 0
            labels = predict_many(model, X)
            assert set(np.unique(labels)) <= set(range(k))


class TestPredict:
    def test_centroid_maps_to_itself(self):
        model = model_from_centroids([vec(-20), vec(5), vec(30)])
        for i in range(3):
            assert kmeans_predict(model, model.centroids[i]) == i

    def test_tie_breaks_to_lowest_index(self):
        model = model_from_centroids([vec(-10), vec(10)])
        assert kmeans_predict(model, vec(0.0)) == 0

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(19)
        model = model_from_centroids([rng.normal(0, 3, FEATURE_DIM) for _ in range(5)])
        feats = rng.normal(0, 3, size=(100, FEATURE_DIM))
        got = predict_many(model, feats)
        for f, label in zip(feats, got):
            dists = [((f - c) ** 2).sum() for c in model.centroids]
            assert label == int(np.argmin(dists))

    def test_dimension_mismatch(self):
        model = model_from_centroids([vec(0), vec(1)])
        with pytest.raises(DimensionMismatch):
            kmeans_predict(model, np.zeros(10))


class TestOrderClusters:
    def test_ascending_a_star_heuristic(self):
        # clusters given in shuffled a* order: +30, -20, +5
        model = model_from_centroids([vec(30), vec(-20), vec(5)])
        m = order_clusters(model)
        assert m.cluster_to_stage == [2, 0, 1]

    def test_majority_vote(self):
        model = model_from_centroids([vec(-10), vec(10)])
        # cluster 1's members are 90% stage 0, cluster 0's are 90% stage 1
        reference = ([(vec(9), 0)] * 9 + [(vec(11), 1)] * 1 +
                     [(vec(-9), 1)] * 9 + [(vec(-11), 0)] * 1)
        m = order_clusters(model, reference)
        assert m.cluster_to_stage == [1, 0]

    def test_ambiguous_when_not_bijective(self):
        model = model_from_centroids([vec(-10), vec(10)])
        reference = [(vec(-9), 0), (vec(9), 0), (vec(-11), 1), (vec(11), 1)]
        # both clusters tie 1:1; argmax tie-break gives stage 0 for both
        with pytest.raises(AmbiguousMapping):
            order_clusters(model, reference)

    def test_empty_cluster_is_ambiguous(self):
        model = model_from_centroids([vec(-10), vec(0), vec(10)])
        reference = [(vec(-10), 0), (vec(0), 1), (vec(0.1), 2)]
        with pytest.raises(AmbiguousMapping):
            order_clusters(model, reference)

    def test_reference_must_cover_stages(self):
        model = model_from_centroids([vec(-10), vec(10)])
        with pytest.raises(ValueError):
            order_clusters(model, [(vec(-9), 0), (vec(9), 2)])

    def test_recovers_generator_stage_order(self, berry_model, berry_features):
        features, stages = berry_features
        m = order_clusters(berry_model, list(zip(features, stages)))
        labels = predict_many(berry_model, features)
        mapped = np.array([m.stage_of(int(c)) for c in labels])
        assert (mapped == stages).mean() >= 0.95

    def test_map_is_permutation_and_inverse(self):
        m = MaturityMap(cluster_to_stage=[2, 0, 1], stage_names=["a", "b", "c"])
        inv = m.inverse()
        assert [m.cluster_to_stage[inv[s]] for s in range(3)] == [0, 1, 2]
        with pytest.raises(ValueError):
            MaturityMap(cluster_to_stage=[0, 0, 1], stage_names=["a", "b", "c"])


class TestPca:
    def test_line_in_a_plane(self):
        t = np.linspace(-5, 5, 30)
        X = np.stack([vec(v, 2 * v) for v in t])
        proj = pca_project(X, np.zeros(30, dtype=int))
        assert proj.explained_variance[1] == pytest.approx(0.0, abs=1e-9)
        # first component is the (a, b) = (1, 2) direction, normalized
        comp = proj.components[0]
        direction = vec(1.0, 2.0) / np.linalg.norm(vec(1.0, 2.0))
        assert np.allclose(np.abs(comp @ direction), 1.0, atol=1e-9)

    def test_exact_low_rank_reconstruction(self):
        rng = np.random.default_rng(77)
        basis = np.linalg.qr(rng.normal(size=(FEATURE_DIM, 2)))[0].T
        coords = rng.normal(0, 3, size=(40, 2))
        X = coords @ basis
        proj = pca_project(X, np.zeros(40, dtype=int))
        recon = proj.points @ proj.components + proj.mean
        assert np.abs(recon - X).max() < 1e-9

    def test_matches_eigh_oracle(self):
        rng = np.random.default_rng(15)
        X = rng.normal(0, 2, size=(50, FEATURE_DIM))
        proj = pca_project(X, np.zeros(50, dtype=int))
        cov = np.cov(X, rowvar=False)
        eigvals = np.linalg.eigvalsh(cov)[::-1]
        assert proj.explained_variance == pytest.approx(eigvals[:2], rel=1e-9)

    def test_orthonormal_and_variance_bound(self):
        rng = np.random.default_rng(16)
        X = rng.normal(0, 2, size=(30, FEATURE_DIM))
        proj = pca_project(X, np.zeros(30, dtype=int))
        gram = proj.components @ proj.components.T
        assert np.abs(gram - np.eye(2)).max() < 1e-9
        total = ((X - X.mean(axis=0)) ** 2).sum() / (len(X) - 1)
        assert proj.explained_variance.sum() <= total + 1e-6
        assert proj.explained_variance[0] >= proj.explained_variance[1] >= 0

    def test_sign_convention(self):
        rng = np.random.default_rng(17)
        X = rng.normal(0, 2, size=(30, FEATURE_DIM))
        proj = pca_project(X, np.zeros(30, dtype=int))
        for row in proj.components:
            assert row[np.abs(row).argmax()] > 0

    def test_degenerate_data(self):
        X = np.tile(vec(3.0), (5, 1))
        with pytest.raises(DegenerateData):
            pca_project(X, np.zeros(5, dtype=int))

    def test_needs_three_points(self):
        with pytest.raises(ValueError):
            pca_project(np.zeros((2, FEATURE_DIM)), np.zeros(2, dtype=int))


class TestPurity:
    def test_perfect_and_mixed(self):
        assert purity([0, 0, 1, 1], [3, 3, 4, 4]) == 1.0
        assert purity([0, 0, 0, 0], [0, 0, 1, 1]) == 0.5


class TestSerialization:
    def test_model_roundtrip_bit_identical(self, tmp_path, berry_model):
        path = tmp_path / "model.json"
        save_model(path, berry_model)
        back = load_model(path)
        assert np.array_equal(back.centroids, berry_model.centroids)
        assert back.inertia == berry_model.inertia
        assert (back.k, back.seed, back.iterations_run) == \
            (berry_model.k, berry_model.seed, berry_model.iterations_run)

    def test_maturity_roundtrip(self, tmp_path):
        m = MaturityMap(cluster_to_stage=[1, 0], stage_names=["x", "y"])
        save_maturity(tmp_path / "m.json", m)
        back = load_maturity(tmp_path / "m.json")
        assert back.cluster_to_stage == m.cluster_to_stage
        assert back.stage_names == m.stage_names

    def test_pca_csv(self, tmp_path):
        rng = np.random.default_rng(6)
        X = rng.normal(0, 2, size=(10, FEATURE_DIM))
        proj = pca_project(X, np.arange(10) % 3)
        out = tmp_path / "pca.csv"
        write_pca_csv(out, proj)
        lines = out.read_text().splitlines()
        assert lines[0] == "x,y,cluster,stage"
        assert len(lines) == 11
