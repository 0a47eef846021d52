"""K-means color clustering, maturity ordering and 2-D projection.

The clustering step turns unlabeled fruit-crop chroma vectors into color
classes: k-means++ seeding from a caller-supplied seed, Lloyd iterations until
the largest per-centroid shift drops below a tolerance, and reseeding of empty
clusters so k never shrinks. Everything is single-threaded numpy with exact
(non-expanded) distance computations, so a given (features, k, seed, order)
always produces bit-identical centroids.

Cluster ids are arbitrary; a MaturityMap relabels them as ordered ripening
stages, either by majority vote against reference samples or, lacking those,
by ascending mean a* of the centroid (green chroma is negative a*, red
positive, so lower a* reads as less mature).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotations import DEFAULT_STAGE_NAMES
from .color import FEATURE_DIM, AbFeature
from .errors import CoffeeVisionError

CONVERGENCE_TOL = 1e-4
MAX_ITERATIONS = 300
DEFAULT_K = 4
_CHUNK = 1024  # points per distance-kernel block; bounds peak memory


class TooFewPoints(CoffeeVisionError):
    """Fewer (distinct) samples than requested clusters."""


class DimensionMismatch(CoffeeVisionError):
    """Feature dimension does not match the model."""


class AmbiguousMapping(CoffeeVisionError):
    """Majority voting did not produce a cluster->stage bijection."""


class DegenerateData(CoffeeVisionError):
    """The data has zero variance; no principal directions exist."""


@dataclass
class KMeansModel:
    k: int
    centroids: np.ndarray          # (k, feature_dim)
    inertia: float
    seed: int
    iterations_run: int
    feature_dim: int = FEATURE_DIM

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if not 1 <= self.k <= 16:
            raise ValueError(f"k={self.k} outside [1, 16]")
        if self.centroids.shape != (self.k, self.feature_dim):
            raise ValueError(f"centroids shape {self.centroids.shape} != "
                             f"({self.k}, {self.feature_dim})")
        if self.inertia < 0:
            raise ValueError(f"negative inertia {self.inertia}")
        for i in range(self.k):
            for j in range(i + 1, self.k):
                if np.array_equal(self.centroids[i], self.centroids[j]):
                    raise ValueError(f"centroids {i} and {j} coincide")


@dataclass
class MaturityMap:
    """Bijection cluster id -> maturity stage (0 = least mature)."""

    cluster_to_stage: list[int]
    stage_names: list[str]

    def __post_init__(self):
        k = len(self.cluster_to_stage)
        if sorted(self.cluster_to_stage) != list(range(k)):
            raise ValueError(f"{self.cluster_to_stage} is not a permutation of 0..{k - 1}")
        if len(self.stage_names) != k:
            raise ValueError("need one stage name per cluster")

    def stage_of(self, cluster: int) -> int:
        return self.cluster_to_stage[cluster]

    def name_of(self, cluster: int) -> str:
        return self.stage_names[self.cluster_to_stage[cluster]]

    def inverse(self) -> list[int]:
        """stage -> cluster id."""
        inv = [0] * len(self.cluster_to_stage)
        for cluster, stage in enumerate(self.cluster_to_stage):
            inv[stage] = cluster
        return inv


@dataclass
class PcaProjection:
    components: np.ndarray           # (2, feature_dim), orthonormal rows
    mean: np.ndarray                 # (feature_dim,)
    explained_variance: np.ndarray   # (2,), non-increasing
    points: np.ndarray               # (n, 2)
    cluster_ids: np.ndarray          # (n,)


def _as_matrix(features, feature_dim: int | None = None) -> np.ndarray:
    """Stack AbFeatures (or raw vectors) into an (n, dim) float64 matrix.

    feature_dim=None infers the dimension from the data; a pinned value
    (e.g. a model's) makes mismatches an error.
    """
    if isinstance(features, np.ndarray):
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2:
            raise DimensionMismatch(f"expected a 2-D array, got shape {X.shape}")
    else:
        features = list(features)
        if not features:
            return np.empty((0, feature_dim or FEATURE_DIM))
        X = np.stack([np.asarray(f.values if isinstance(f, AbFeature) else f,
                                 dtype=np.float64)
                      for f in features])
    if feature_dim is not None and X.shape[1] != feature_dim:
        raise DimensionMismatch(f"feature dim {X.shape[1]} != {feature_dim}")
    return X


def _sq_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distances, (n, k), chunked over points."""
    n = X.shape[0]
    out = np.empty((n, centroids.shape[0]))
    for start in range(0, n, _CHUNK):
        block = X[start:start + _CHUNK]
        diff = block[:, None, :] - centroids[None, :, :]
        out[start:start + _CHUNK] = np.einsum("pkd,pkd->pk", diff, diff)
    return out


def _plusplus_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = int(rng.integers(n))
        centroids[i] = X[idx]
        d2 = np.minimum(d2, ((X - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans_fit(features, k: int, seed: int,
               tol: float = CONVERGENCE_TOL, max_iter: int = MAX_ITERATIONS,
               inertia_trace: list | None = None) -> KMeansModel:
    """Fit k-means with k-means++ seeding and Lloyd iterations.

    Stops when every centroid moved less than `tol` (Euclidean) in one
    update, or after `max_iter` iterations. Empty clusters are reseeded to
    the point currently farthest from its assigned centroid, so the returned
    model always has exactly k (distinct) centroids.

    Pass `inertia_trace` (a list) to record the inertia observed at each
    assignment step; the sequence is non-increasing.
    """
    X = _as_matrix(features)
    n = X.shape[0]
    if n < k:
        raise TooFewPoints(f"{n} samples < k={k}")
    if not 1 <= k <= 16:
        raise ValueError(f"k={k} outside [1, 16]")

    rng = np.random.default_rng(seed)
    centroids = _plusplus_init(X, k, rng)

    iterations = 0
    for _ in range(max_iter):
        d2 = _sq_distances(X, centroids)
        labels = d2.argmin(axis=1)
        point_d2 = d2[np.arange(n), labels]
        if inertia_trace is not None:
            inertia_trace.append(float(point_d2.sum()))

        new_centroids = centroids.copy()
        counts = np.bincount(labels, minlength=k)
        for c in range(k):
            if counts[c] > 0:
                new_centroids[c] = X[labels == c].sum(axis=0) / counts[c]
        # reseed empties to the farthest currently assigned point
        reseed_d2 = point_d2.copy()
        for c in np.flatnonzero(counts == 0):
            far = int(reseed_d2.argmax())
            new_centroids[c] = X[far]
            reseed_d2[far] = -1.0

        shift = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        iterations += 1
        if shift < tol:
            break

    final_d2 = _sq_distances(X, centroids).min(axis=1)
    inertia = float(final_d2.sum())
    if inertia_trace is not None:
        inertia_trace.append(inertia)

    for i in range(k):
        for j in range(i + 1, k):
            if np.array_equal(centroids[i], centroids[j]):
                raise TooFewPoints(f"fewer than {k} distinct points")
    return KMeansModel(k=k, centroids=centroids, inertia=inertia,
                       seed=int(seed), iterations_run=iterations,
                       feature_dim=X.shape[1])


def predict_many(model: KMeansModel, features) -> np.ndarray:
    """Nearest-centroid ids; ties go to the lowest cluster index."""
    X = _as_matrix(features, model.feature_dim)
    if X.shape[0] == 0:
        return np.empty(0, dtype=int)
    return _sq_distances(X, model.centroids).argmin(axis=1)


def kmeans_predict(model: KMeansModel, feature) -> int:
    vec = np.asarray(feature.values if isinstance(feature, AbFeature) else feature,
                     dtype=np.float64)
    if vec.shape != (model.feature_dim,):
        raise DimensionMismatch(f"feature shape {vec.shape} != ({model.feature_dim},)")
    return int(predict_many(model, vec[None, :])[0])


def default_stage_names(k: int) -> list[str]:
    if k == len(DEFAULT_STAGE_NAMES):
        return list(DEFAULT_STAGE_NAMES)
    return [f"stage-{i}" for i in range(k)]


def order_clusters(model: KMeansModel, reference=None,
                   stage_names: list[str] | None = None) -> MaturityMap:
    """Assign each cluster an ordered maturity stage.

    With `reference` (pairs of (feature, stage index) covering every stage),
    each cluster takes the stage held by the majority of the reference
    samples that land in it; the result must be a bijection. Without
    reference, clusters are ranked by ascending mean a* of their centroid's
    a-plane, which follows green -> red ripening chemistry but cannot see
    past-red stages, so prefer reference samples when available.
    """
    k = model.k
    if stage_names is not None and len(stage_names) != k:
        raise ValueError(f"need {k} stage names, got {len(stage_names)}")
    names = list(stage_names) if stage_names is not None else default_stage_names(k)

    if reference is None:
        a_means = model.centroids[:, :model.feature_dim // 2].mean(axis=1)
        order = np.argsort(a_means, kind="stable")
        cluster_to_stage = [0] * k
        for stage, cluster in enumerate(order):
            cluster_to_stage[int(cluster)] = stage
        return MaturityMap(cluster_to_stage=cluster_to_stage, stage_names=names)

    reference = list(reference)
    stages = sorted({int(s) for _, s in reference})
    if stages != list(range(k)):
        raise ValueError(f"reference stages {stages} must be exactly 0..{k - 1}")
    votes = np.zeros((k, k), dtype=int)
    feats = [f for f, _ in reference]
    for cluster, (_, stage) in zip(predict_many(model, feats), reference):
        votes[cluster, int(stage)] += 1

    cluster_to_stage = []
    for c in range(k):
        if votes[c].sum() == 0:
            raise AmbiguousMapping(
                f"no reference sample falls in cluster {c}; the clustering "
                "may not separate the stages (try refitting with another seed)")
        cluster_to_stage.append(int(votes[c].argmax()))
    if sorted(cluster_to_stage) != list(range(k)):
        raise AmbiguousMapping(
            f"majority vote gave non-bijective map {cluster_to_stage}; the "
            "clustering may not separate the stages (try refitting with "
            "another seed and comparing inertia)")
    return MaturityMap(cluster_to_stage=cluster_to_stage, stage_names=names)


def pca_project(features, labels) -> PcaProjection:
    """Project features onto their top-2 principal components.

    Components come from an SVD of the mean-centered data (equivalent to the
    eigendecomposition of the covariance); each row's sign is fixed so its
    largest-magnitude entry is positive. Explained variances use the n-1
    normalization.
    """
    X = _as_matrix(features)
    labels = np.asarray(labels)
    n = X.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")
    if labels.shape != (n,):
        raise ValueError("need one cluster id per feature")

    mean = X.mean(axis=0)
    centered = X - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[0] == 0.0:
        raise DegenerateData("all points identical; variance is zero")
    components = vt[:2].copy()
    for row in components:
        if row[np.abs(row).argmax()] < 0:
            row *= -1.0
    return PcaProjection(
        components=components,
        mean=mean,
        explained_variance=s[:2] ** 2 / (n - 1),
        points=centered @ components.T,
        cluster_ids=labels,
    )


def purity(cluster_ids, true_labels) -> float:
    """Fraction of samples whose cluster's majority true label matches theirs."""
    cluster_ids = np.asarray(cluster_ids)
    true_labels = np.asarray(true_labels)
    if cluster_ids.shape != true_labels.shape or cluster_ids.size == 0:
        raise ValueError("need equal-length, nonempty label arrays")
    correct = 0
    for c in np.unique(cluster_ids):
        members = true_labels[cluster_ids == c]
        correct += np.bincount(members).max()
    return correct / cluster_ids.size


# ---------------------------------------------------------------------------
# serialization

MODEL_LAYOUT = "planar-ab"


def save_model(path, model: KMeansModel) -> None:
    doc = {
        "version": 1,
        "k": model.k,
        "feature_dim": model.feature_dim,
        "layout": MODEL_LAYOUT,
        "seed": model.seed,
        "iterations_run": model.iterations_run,
        "inertia": model.inertia,
        "centroids": [list(row) for row in model.centroids],
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_model(path) -> KMeansModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("layout") != MODEL_LAYOUT:
        raise CoffeeVisionError(f"unsupported model layout {doc.get('layout')!r}")
    return KMeansModel(k=doc["k"], centroids=np.array(doc["centroids"]),
                       inertia=doc["inertia"], seed=doc["seed"],
                       iterations_run=doc["iterations_run"],
                       feature_dim=doc["feature_dim"])


def save_maturity(path, maturity: MaturityMap) -> None:
    doc = {"cluster_to_stage": maturity.cluster_to_stage,
           "stage_names": maturity.stage_names}
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_maturity(path) -> MaturityMap:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return MaturityMap(cluster_to_stage=list(doc["cluster_to_stage"]),
                       stage_names=list(doc["stage_names"]))


def write_pca_csv(path, projection: PcaProjection,
                  maturity: MaturityMap | None = None) -> None:
    """CSV of projected points: x,y,cluster,stage (for external plotting)."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["x", "y", "cluster", "stage"])
        for (x, y), cluster in zip(projection.points, projection.cluster_ids):
            stage = maturity.stage_of(int(cluster)) if maturity else int(cluster)
            writer.writerow([repr(float(x)), repr(float(y)), int(cluster), stage])
