"""Dataset-level semantic clustering of selected proposal features.

Top-ranked proposal features from all images are unit-normalized and
k-means clustered; the cluster count is chosen by the best silhouette
score. The mean of the lowest-ranked proposals' features forms a
background pattern; centroids within cosine distance t_bg of it are
labeled background, the rest become the discovered foreground classes.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateInputError, PipelineError
from .parts import kmeans

DEFAULT_T_BG = 0.8
DEFAULT_K_RANGE = (2, 30)
SILHOUETTE_SAMPLE_CAP = 5000


@dataclass
class ClusterModel:
    """Centroids with foreground flags and contiguous foreground class ids."""

    centroids: np.ndarray  # float64 (k, dim)
    is_foreground: np.ndarray  # bool (k,)
    bg_pattern: np.ndarray  # float64 (dim,)
    t_bg: float
    class_ids: np.ndarray  # int64 (k,), -1 for background clusters

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]

    @property
    def n_classes(self) -> int:
        return int(self.is_foreground.sum())

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def foreground_centroids(self) -> np.ndarray:
        return self.centroids[self.is_foreground]


def _unit_rows(features, name: str) -> np.ndarray:
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] == 0:
        raise DegenerateInputError(f"{name} must be a nonempty 2-D array")
    norms = np.linalg.norm(feats, axis=1)
    if (norms == 0).any():
        raise DegenerateInputError(f"zero-norm vector in {name}")
    return feats / norms[:, None]


def silhouette_score(points, labels) -> float:
    """Mean silhouette over all points, Euclidean distance.

    For each point, a is the mean distance to its own cluster (excluding
    itself), b the mean distance to the nearest other cluster; the point
    scores (b - a) / max(a, b), with singleton clusters scoring 0.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    k = int(labels.max()) + 1
    counts = np.bincount(labels, minlength=k)
    if (counts == 0).any() or k < 2:
        raise DegenerateInputError("silhouette needs >= 2 nonempty clusters")
    if (counts == 1).all():
        raise DegenerateInputError("silhouette undefined for singleton-only clustering")
    sums = kernels.cluster_distance_sums(points, labels, k)
    own = counts[labels]
    s = np.zeros(len(points))
    multi = own > 1
    a = np.zeros(len(points))
    a[multi] = sums[np.arange(len(points)), labels][multi] / (own[multi] - 1)
    other = sums / counts[None, :]
    other[np.arange(len(points)), labels] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    s[multi] = (b[multi] - a[multi]) / denom[multi]
    return float(s.mean())


def select_k(points, k_range, seed: int, sample_cap: int = SILHOUETTE_SAMPLE_CAP) -> int:
    """Cluster count maximizing the silhouette score over ``k_range``.

    Ties resolve to the smallest k. When the pool exceeds ``sample_cap``,
    the silhouette is evaluated on a deterministic uniform subsample.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise DegenerateInputError("empty k range")
    if ks[0] < 2 or ks[-1] > len(points) - 1:
        raise DegenerateInputError("k range must lie within [2, n_points - 1]")
    sample = None
    if len(points) > sample_cap:
        sample = np.random.default_rng(seed).choice(
            len(points), size=sample_cap, replace=False
        )
        sample.sort()
    best_k, best_s = None, -np.inf
    for k in ks:
        try:
            labels, _, _ = kmeans(points, k, seed)
            if sample is not None:
                sub_labels = labels[sample]
                if len(np.unique(sub_labels)) < 2:
                    continue
                s = silhouette_score(points[sample], _compact_labels(sub_labels))
            else:
                s = silhouette_score(points, labels)
        except DegenerateInputError:
            continue  # e.g. fewer distinct points than this k
        if s > best_s:
            best_k, best_s = k, s
    if best_k is None:
        raise DegenerateInputError("no k in range produced a valid silhouette")
    return best_k


def _compact_labels(labels: np.ndarray) -> np.ndarray:
    _, compact = np.unique(labels, return_inverse=True)
    return compact


def compute_bg_pattern(bottom_features) -> np.ndarray:
    """Mean of the unit-normalized background exemplar features."""
    return _unit_rows(bottom_features, "bottom_features").mean(axis=0)


def label_clusters(centroids, bg_pattern, t_bg: float = DEFAULT_T_BG) -> np.ndarray:
    """Foreground flag per centroid: cosine distance to the background
    pattern at least ``t_bg``."""
    centroids = np.asarray(centroids, dtype=np.float64)
    bg_pattern = np.asarray(bg_pattern, dtype=np.float64)
    bg_norm = np.linalg.norm(bg_pattern)
    if bg_norm == 0:
        raise DegenerateInputError("degenerate background pattern (zero vector)")
    norms = np.linalg.norm(centroids, axis=1)
    if (norms == 0).any():
        raise DegenerateInputError("zero-norm centroid")
    cos = centroids @ bg_pattern / (norms * bg_norm)
    is_fg = (1.0 - cos) >= t_bg
    if not is_fg.any():
        raise PipelineError(
            "every cluster fell within t_bg of the background pattern; "
            "lower t_bg or inspect the bottom-proposal selection"
        )
    return is_fg


def fit(
    top_features,
    bottom_features,
    k_range=DEFAULT_K_RANGE,
    t_bg: float = DEFAULT_T_BG,
    seed: int = 0,
    sample_cap: int = SILHOUETTE_SAMPLE_CAP,
) -> ClusterModel:
    """Build the dataset-level cluster model from pooled proposal features."""
    feats = _unit_rows(top_features, "top_features")
    ks = range(k_range[0], k_range[1] + 1) if isinstance(k_range, tuple) else k_range
    ks = [k for k in ks if k <= len(feats) - 1]
    if not ks:
        raise DegenerateInputError("feature pool too small for the k range")
    k_g = select_k(feats, ks, seed, sample_cap)
    _, centroids, _ = kmeans(feats, k_g, seed)
    bg_pattern = compute_bg_pattern(bottom_features)
    is_fg = label_clusters(centroids, bg_pattern, t_bg)
    class_ids = np.full(k_g, -1, dtype=np.int64)
    class_ids[is_fg] = np.arange(int(is_fg.sum()))
    return ClusterModel(centroids, is_fg, bg_pattern, t_bg, class_ids)


def save_model(model: ClusterModel, json_path, bin_path) -> None:
    """JSON metadata plus a little-endian float64 tensor sidecar."""
    with open(bin_path, "wb") as fh:
        fh.write(struct.pack("<2I", model.n_clusters, model.dim))
        fh.write(np.ascontiguousarray(model.centroids, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.bg_pattern, dtype="<f8").tobytes())
    doc = {
        "n_clusters": model.n_clusters,
        "dim": model.dim,
        "t_bg": model.t_bg,
        "is_foreground": model.is_foreground.astype(int).tolist(),
        "class_ids": model.class_ids.tolist(),
        "centroids_file": str(bin_path),
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(json_path, bin_path=None) -> ClusterModel:
    with open(json_path, encoding="utf-8") as fh:
        doc = json.load(fh)
    path = bin_path if bin_path is not None else doc["centroids_file"]
    with open(path, "rb") as fh:
        k, dim = struct.unpack("<2I", fh.read(8))
        centroids = np.frombuffer(fh.read(k * dim * 8), dtype="<f8").reshape(k, dim)
        bg_pattern = np.frombuffer(fh.read(dim * 8), dtype="<f8")
    if (k, dim) != (doc["n_clusters"], doc["dim"]):
        raise PipelineError("model JSON and tensor sidecar disagree on shape")
    return ClusterModel(
        centroids.copy(),
        np.asarray(doc["is_foreground"], dtype=bool),
        bg_pattern.copy(),
        float(doc["t_bg"]),
        np.asarray(doc["class_ids"], dtype=np.int64),
    )
