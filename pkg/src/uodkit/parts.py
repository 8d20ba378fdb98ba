"""Intra-image part discovery: adaptive k-means over the eigen feature
space, then spatial split of clusters into connected part segments.

The cluster count starts at 2 and grows while the non-background area
(everything outside the largest cluster) keeps expanding by more than
the configured ratio; the clustering from the last accepted count is
returned. The background id is recomputed after every re-clustering as
the largest-area cluster.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateInputError
from .spectral import PixelFeatureSpace

KMEANS_TOL = 1e-6
KMEANS_MAX_ITER = 300
DEFAULT_THRESH = 1.02
DEFAULT_K_MAX = 10
DEFAULT_MIN_PART_AREA = 4


@dataclass
class SegmentMap:
    """Per-cell cluster labels with the background cluster identified."""

    labels: np.ndarray  # int64 (height, width)
    k: int
    background_id: int

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass
class PartSegment:
    """One 4-connected piece of a non-background cluster."""

    mask: np.ndarray  # bool (height, width)
    cluster_id: int
    area: int
    bbox: tuple  # (x1, y1, x2, y2) in grid coordinates, exclusive right/bottom


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            # All remaining points coincide with chosen centroids; the
            # distinct-point precondition makes this unreachable, but keep
            # the guard so a logic error fails loudly.
            raise DegenerateInputError("k-means++ ran out of distinct points")
        centroids[j] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def kmeans(points, k: int, seed: int):
    """Seeded k-means++ with Lloyd iterations.

    Stops when every centroid moves less than 1e-6 (L2) or after 300
    iterations. Empty clusters are re-seeded from the point farthest from
    its assigned centroid. Returns (labels, centroids, inertia).
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k:
        raise DegenerateInputError(f"{n} points for k={k}")
    if np.unique(points, axis=0).shape[0] < k:
        raise DegenerateInputError(f"fewer than k={k} distinct points")
    rng = np.random.default_rng(seed)
    centroids = _plusplus_init(points, k, rng)
    labels, dist2 = kernels.nearest_centroid(points, centroids)
    for _ in range(KMEANS_MAX_ITER):
        labels, dist2 = _fix_empty(points, centroids, labels, dist2, k)
        new_centroids = np.empty_like(centroids)
        for j in range(k):
            new_centroids[j] = points[labels == j].mean(axis=0)
        shift = np.linalg.norm(new_centroids - centroids, axis=1).max()
        centroids = new_centroids
        labels, dist2 = kernels.nearest_centroid(points, centroids)
        if shift < KMEANS_TOL:
            break
    labels, dist2 = _fix_empty(points, centroids, labels, dist2, k)
    return labels, centroids, float(dist2.sum())


def _fix_empty(points, centroids, labels, dist2, k):
    counts = np.bincount(labels, minlength=k)
    while (counts == 0).any():
        empty = int(np.flatnonzero(counts == 0)[0])
        centroids[empty] = points[int(np.argmax(dist2))]
        labels, dist2 = kernels.nearest_centroid(points, centroids)
        counts = np.bincount(labels, minlength=k)
    return labels, dist2


def _background_id(labels: np.ndarray, k: int) -> int:
    areas = np.bincount(labels.ravel(), minlength=k)
    return int(np.argmax(areas))  # ties break to the lowest id


def discover_parts(
    space: PixelFeatureSpace,
    thresh: float = DEFAULT_THRESH,
    k_max: int = DEFAULT_K_MAX,
    seed: int = 0,
) -> SegmentMap:
    """Grow the cluster count until the non-background area stops expanding.

    Starting from k=2, each increment is accepted while the ratio of new to
    previous non-background area exceeds ``thresh`` and k < k_max; the map
    for the last accepted k is returned.
    """
    if thresh <= 1.0:
        raise ValueError("thresh must be > 1")
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    points = space.points()
    n_cells = space.n_cells
    labels, _, _ = kmeans(points, 2, seed)
    k = 2
    b_id = _background_id(labels, k)
    obj_area = n_cells - int(np.bincount(labels, minlength=k)[b_id])
    while k < k_max:
        try:
            cand_labels, _, _ = kmeans(points, k + 1, seed)
        except DegenerateInputError:
            break  # not enough distinct cells to split further
        cand_b = _background_id(cand_labels, k + 1)
        new_obj_area = n_cells - int(np.bincount(cand_labels, minlength=k + 1)[cand_b])
        # obj_area >= 1 because every k-means cluster is nonempty
        if new_obj_area / obj_area > thresh:
            labels, k, b_id, obj_area = cand_labels, k + 1, cand_b, new_obj_area
        else:
            break
    return SegmentMap(labels.reshape(space.height, space.width), k, b_id)


def extract_segments(
    segmap: SegmentMap, min_part_area: int = DEFAULT_MIN_PART_AREA
) -> list:
    """Split each non-background cluster into 4-connected components.

    Components smaller than ``min_part_area`` cells are dropped. Segments
    are returned ordered by (cluster id, top-left corner) and are pairwise
    disjoint subsets of the non-background cells.
    """
    segments = []
    for cid in range(segmap.k):
        if cid == segmap.background_id:
            continue
        comp, ncomp = kernels.label_components_4(segmap.labels == cid)
        for ci in range(1, ncomp + 1):
            mask = comp == ci
            area = int(mask.sum())
            if area < min_part_area:
                continue
            rows = np.flatnonzero(mask.any(axis=1))
            cols = np.flatnonzero(mask.any(axis=0))
            bbox = (int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)
            segments.append(PartSegment(mask, cid, area, bbox))
    segments.sort(key=lambda s: (s.cluster_id, s.bbox[1], s.bbox[0]))
    return segments
