"""Pure numpy/scipy implementations of the hot kernels.

Used when the compiled extension is unavailable or disabled. Signatures
and semantics match uodkit.kernels._compiled; small floating-point
differences between the two backends are possible (different summation
orders), so callers must not rely on bit-equality across backends.
"""

import numpy as np
from scipy import ndimage
from scipy.spatial.distance import cdist

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.uint8)

_CHUNK = 1024


def nearest_centroid(points, centroids):
    """Assign each point to its nearest centroid (squared L2, ties to the
    lowest centroid index).

    Returns (labels int64[n], dist2 float64[n]).
    """
    points = np.asarray(points, dtype=np.float64)
    centroids = np.asarray(centroids, dtype=np.float64)
    n = points.shape[0]
    d2 = cdist(points, centroids, "sqeuclidean")
    labels = np.argmin(d2, axis=1)
    dist2 = d2[np.arange(n), labels]
    return labels.astype(np.int64), dist2


def cluster_distance_sums(points, labels, k):
    """Per-point sums of Euclidean distances to every cluster.

    sums[i, c] = sum over j with labels[j] == c of ||points[i] - points[j]||.
    The i == j term contributes 0 and is included.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = points.shape[0]
    onehot = np.zeros((n, k), dtype=np.float64)
    onehot[np.arange(n), labels] = 1.0
    sums = np.empty((n, k), dtype=np.float64)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        sums[start:stop] = cdist(points[start:stop], points) @ onehot
    return sums


def label_components_4(mask):
    """4-connected component labeling of the nonzero cells of a 2-D mask.

    Returns (comp int32[h,w], ncomp) with component ids 1..ncomp and 0 on
    background. Id ordering follows the row-major first visit.
    """
    mask = np.asarray(mask)
    comp, ncomp = ndimage.label(mask != 0, structure=_FOUR_CONN)
    return comp.astype(np.int32), int(ncomp)


def pairwise_iou(boxes):
    """All-pairs IoU of (x1, y1, x2, y2) boxes. Returns float64[m,m]."""
    boxes = np.asarray(boxes, dtype=np.float64)
    x1 = np.maximum(boxes[:, None, 0], boxes[None, :, 0])
    y1 = np.maximum(boxes[:, None, 1], boxes[None, :, 1])
    x2 = np.minimum(boxes[:, None, 2], boxes[None, :, 2])
    y2 = np.minimum(boxes[:, None, 3], boxes[None, :, 3])
    inter = np.clip(x2 - x1, 0.0, None) * np.clip(y2 - y1, 0.0, None)
    area = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
    union = area[:, None] + area[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out
