# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot kernels (see _pure.py for the
reference semantics)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def nearest_centroid(points, centroids):
    cdef double[:, ::1] x = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(centroids, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], k = c.shape[0]
    labels_arr = np.empty(n, dtype=np.int64)
    dist2_arr = np.empty(n, dtype=np.float64)
    cdef long long[::1] labels = labels_arr
    cdef double[::1] dist2 = dist2_arr
    cdef Py_ssize_t i, j, m, best
    cdef double acc, diff, best_d
    for i in range(n):
        best = 0
        best_d = 0.0
        for j in range(k):
            acc = 0.0
            for m in range(d):
                diff = x[i, m] - c[j, m]
                acc += diff * diff
            if j == 0 or acc < best_d:
                best_d = acc
                best = j
        labels[i] = best
        dist2[i] = best_d
    return labels_arr, dist2_arr


def cluster_distance_sums(points, labels, Py_ssize_t k):
    cdef double[:, ::1] x = np.ascontiguousarray(points, dtype=np.float64)
    cdef long long[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    sums_arr = np.zeros((n, k), dtype=np.float64)
    cdef double[:, ::1] sums = sums_arr
    cdef Py_ssize_t i, j, m
    cdef double acc, diff, dist
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for m in range(d):
                diff = x[i, m] - x[j, m]
                acc += diff * diff
            dist = sqrt(acc)
            sums[i, lab[j]] += dist
            sums[j, lab[i]] += dist
    return sums_arr


def label_components_4(mask):
    """Two-pass union-find labeling, 4-connectivity."""
    mask_arr = np.ascontiguousarray(np.asarray(mask) != 0, dtype=np.uint8)
    cdef unsigned char[:, ::1] m = mask_arr
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1]
    comp_arr = np.zeros((h, w), dtype=np.int32)
    cdef int[:, ::1] comp = comp_arr
    parent_arr = np.zeros(h * w + 1, dtype=np.int32)
    cdef int[::1] parent = parent_arr
    cdef Py_ssize_t r, c
    cdef int nxt = 0, left, up, a, b, root

    # first pass: provisional labels + unions with left/up neighbours
    for r in range(h):
        for c in range(w):
            if m[r, c] == 0:
                continue
            left = comp[r, c - 1] if c > 0 else 0
            up = comp[r - 1, c] if r > 0 else 0
            if left == 0 and up == 0:
                nxt += 1
                parent[nxt] = nxt
                comp[r, c] = nxt
            elif left != 0 and up == 0:
                comp[r, c] = left
            elif left == 0:
                comp[r, c] = up
            else:
                comp[r, c] = left
                # union(left, up)
                a = left
                while parent[a] != a:
                    a = parent[a]
                b = up
                while parent[b] != b:
                    b = parent[b]
                if a < b:
                    parent[b] = a
                elif b < a:
                    parent[a] = b

    # flatten and renumber roots in first-visit order
    remap_arr = np.zeros(nxt + 1, dtype=np.int32)
    cdef int[::1] remap = remap_arr
    cdef int ncomp = 0
    for r in range(h):
        for c in range(w):
            a = comp[r, c]
            if a == 0:
                continue
            root = a
            while parent[root] != root:
                root = parent[root]
            if remap[root] == 0:
                ncomp += 1
                remap[root] = ncomp
            comp[r, c] = remap[root]
    return comp_arr, ncomp


def pairwise_iou(boxes):
    cdef double[:, ::1] b = np.ascontiguousarray(boxes, dtype=np.float64)
    cdef Py_ssize_t n = b.shape[0]
    out_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double ix1, iy1, ix2, iy2, inter, ai, aj, union, v
    for i in range(n):
        ai = (b[i, 2] - b[i, 0]) * (b[i, 3] - b[i, 1])
        out[i, i] = 1.0 if ai > 0 else 0.0
        for j in range(i + 1, n):
            ix1 = max(b[i, 0], b[j, 0])
            iy1 = max(b[i, 1], b[j, 1])
            ix2 = min(b[i, 2], b[j, 2])
            iy2 = min(b[i, 3], b[j, 3])
            inter = max(ix2 - ix1, 0.0) * max(iy2 - iy1, 0.0)
            aj = (b[j, 2] - b[j, 0]) * (b[j, 3] - b[j, 1])
            union = ai + aj - inter
            v = inter / union if union > 0 else 0.0
            out[i, j] = v
            out[j, i] = v
    return out_arr
