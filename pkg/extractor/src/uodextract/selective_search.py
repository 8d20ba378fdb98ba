"""Single-strategy selective search: Felzenszwalb base segmentation in
HSV followed by hierarchical grouping under the combined color, texture,
size, and fill similarity. Regions merged earlier receive earlier ranks;
the never-merged base regions follow.
"""

import numpy as np
from skimage.color import rgb2hsv
from skimage.feature import local_binary_pattern
from skimage.segmentation import felzenszwalb

COLOR_BINS = 25
TEXTURE_BINS = 10
LBP_POINTS = 8
LBP_RADIUS = 1.0

BASE_SCALE = 200
BASE_SIGMA = 0.8
BASE_MIN_SIZE = 50
MIN_BOX_SIDE = 8


def _color_histogram(hsv_pixels):
    hist = np.concatenate(
        [
            np.histogram(hsv_pixels[:, c], bins=COLOR_BINS, range=(0.0, 1.0))[0]
            for c in range(3)
        ]
    ).astype(np.float64)
    total = hist.sum()
    return hist / total if total else hist


def _texture_histogram(lbp_pixels):
    hist = np.concatenate(
        [
            np.histogram(
                lbp_pixels[:, c], bins=TEXTURE_BINS, range=(0, LBP_POINTS + 2)
            )[0]
            for c in range(3)
        ]
    ).astype(np.float64)
    total = hist.sum()
    return hist / total if total else hist


class _Region:
    __slots__ = ("size", "color", "texture", "bbox")

    def __init__(self, size, color, texture, bbox):
        self.size = size
        self.color = color
        self.texture = texture
        self.bbox = bbox  # (x1, y1, x2, y2)


def _merge_bbox(a, b):
    return (min(a[0], b[0]), min(a[1], b[1]), max(a[2], b[2]), max(a[3], b[3]))


def _similarity(a: _Region, b: _Region, image_size: int) -> float:
    s_color = np.minimum(a.color, b.color).sum()
    s_texture = np.minimum(a.texture, b.texture).sum()
    s_size = 1.0 - (a.size + b.size) / image_size
    bb = _merge_bbox(a.bbox, b.bbox)
    bb_area = (bb[2] - bb[0]) * (bb[3] - bb[1])
    s_fill = 1.0 - (bb_area - a.size - b.size) / image_size
    return s_color + s_texture + s_size + s_fill


def _initial_regions(rgb01: np.ndarray):
    labels = felzenszwalb(
        rgb01, scale=BASE_SCALE, sigma=BASE_SIGMA, min_size=BASE_MIN_SIZE
    )
    hsv = rgb2hsv(rgb01)
    hsv_u8 = (hsv * 255).astype(np.uint8)  # LBP wants integer images
    lbp = np.stack(
        [
            local_binary_pattern(hsv_u8[:, :, c], LBP_POINTS, LBP_RADIUS, method="uniform")
            for c in range(3)
        ],
        axis=-1,
    )
    regions = {}
    for label in np.unique(labels):
        mask = labels == label
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        regions[int(label)] = _Region(
            size=int(mask.sum()),
            color=_color_histogram(hsv[mask]),
            texture=_texture_histogram(lbp[mask]),
            bbox=(int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1),
        )
    # adjacency from 4-connected label transitions
    pairs = set()
    horizontal = labels[:, :-1] != labels[:, 1:]
    for a, b in zip(labels[:, :-1][horizontal], labels[:, 1:][horizontal]):
        pairs.add((min(int(a), int(b)), max(int(a), int(b))))
    vertical = labels[:-1, :] != labels[1:, :]
    for a, b in zip(labels[:-1, :][vertical], labels[1:, :][vertical]):
        pairs.add((min(int(a), int(b)), max(int(a), int(b))))
    return regions, pairs


def propose(rgb01: np.ndarray):
    """Hierarchical grouping proposals for an RGB float image in [0, 1].

    Returns (boxes float64 (n, 4), ranks uint32 (n,)): merge-ordered
    regions first, then the base regions, deduplicated by box.
    """
    height, width = rgb01.shape[:2]
    image_size = height * width
    regions, pairs = _initial_regions(rgb01)
    similarities = {
        pair: _similarity(regions[pair[0]], regions[pair[1]], image_size)
        for pair in pairs
    }
    merged_order = []
    next_label = max(regions) + 1
    while similarities:
        (a, b), _ = max(similarities.items(), key=lambda kv: (kv[1], -kv[0][0], -kv[0][1]))
        ra, rb = regions[a], regions[b]
        size = ra.size + rb.size
        merged = _Region(
            size=size,
            color=(ra.color * ra.size + rb.color * rb.size) / size,
            texture=(ra.texture * ra.size + rb.texture * rb.size) / size,
            bbox=_merge_bbox(ra.bbox, rb.bbox),
        )
        label = next_label
        next_label += 1
        regions[label] = merged
        merged_order.append(label)
        neighbours = set()
        for x, y in list(similarities):
            if a in (x, y) or b in (x, y):
                del similarities[(x, y)]
                other = y if x in (a, b) else x
                if other not in (a, b):
                    neighbours.add(other)
        for other in neighbours:
            key = (min(label, other), max(label, other))
            similarities[key] = _similarity(merged, regions[other], image_size)

    ordered = merged_order + sorted(k for k in regions if k not in set(merged_order))
    boxes, ranks, seen = [], [], set()
    rank = 0
    for label in ordered:
        box = regions[label].bbox
        if box in seen:
            continue
        seen.add(box)
        if box[2] - box[0] < MIN_BOX_SIDE or box[3] - box[1] < MIN_BOX_SIDE:
            continue
        boxes.append(box)
        ranks.append(rank)
        rank += 1
    return np.asarray(boxes, dtype=np.float64).reshape(-1, 4), np.asarray(
        ranks, dtype=np.uint32
    )
