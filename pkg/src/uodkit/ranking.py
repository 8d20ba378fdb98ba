"""Objectness re-ranking of region proposals.

Each proposal is scored by a weighted sum of three per-image min-max
normalized terms: similarity to overlapping neighbours (object parts
vote for their object), dissimilarity to non-overlapping proposals
(objects stand out from the background majority), and the Shannon
entropy of the proposal's grayscale histogram (textured regions over
flat ones). Top-scoring proposals become semantic object priors; the
lowest-scoring ones serve as background exemplars.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateInputError
from .feature_store import GroundTruth, ProposalSet

DEFAULT_ALPHA = 0.7
DEFAULT_IOU_THRESHOLD = 0.1
DEFAULT_TOP_P = 20
DEFAULT_BOTTOM_Q = 10
DEFAULT_MAX_CONSIDERED = 500


@dataclass
class RankingParams:
    alpha: float = DEFAULT_ALPHA
    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    top_p: int = DEFAULT_TOP_P
    bottom_q: int = DEFAULT_BOTTOM_Q
    max_considered: int = DEFAULT_MAX_CONSIDERED
    aggregate: str = "sum"  # "sum" per the score definition; "mean" optional

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 < self.iou_threshold < 1.0:
            raise ValueError("iou_threshold must lie in (0, 1)")
        if self.top_p < 1:
            raise ValueError("top_p must be >= 1")
        if self.aggregate not in ("sum", "mean"):
            raise ValueError("aggregate must be 'sum' or 'mean'")


@dataclass
class RankedProposals:
    """Scores and descending-score order over the considered proposals.

    ``indices`` are the original proposal indices kept after the
    max_considered cap (the lowest generator ranks, listed in index
    order); ``scores`` and ``components`` align with ``indices``;
    ``order`` lists original indices by descending score, ties broken by
    generator rank.
    """

    indices: np.ndarray
    scores: np.ndarray
    components: np.ndarray  # (n, 3) normalized (sim_local, dissim_global, entropy)
    order: np.ndarray


def cosine_similarity(f_i, f_j) -> float:
    f_i = np.asarray(f_i, dtype=np.float64)
    f_j = np.asarray(f_j, dtype=np.float64)
    ni, nj = np.linalg.norm(f_i), np.linalg.norm(f_j)
    if ni == 0 or nj == 0:
        raise DegenerateInputError("cosine similarity of a zero vector")
    return float(f_i @ f_j / (ni * nj))


def iou(a, b) -> float:
    """Intersection over union of two (x1, y1, x2, y2) boxes."""
    ix1, iy1 = max(a[0], b[0]), max(a[1], b[1])
    ix2, iy2 = min(a[2], b[2]), min(a[3], b[3])
    inter = max(ix2 - ix1, 0.0) * max(iy2 - iy1, 0.0)
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return float(inter / union) if union > 0 else 0.0


def entropy(hist) -> float:
    """Shannon entropy in bits of a count histogram."""
    hist = np.asarray(hist, dtype=np.float64)
    total = hist.sum()
    if total <= 0:
        raise DegenerateInputError("entropy of an empty histogram")
    p = hist[hist > 0] / total
    return float(-(p * np.log2(p)).sum())


def _minmax(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.full_like(values, 0.5)  # constant term: neutral
    return (values - lo) / (hi - lo)


def objectness_scores(props: ProposalSet, params: RankingParams) -> RankedProposals:
    """Score every considered proposal and return the descending ranking."""
    keep = np.argsort(props.original_rank, kind="stable")[: params.max_considered]
    keep = np.sort(keep)
    m = len(keep)
    if m < 2:
        raise DegenerateInputError(
            "objectness needs at least 2 proposals (normalization is degenerate)"
        )
    feats = np.asarray(props.cls_features[keep], dtype=np.float64)
    norms = np.linalg.norm(feats, axis=1)
    if (norms == 0).any():
        raise DegenerateInputError("zero-norm CLS feature")
    unit = feats / norms[:, None]
    sim = unit @ unit.T
    np.clip(sim, -1.0, 1.0, out=sim)
    overlap = kernels.pairwise_iou(np.asarray(props.boxes[keep], dtype=np.float64))

    neighbour = overlap >= params.iou_threshold
    np.fill_diagonal(neighbour, False)
    distant = ~neighbour
    np.fill_diagonal(distant, False)

    sim_local = np.where(neighbour, sim, 0.0).sum(axis=1)
    dissim_global = np.where(distant, 1.0 - sim, 0.0).sum(axis=1)
    if params.aggregate == "mean":
        n_nb = neighbour.sum(axis=1)
        n_far = distant.sum(axis=1)
        sim_local = np.divide(sim_local, n_nb, out=np.zeros(m), where=n_nb > 0)
        dissim_global = np.divide(dissim_global, n_far, out=np.zeros(m), where=n_far > 0)
    ent = np.array([entropy(props.gray_histograms[i]) for i in keep])

    components = np.stack(
        [_minmax(sim_local), _minmax(dissim_global), _minmax(ent)], axis=1
    )
    scores = (params.alpha / 2.0) * (components[:, 0] + components[:, 1]) + (
        1.0 - params.alpha
    ) * components[:, 2]
    ranks = np.asarray(props.original_rank)[keep]
    order = keep[np.lexsort((ranks, -scores))]
    return RankedProposals(indices=keep, scores=scores, components=components, order=order)


def select_priors(ranked: RankedProposals, params: RankingParams):
    """Split the ranking into top object priors and bottom background
    exemplars; the two sets never overlap."""
    m = len(ranked.order)
    n_top = min(params.top_p, m)
    n_bottom = min(params.bottom_q, m - n_top)
    top = ranked.order[:n_top]
    bottom = ranked.order[m - n_bottom :] if n_bottom > 0 else ranked.order[:0]
    return top, bottom


def detection_rate(ranked_boxes, gts, k: int, iou_thresh: float = 0.5) -> float:
    """Fraction of ground-truth boxes covered by a top-k proposal.

    ``ranked_boxes`` maps image id to an array of boxes in descending-score
    order; ``gts`` maps image id to GroundTruth. A ground-truth box counts
    as covered when some top-k proposal reaches ``iou_thresh`` IoU with it.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    total = 0
    covered = 0
    for image_id, gt in gts.items():
        gt_boxes = np.asarray(gt.boxes, dtype=np.float64)
        total += len(gt_boxes)
        boxes = np.asarray(ranked_boxes.get(image_id, ()), dtype=np.float64)[:k]
        for g in gt_boxes:
            if any(iou(b, g) >= iou_thresh for b in boxes):
                covered += 1
    if total == 0:
        raise DegenerateInputError("no ground-truth boxes")
    return covered / total
