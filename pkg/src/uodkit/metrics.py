"""Class-agnostic detection and segmentation metrics.

ap50 is the classical all-point interpolated average precision at IoU
0.5. odap traces one precision-recall point per number of retained
top-score detections per image (1 up to the largest ground-truth count
in any image) and integrates the precision envelope over recall. miou
averages, over every ground-truth mask plus a per-image background
mask, the IoU with the best-overlapping predicted mask.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateInputError
from .ranking import iou

ODAP_THRESHOLDS = tuple(np.arange(50, 100, 5) / 100.0)  # 0.50, 0.55, ..., 0.95


@dataclass
class Detection:
    image_id: str
    bbox: tuple  # (x1, y1, x2, y2)
    score: float
    mask: Optional[np.ndarray] = None


@dataclass
class PRPoint:
    precision: float
    recall: float
    retained_n: int


def _sorted_by_score(dets):
    # Stable: equal scores keep input order so results are deterministic.
    return sorted(dets, key=lambda d: -d.score)


def match_greedy(dets, gt_boxes, iou_thresh: float):
    """Greedy matching of one image's detections (already sorted by
    descending score) against ground-truth boxes.

    Each detection takes the unmatched ground truth of highest IoU if that
    IoU reaches ``iou_thresh``; each ground truth matches at most once.
    Returns a boolean array: True where the detection is a true positive.
    """
    if not 0.0 < iou_thresh < 1.0:
        raise ValueError("iou_thresh must lie in (0, 1)")
    taken = np.zeros(len(gt_boxes), dtype=bool)
    tp = np.zeros(len(dets), dtype=bool)
    for i, det in enumerate(dets):
        best_j, best_iou = -1, 0.0
        for j, g in enumerate(gt_boxes):
            if taken[j]:
                continue
            u = iou(det.bbox, g)
            if u > best_iou:
                best_j, best_iou = j, u
        if best_j >= 0 and best_iou >= iou_thresh:
            taken[best_j] = True
            tp[i] = True
    return tp


def _dataset_tp_flags(dets, gts, iou_thresh):
    """Score-sorted TP/FP flags pooled over the dataset."""
    by_image = {}
    for det in dets:
        by_image.setdefault(det.image_id, []).append(det)
    flags = []  # (score, order, tp)
    order = 0
    for image_id, image_dets in by_image.items():
        image_dets = _sorted_by_score(image_dets)
        gt_boxes = gts[image_id].boxes if image_id in gts else []
        tp = match_greedy(image_dets, gt_boxes, iou_thresh)
        for det, flag in zip(image_dets, tp):
            flags.append((det.score, order, bool(flag)))
            order += 1
    flags.sort(key=lambda t: (-t[0], t[1]))
    return np.array([f[2] for f in flags], dtype=bool)


def _envelope_area(recalls: np.ndarray, precisions: np.ndarray) -> float:
    """Area under the precision envelope, recall extended from 0."""
    order = np.argsort(recalls, kind="stable")
    r = recalls[order]
    p = precisions[order]
    # envelope: running max of precision from the right
    env = np.maximum.accumulate(p[::-1])[::-1]
    area = 0.0
    prev_r = 0.0
    for i in range(len(r)):
        if r[i] > prev_r:
            area += (r[i] - prev_r) * env[i]
            prev_r = r[i]
    return area


def _total_gt(gts) -> int:
    return sum(len(gt.boxes) for gt in gts.values())


def ap50(dets, gts, iou_thresh: float = 0.5) -> float:
    """All-point interpolated average precision at the given IoU."""
    n_gt = _total_gt(gts)
    if n_gt == 0:
        raise DegenerateInputError("no ground-truth boxes")
    tp = _dataset_tp_flags(dets, gts, iou_thresh)
    if len(tp) == 0:
        return 0.0
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(~tp)
    recalls = cum_tp / n_gt
    precisions = cum_tp / (cum_tp + cum_fp)
    return float(_envelope_area(recalls, precisions))


def _retained_top_n(dets, n: int):
    by_image = {}
    for det in dets:
        by_image.setdefault(det.image_id, []).append(det)
    out = []
    for image_dets in by_image.values():
        out.extend(_sorted_by_score(image_dets)[:n])
    return out


def pr_points(dets, gts, iou_thresh: float) -> list:
    """One dataset precision-recall point per retained-count n."""
    n_gt = _total_gt(gts)
    if n_gt == 0:
        raise DegenerateInputError("no ground-truth boxes")
    n_max = max(len(gt.boxes) for gt in gts.values())
    points = []
    for n in range(1, n_max + 1):
        retained = _retained_top_n(dets, n)
        tp = _dataset_tp_flags(retained, gts, iou_thresh)
        n_det = len(retained)
        n_tp = int(tp.sum())
        precision = n_tp / n_det if n_det else 0.0
        recall = n_tp / n_gt
        points.append(PRPoint(precision, recall, n))
    return points


def odap(dets, gts, iou_thresholds=ODAP_THRESHOLDS):
    """Area under the retained-n precision-recall curve per threshold.

    Returns (per_threshold: dict, mean: float).
    """
    per = {}
    for t in iou_thresholds:
        pts = pr_points(dets, gts, t)
        recalls = np.array([p.recall for p in pts])
        precisions = np.array([p.precision for p in pts])
        per[t] = float(_envelope_area(recalls, precisions))
    return per, float(np.mean(list(per.values())))


def _mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = np.logical_and(a, b).sum()
    union = np.logical_or(a, b).sum()
    return float(inter / union) if union > 0 else 0.0


def miou(pred_masks, gt_masks, image_shapes) -> float:
    """Mean best-overlap IoU over all ground-truth masks plus background.

    All three arguments map image id to, respectively, a list of predicted
    instance masks, a list of ground-truth object masks, and the (H, W)
    image shape. Per image, the ground-truth background (complement of all
    object masks) is matched against the predicted background (complement
    of all instance masks) or any instance mask, whichever overlaps most;
    ground-truth objects are matched against instance masks only.
    """
    scores = []
    for image_id, shape in image_shapes.items():
        preds = [np.asarray(m, dtype=bool) for m in pred_masks.get(image_id, [])]
        gt_objs = [np.asarray(m, dtype=bool) for m in gt_masks.get(image_id, [])]
        for m in preds + gt_objs:
            if m.shape != tuple(shape):
                raise DegenerateInputError(
                    f"mask resolution {m.shape} differs from image {image_id} {tuple(shape)}"
                )
        pred_bg = np.ones(shape, dtype=bool)
        for m in preds:
            pred_bg &= ~m
        gt_bg = np.ones(shape, dtype=bool)
        for m in gt_objs:
            gt_bg &= ~m
        for g in gt_objs:
            best = max((_mask_iou(g, p) for p in preds), default=0.0)
            scores.append(best)
        bg_candidates = preds + [pred_bg]
        scores.append(max(_mask_iou(gt_bg, c) for c in bg_candidates))
    if not scores:
        raise DegenerateInputError("no images to evaluate")
    return float(np.mean(scores))
