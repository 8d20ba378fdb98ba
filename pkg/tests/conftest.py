"""Shared synthetic fixtures: archives, feature spaces, proposal sets."""

import numpy as np
import pytest

from uodkit.feature_store import (
    ImageRecord,
    PatchFeatureMap,
    ProposalSet,
    write_image_record,
    write_manifest,
)

HIST_BINS = 256


def flat_hist(total=400, bin_index=10):
    h = np.zeros(HIST_BINS, dtype=np.uint32)
    h[bin_index] = total
    return h


def spread_hist(rng, total=400):
    h = rng.multinomial(total, np.full(HIST_BINS, 1.0 / HIST_BINS))
    return h.astype(np.uint32)


def make_proposals(image_id, width, height, boxes, feats, hists, ranks=None):
    boxes = np.asarray(boxes, dtype=np.float32).reshape(-1, 4)
    n = len(boxes)
    if ranks is None:
        ranks = np.arange(n, dtype=np.uint32)
    feats = np.asarray(feats, dtype=np.float32)
    return ProposalSet(
        image_id=image_id,
        image_width=width,
        image_height=height,
        boxes=boxes,
        original_rank=np.asarray(ranks, dtype=np.uint32),
        cls_features=feats.reshape(n, -1) if n else feats.reshape(0, feats.shape[-1]),
        gray_histograms=np.asarray(hists, dtype=np.uint32).reshape(n, HIST_BINS),
    )


def make_record(image_id, values, proposals=None, width=None, height=None):
    values = np.asarray(values, dtype=np.float32)
    h, w, dim = values.shape
    width = width if width is not None else w * 16
    height = height if height is not None else h * 16
    if proposals is None:
        proposals = make_proposals(
            image_id,
            width,
            height,
            np.array([[0.0, 0.0, width / 2, height / 2]]),
            np.ones((1, dim), dtype=np.float32),
            flat_hist()[None, :],
        )
    return ImageRecord(PatchFeatureMap(image_id, values), proposals)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def _planted_image(rng, image_id, obj_dir, bg_dir, dim):
    """One synthetic image: patch grid with a rectangular object whose
    tokens follow obj_dir, background tokens follow bg_dir; proposals
    include the object box, overlapping part boxes, and background boxes."""
    h, w = 12, 16
    width, height = w * 16, h * 16
    values = np.tile(bg_dir, (h, w, 1)) + 0.01 * rng.normal(size=(h, w, dim))
    r0, c0, r1, c1 = 3, 4, 8, 10  # object cells, exclusive ends
    values[r0:r1, c0:c1] = obj_dir + 0.01 * rng.normal(size=(r1 - r0, c1 - c0, dim))
    obj_box = [c0 * 16.0, r0 * 16.0, c1 * 16.0, r1 * 16.0]
    part_a = [c0 * 16.0, r0 * 16.0, (c0 + 3) * 16.0, r1 * 16.0]
    part_b = [(c0 + 3) * 16.0, r0 * 16.0, c1 * 16.0, r1 * 16.0]
    bg_boxes = [
        [0.0, 0.0, width / 2.0, 40.0],
        [0.0, height - 40.0, width * 1.0, height * 1.0],
        [width - 60.0, 0.0, width * 1.0, height / 2.0],
    ]
    boxes = [obj_box, part_a, part_b] + bg_boxes
    feats = np.vstack(
        [
            obj_dir + 0.01 * rng.normal(size=dim),
            obj_dir + 0.02 * rng.normal(size=dim),
            obj_dir + 0.02 * rng.normal(size=dim),
        ]
        + [bg_dir + 0.01 * rng.normal(size=dim) for _ in bg_boxes]
    ).astype(np.float32)
    hists = np.vstack(
        [spread_hist(rng), spread_hist(rng), spread_hist(rng)]
        + [flat_hist() for _ in bg_boxes]
    )
    proposals = make_proposals(image_id, width, height, boxes, feats, hists)
    record = ImageRecord(PatchFeatureMap(image_id, values.astype(np.float32)), proposals)
    gt_box = np.array([obj_box], dtype=np.float64)
    gt_mask = np.zeros((height, width), dtype=bool)
    gt_mask[r0 * 16 : r1 * 16, c0 * 16 : c1 * 16] = True
    return record, gt_box, gt_mask


@pytest.fixture
def fixture_archive(tmp_path, rng):
    """Three planted-object images written as a UODF archive directory.

    Returns (archive_dir, records, gt_boxes, gt_masks)."""
    dim = 8
    obj_dirs = [np.eye(dim)[0], np.eye(dim)[1], np.eye(dim)[0]]
    bg_dir = np.eye(dim)[7]  # orthogonal to both object directions
    archive = tmp_path / "archive"
    archive.mkdir()
    entries = []
    records, gt_boxes, gt_masks = {}, {}, {}
    for i, obj_dir in enumerate(obj_dirs):
        image_id = f"img{i}"
        record, gt_box, gt_mask = _planted_image(rng, image_id, obj_dir, bg_dir, dim)
        write_image_record(record, archive / f"{image_id}.uodf")
        entries.append(
            {
                "id": image_id,
                "file": f"{image_id}.uodf",
                "width": record.proposals.image_width,
                "height": record.proposals.image_height,
            }
        )
        records[image_id] = record
        gt_boxes[image_id] = gt_box
        gt_masks[image_id] = [gt_mask]
    write_manifest(entries, archive / "manifest.json")
    return archive, records, gt_boxes, gt_masks
