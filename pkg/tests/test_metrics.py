"""Detection metric tests with brute-force oracle comparisons."""

import numpy as np
import pytest

import oracles
from uodkit.errors import DegenerateInputError
from uodkit.feature_store import GroundTruth
from uodkit.metrics import Detection, ap50, match_greedy, miou, odap, pr_points


def det(image_id, box, score):
    return Detection(image_id, tuple(float(v) for v in box), float(score))


def gt_map(boxes_by_image):
    return {
        image_id: GroundTruth(image_id, np.asarray(boxes, dtype=np.float64).reshape(-1, 4))
        for image_id, boxes in boxes_by_image.items()
    }


def random_micro_dataset(rng, n_images=None):
    n_images = n_images or int(rng.integers(1, 6))
    dets, det_dict, gts = [], {}, {}
    for i in range(n_images):
        image_id = f"im{i}"
        n_gt = int(rng.integers(1, 7))
        n_det = int(rng.integers(0, 7))
        gt_boxes = []
        for _ in range(n_gt):
            x1, y1 = rng.uniform(0, 60, 2)
            gt_boxes.append([x1, y1, x1 + rng.uniform(5, 30), y1 + rng.uniform(5, 30)])
        gts[image_id] = gt_boxes
        det_dict[image_id] = []
        for _ in range(n_det):
            if rng.random() < 0.6 and gt_boxes:
                gx1, gy1, gx2, gy2 = gt_boxes[int(rng.integers(len(gt_boxes)))]
                dx, dy = rng.uniform(-4, 4, 2)
                box = [gx1 + dx, gy1 + dy, gx2 + dx, gy2 + dy]
            else:
                x1, y1 = rng.uniform(0, 60, 2)
                box = [x1, y1, x1 + rng.uniform(5, 30), y1 + rng.uniform(5, 30)]
            score = float(rng.random())
            det_dict[image_id].append((tuple(box), score))
            dets.append(det(image_id, box, score))
    return dets, det_dict, gt_map(gts), gts


class TestMatchGreedy:
    def test_single_perfect_match(self):
        dets = [det("a", (0, 0, 10, 10), 0.9)]
        tp = match_greedy(dets, np.array([[0.0, 0.0, 10.0, 10.0]]), 0.5)
        np.testing.assert_array_equal(tp, [True])

    def test_double_detection_one_tp(self):
        dets = [det("a", (0, 0, 10, 10), 0.9), det("a", (1, 1, 11, 11), 0.8)]
        tp = match_greedy(dets, np.array([[0.0, 0.0, 10.0, 10.0]]), 0.5)
        np.testing.assert_array_equal(tp, [True, False])

    def test_random_cases_match_oracle(self, rng):
        for _ in range(25):
            n_det, n_gt = int(rng.integers(1, 5)), int(rng.integers(1, 4))
            det_boxes = []
            for _ in range(n_det):
                x1, y1 = rng.uniform(0, 30, 2)
                det_boxes.append((x1, y1, x1 + rng.uniform(5, 20), y1 + rng.uniform(5, 20)))
            gt_boxes = []
            for _ in range(n_gt):
                x1, y1 = rng.uniform(0, 30, 2)
                gt_boxes.append((x1, y1, x1 + rng.uniform(5, 20), y1 + rng.uniform(5, 20)))
            dets = [det("a", b, 1.0 - 0.1 * i) for i, b in enumerate(det_boxes)]
            got = match_greedy(dets, np.array(gt_boxes), 0.3)
            expected = oracles.greedy_match_brute(det_boxes, gt_boxes, 0.3)
            np.testing.assert_array_equal(got, expected)


class TestAp50:
    def test_perfect_detections(self):
        gts = gt_map({"a": [[0, 0, 10, 10]], "b": [[5, 5, 15, 15]]})
        dets = [det("a", (0, 0, 10, 10), 0.9), det("b", (5, 5, 15, 15), 0.8)]
        assert ap50(dets, gts) == 1.0

    def test_zero_overlap(self):
        gts = gt_map({"a": [[0, 0, 10, 10]]})
        dets = [det("a", (50, 50, 60, 60), 0.9)]
        assert ap50(dets, gts) == 0.0

    def test_hand_computed_pr_table(self):
        # TP(1.0, r=1/2) -> FP(p=1/2) -> TP(p=2/3, r=1): AP = 1/2 + 1/2 * 2/3
        gts = gt_map({"a": [[0, 0, 10, 10], [20, 20, 30, 30]]})
        dets = [
            det("a", (0, 0, 10, 10), 0.9),
            det("a", (50, 50, 60, 60), 0.8),
            det("a", (20, 20, 30, 30), 0.7),
        ]
        assert ap50(dets, gts) == pytest.approx(0.5 + 0.5 * 2 / 3, abs=1e-12)

    def test_empty_gt_rejected(self):
        with pytest.raises(DegenerateInputError):
            ap50([], {})

    def test_matches_brute_oracle(self, rng):
        for _ in range(20):
            dets, det_dict, gts, gt_dict = random_micro_dataset(rng)
            expected = oracles.ap_brute(det_dict, gt_dict, 0.5)
            assert ap50(dets, gts) == pytest.approx(expected, abs=1e-9)

    def test_added_tp_never_lowers_final_recall(self, rng):
        # appending a detection that covers a previously missed ground truth
        # can only extend the recall reached by the PR curve
        for _ in range(10):
            dets, _, gts, gt_dict = random_micro_dataset(rng, n_images=2)
            image_id, gt_boxes = next(iter(gt_dict.items()))
            base = ap50(dets, gts)
            extra = det(image_id, gt_boxes[0], 1e-6)  # lowest score, perfect box
            boosted = ap50(dets + [extra], gts)
            n_gt = sum(len(g.boxes) for g in gts.values())

            def final_recall(det_list):
                flags = []
                by_img = {}
                for d in sorted(det_list, key=lambda d: -d.score):
                    by_img.setdefault(d.image_id, []).append(d)
                for img, img_dets in by_img.items():
                    flags.extend(match_greedy(img_dets, gts[img].boxes, 0.5))
                return sum(flags) / n_gt

            assert final_recall(dets + [extra]) >= final_recall(dets) - 1e-12
            # processed last, the extra detection cannot disturb earlier
            # matches, so the curve only gains area
            assert boosted >= base - 1e-12


class TestOdap:
    def test_perfect_detections(self):
        gts = gt_map({"a": [[0, 0, 10, 10]], "b": [[5, 5, 15, 15], [30, 30, 40, 40]]})
        dets = [
            det("a", (0, 0, 10, 10), 0.9),
            det("b", (5, 5, 15, 15), 0.9),
            det("b", (30, 30, 40, 40), 0.8),
        ]
        per, mean = odap(dets, gts)
        assert per[0.5] == 1.0
        assert mean == 1.0

    def test_single_point_curve(self):
        # n_max = 1: odAP equals precision x recall of the single point
        gts = gt_map({"a": [[0, 0, 10, 10]], "b": [[0, 0, 10, 10]]})
        dets = [det("a", (0, 0, 10, 10), 0.9), det("b", (50, 50, 60, 60), 0.8)]
        pts = pr_points(dets, gts, 0.5)
        assert len(pts) == 1
        per, _ = odap(dets, gts, iou_thresholds=(0.5,))
        assert per[0.5] == pytest.approx(pts[0].precision * pts[0].recall, abs=1e-12)

    def test_matches_brute_oracle_three_images(self, rng):
        for _ in range(20):
            dets, det_dict, gts, gt_dict = random_micro_dataset(rng, n_images=3)
            expected = oracles.odap_brute(det_dict, gt_dict, 0.5)
            per, _ = odap(dets, gts, iou_thresholds=(0.5,))
            assert per[0.5] == pytest.approx(expected, abs=1e-9)

    def test_strict_thresholds_never_increase(self, rng):
        for _ in range(10):
            dets, _, gts, _ = random_micro_dataset(rng)
            per, mean = odap(dets, gts)
            assert mean <= per[0.5] + 1e-12
            assert per[0.95] <= per[0.5] + 1e-12

    def test_empty_gt_rejected(self):
        with pytest.raises(DegenerateInputError):
            odap([], {})


def rect_mask(shape, r0, c0, r1, c1):
    m = np.zeros(shape, dtype=bool)
    m[r0:r1, c0:c1] = True
    return m


class TestMiou:
    def test_perfect_predictions(self):
        shape = (8, 8)
        gt = [rect_mask(shape, 0, 0, 4, 4), rect_mask(shape, 5, 5, 8, 8)]
        assert miou({"a": list(gt)}, {"a": gt}, {"a": shape}) == 1.0

    def test_no_predictions_background_only(self):
        shape = (4, 4)
        gt = [rect_mask(shape, 0, 0, 2, 2)]
        # objects contribute 0; background IoU = |gt_bg| / |full| = 12/16
        expected = (0.0 + 12 / 16) / 2
        assert miou({"a": []}, {"a": gt}, {"a": shape}) == pytest.approx(expected, abs=1e-12)

    def test_hand_computed_two_objects(self):
        shape = (4, 4)
        gt = [rect_mask(shape, 0, 0, 2, 2), rect_mask(shape, 2, 2, 4, 4)]
        preds = [rect_mask(shape, 0, 0, 2, 3), rect_mask(shape, 2, 2, 4, 4)]
        # object 1: 4/6, object 2: 1, background: 6/8
        expected = (4 / 6 + 1.0 + 6 / 8) / 3
        got = miou({"a": preds}, {"a": gt}, {"a": shape})
        assert got == pytest.approx(expected, abs=1e-12)

    def test_prediction_order_invariant(self, rng):
        shape = (10, 10)
        preds = []
        for _ in range(4):
            r0, r1 = sorted(rng.integers(0, 10, 2))
            c0, c1 = sorted(rng.integers(0, 10, 2))
            preds.append(rect_mask(shape, r0, c0, r1 + 1, c1 + 1))
        preds = [p for p in preds if p.any()]
        gt = [rect_mask(shape, 2, 2, 7, 7)]
        a = miou({"a": preds}, {"a": gt}, {"a": shape})
        b = miou({"a": preds[::-1]}, {"a": gt}, {"a": shape})
        assert a == b

    def test_resolution_mismatch_rejected(self):
        with pytest.raises(DegenerateInputError):
            miou(
                {"a": [np.ones((3, 3), dtype=bool)]},
                {"a": [np.ones((4, 4), dtype=bool)]},
                {"a": (4, 4)},
            )

    def test_matches_pixel_count_oracle(self, rng):
        for _ in range(8):
            shape = (6, 7)
            preds = {}
            gts = {}
            shapes = {}
            for i in range(int(rng.integers(1, 4))):
                image_id = f"im{i}"
                shapes[image_id] = shape
                preds[image_id] = [
                    rect_mask(shape, 0, 0, int(rng.integers(1, 6)), int(rng.integers(1, 7)))
                    for _ in range(int(rng.integers(0, 3)))
                ]
                gts[image_id] = [
                    rect_mask(
                        shape,
                        int(rng.integers(0, 3)),
                        int(rng.integers(0, 3)),
                        int(rng.integers(3, 6)),
                        int(rng.integers(3, 7)),
                    )
                    for _ in range(int(rng.integers(1, 3)))
                ]
            expected = oracles.miou_brute(preds, gts, shapes)
            assert miou(preds, gts, shapes) == pytest.approx(expected, abs=1e-12)
