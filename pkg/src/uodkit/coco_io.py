"""COCO-style JSON input/output with uncompressed RLE masks.

Boxes are stored as [x, y, width, height]; segmentations as
{"size": [height, width], "counts": [...]} where counts are run lengths
in column-major order starting with the zero run. Schema violations are
reported with a JSON path to the offending element.
"""

import json

import jsonschema
import numpy as np

from .errors import SchemaError
from .feature_store import GroundTruth
from .metrics import Detection

_RLE_SCHEMA = {
    "type": "object",
    "required": ["size", "counts"],
    "properties": {
        "size": {
            "type": "array",
            "items": {"type": "integer", "minimum": 1},
            "minItems": 2,
            "maxItems": 2,
        },
        "counts": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    },
}

_ANNOTATION_SCHEMA = {
    "type": "object",
    "required": ["image_id", "bbox"],
    "properties": {
        "image_id": {"type": ["string", "integer"]},
        "bbox": {
            "type": "array",
            "items": {"type": "number"},
            "minItems": 4,
            "maxItems": 4,
        },
        "score": {"type": "number"},
        "category_id": {"type": "integer"},
        "segmentation": _RLE_SCHEMA,
    },
}

_DOCUMENT_SCHEMA = {
    "type": "object",
    "required": ["images", "annotations"],
    "properties": {
        "images": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "width", "height"],
                "properties": {
                    "id": {"type": ["string", "integer"]},
                    "width": {"type": "integer", "minimum": 1},
                    "height": {"type": "integer", "minimum": 1},
                },
            },
        },
        "annotations": {"type": "array", "items": _ANNOTATION_SCHEMA},
        "categories": {"type": "array"},
    },
}


def rle_encode(mask: np.ndarray) -> dict:
    """Uncompressed column-major RLE of a boolean mask."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    flat = mask.flatten(order="F")
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds)
    counts = []
    if flat.size and flat[0]:
        counts.append(0)  # counts start with the zero run, possibly empty
    counts.extend(int(r) for r in runs)
    return {"size": [int(h), int(w)], "counts": counts}


def rle_decode(rle: dict) -> np.ndarray:
    h, w = rle["size"]
    counts = rle["counts"]
    total = sum(counts)
    if total != h * w:
        raise SchemaError("segmentation.counts", f"runs sum to {total}, expected {h * w}")
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    val = False
    for c in counts:
        if val:
            flat[pos : pos + c] = True
        pos += c
        val = not val
    return flat.reshape((h, w), order="F")


def _validate(doc, what: str):
    validator = jsonschema.Draft7Validator(_DOCUMENT_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path
        ).lstrip(".") or "$"
        raise SchemaError(f"{what}:{path}", err.message)


def box_xyxy_to_xywh(box):
    x1, y1, x2, y2 = box
    return [float(x1), float(y1), float(x2 - x1), float(y2 - y1)]


def box_xywh_to_xyxy(box):
    x, y, w, h = box
    return (float(x), float(y), float(x + w), float(y + h))


def write_instances(
    instance_sets, image_sizes, path, n_classes: int, feature_mode: str = None
) -> None:
    """Serialize InstanceSets as a COCO-style pseudo-label document.

    ``image_sizes`` maps image id to (width, height); images are written
    sorted by id so output bytes are stable. ``feature_mode`` records how
    region features were obtained (e.g. mean patch-key pooling).
    """
    images = [
        {"id": image_id, "width": int(wh[0]), "height": int(wh[1])}
        for image_id, wh in sorted(image_sizes.items())
    ]
    annotations = []
    ann_id = 1
    for inst_set in sorted(instance_sets, key=lambda s: s.image_id):
        for inst in inst_set.instances:
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": inst_set.image_id,
                    "category_id": int(inst.class_id),
                    "bbox": box_xyxy_to_xywh(inst.bbox),
                    "score": float(inst.confidence),
                    "segmentation": rle_encode(inst.mask),
                    "area": int(inst.mask.sum()),
                }
            )
            ann_id += 1
    doc = {
        "images": images,
        "annotations": annotations,
        "categories": [
            {"id": c, "name": f"discovered_{c}"} for c in range(n_classes)
        ],
    }
    if feature_mode is not None:
        doc["info"] = {"feature_mode": feature_mode}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_detections(path):
    """Load predictions: (detections, masks_by_image, image_shapes)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    _validate(doc, "predictions")
    shapes = {img["id"]: (img["height"], img["width"]) for img in doc["images"]}
    dets = []
    masks = {img_id: [] for img_id in shapes}
    for ann in doc["annotations"]:
        mask = None
        if "segmentation" in ann:
            mask = rle_decode(ann["segmentation"])
        dets.append(
            Detection(
                image_id=ann["image_id"],
                bbox=box_xywh_to_xyxy(ann["bbox"]),
                score=float(ann.get("score", 0.0)),
                mask=mask,
            )
        )
        if mask is not None:
            masks.setdefault(ann["image_id"], []).append(mask)
    return dets, masks, shapes


def read_ground_truth(path):
    """Load annotations: (gts_by_image, masks_by_image, image_shapes)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    _validate(doc, "ground_truth")
    shapes = {img["id"]: (img["height"], img["width"]) for img in doc["images"]}
    boxes = {img_id: [] for img_id in shapes}
    masks = {img_id: [] for img_id in shapes}
    for ann in doc["annotations"]:
        img_id = ann["image_id"]
        boxes.setdefault(img_id, []).append(box_xywh_to_xyxy(ann["bbox"]))
        if "segmentation" in ann:
            masks.setdefault(img_id, []).append(rle_decode(ann["segmentation"]))
    gts = {
        img_id: GroundTruth(
            image_id=img_id,
            boxes=np.array(blist, dtype=np.float64).reshape(-1, 4),
            masks=masks.get(img_id, []),
        )
        for img_id, blist in boxes.items()
    }
    return gts, masks, shapes
