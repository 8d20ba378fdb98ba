"""Archive production: images -> UODF v1 files + manifest.json.

Per image: resize so both sides are multiples of the patch size (short
side rounded to the nearest multiple, long side center-cropped), run the
backbone once for last-layer patch keys, run selective search for
proposals, then batch the proposal crops (aspect-preserving pad to
square, resize to the crop resolution) through the backbone for CLS
features. Grayscale crop histograms are computed from the processed
image so the numeric pipeline never needs image decoding.
"""

import logging
import os
from dataclasses import dataclass

import numpy as np
import torch
from PIL import Image

from uodkit.feature_store import (
    ImageRecord,
    PatchFeatureMap,
    ProposalSet,
    write_image_record,
    write_manifest,
)

from . import selective_search
from .vit import PATCH_SIZE, load_checkpoint, preprocess

log = logging.getLogger("uodextract")


@dataclass
class ExtractionConfig:
    image_dir: str
    out_dir: str
    checkpoint: str
    patch_size: int = PATCH_SIZE
    crop_resolution: int = 224
    device: str = "cpu"
    batch_size: int = 16


def processed_size(width: int, height: int, patch: int):
    """Aspect-preserving target size with both sides multiples of patch."""
    short, long = min(width, height), max(width, height)
    new_short = max(2 * patch, int(round(short / patch)) * patch)
    new_long_raw = long * new_short / short
    new_long = max(2 * patch, int(new_long_raw // patch) * patch)
    if width <= height:
        return new_short, new_long
    return new_long, new_short


def load_image(path, patch: int):
    """Decode to RGB and resize/crop to patch-aligned dimensions."""
    with Image.open(path) as img:
        img = img.convert("RGB")
        target_w, target_h = processed_size(img.width, img.height, patch)
        if (img.width, img.height) != (target_w, target_h):
            scale = max(target_w / img.width, target_h / img.height)
            resized = img.resize(
                (max(target_w, int(round(img.width * scale))),
                 max(target_h, int(round(img.height * scale)))),
                Image.BILINEAR,
            )
            left = (resized.width - target_w) // 2
            top = (resized.height - target_h) // 2
            img = resized.crop((left, top, left + target_w, top + target_h))
        rgb = np.array(img, dtype=np.uint8)  # writable copy for torch
    return rgb


def to_gray(rgb: np.ndarray) -> np.ndarray:
    weights = np.array([0.299, 0.587, 0.114])
    return np.clip(rgb.astype(np.float64) @ weights, 0, 255).astype(np.uint8)


def gray_histogram(gray: np.ndarray, box) -> np.ndarray:
    x1, y1, x2, y2 = (int(v) for v in box)
    crop = gray[y1:y2, x1:x2]
    return np.bincount(crop.ravel(), minlength=256).astype(np.uint32)


def _pad_to_square(crop: torch.Tensor) -> torch.Tensor:
    _, h, w = crop.shape
    side = max(h, w)
    out = torch.zeros(3, side, side, dtype=crop.dtype)
    out[:, :h, :w] = crop
    return out


class Extractor:
    def __init__(self, config: ExtractionConfig):
        self.config = config
        self.model = load_checkpoint(config.checkpoint).to(config.device)

    @torch.no_grad()
    def patch_keys(self, rgb: np.ndarray, image_id: str) -> PatchFeatureMap:
        pixels = torch.from_numpy(rgb).float().permute(2, 0, 1) / 255.0
        batch = preprocess(pixels.unsqueeze(0)).to(self.config.device)
        _, keys = self.model.forward_tokens(batch)
        return PatchFeatureMap(image_id, keys[0].cpu().numpy().astype(np.float32))

    @torch.no_grad()
    def crop_cls(self, rgb: np.ndarray, boxes: np.ndarray) -> np.ndarray:
        pixels = torch.from_numpy(rgb).float().permute(2, 0, 1) / 255.0
        res = self.config.crop_resolution
        crops = []
        for box in boxes:
            x1, y1, x2, y2 = (int(v) for v in box)
            crop = _pad_to_square(pixels[:, y1:y2, x1:x2])
            if crop.shape[-1] != res:
                crop = torch.nn.functional.interpolate(
                    crop.unsqueeze(0), size=(res, res), mode="bilinear",
                    align_corners=False, antialias=True,
                )[0]
            crops.append(crop)
        features = []
        for start in range(0, len(crops), self.config.batch_size):
            batch = torch.stack(crops[start : start + self.config.batch_size])
            batch = preprocess(batch).to(self.config.device)
            cls, _ = self.model.forward_tokens(batch)
            features.append(cls.cpu().numpy())
        return np.concatenate(features).astype(np.float32)

    def extract_image(self, path, image_id: str) -> ImageRecord:
        rgb = load_image(path, self.config.patch_size)
        height, width = rgb.shape[:2]
        fmap = self.patch_keys(rgb, image_id)
        boxes, ranks = selective_search.propose(rgb.astype(np.float64) / 255.0)
        usable = []
        for i, box in enumerate(boxes):
            x1, y1, x2, y2 = (int(v) for v in box)
            if x2 - x1 < 2 or y2 - y1 < 2:
                log.warning("%s: skipping degenerate proposal %s", image_id, box)
                continue
            usable.append(i)
        boxes, ranks = boxes[usable], ranks[usable]
        cls = self.crop_cls(rgb, boxes)
        gray = to_gray(rgb)
        hists = np.stack([gray_histogram(gray, box) for box in boxes]) if len(boxes) else np.zeros((0, 256), np.uint32)
        proposals = ProposalSet(
            image_id=image_id,
            image_width=width,
            image_height=height,
            boxes=boxes.astype(np.float32),
            original_rank=ranks,
            cls_features=cls.reshape(len(boxes), -1),
            gray_histograms=hists,
        )
        return ImageRecord(fmap, proposals)


IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png", ".bmp", ".webp")


def run(config: ExtractionConfig) -> list:
    """Extract every image in config.image_dir; returns manifest entries."""
    os.makedirs(config.out_dir, exist_ok=True)
    extractor = Extractor(config)
    entries = []
    names = sorted(
        n for n in os.listdir(config.image_dir)
        if n.lower().endswith(IMAGE_EXTENSIONS)
    )
    for name in names:
        image_id = os.path.splitext(name)[0]
        record = extractor.extract_image(
            os.path.join(config.image_dir, name), image_id
        )
        out_file = f"{image_id}.uodf"
        write_image_record(record, os.path.join(config.out_dir, out_file))
        entries.append(
            {
                "id": image_id,
                "file": out_file,
                "width": record.proposals.image_width,
                "height": record.proposals.image_height,
            }
        )
        log.info(
            "%s: %dx%d grid, %d proposals",
            image_id,
            record.features.h_patches,
            record.features.w_patches,
            len(record.proposals),
        )
    write_manifest(entries, os.path.join(config.out_dir, "manifest.json"))
    return entries
