"""UODF v1 archive format: per-image patch features + proposal records.

One binary file per image, little-endian throughout:

    magic "UODF" | version u32 | id_len u32 | image_id utf-8 |
    image_width u32 | image_height u32 | h_patches u32 | w_patches u32 |
    dim u32 | values f32[h*w*dim] | n_proposals u32 |
    per proposal: box f32[4] | original_rank u32 | cls f32[dim] | hist u32[256]

plus a manifest.json listing {"images": [{"id", "file", "width", "height"}]}.
Records are immutable after load; readers never repair invalid data.
"""

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagicError,
    InvariantViolation,
    TruncatedArchiveError,
    VersionMismatchError,
)

MAGIC = b"UODF"
VERSION = 1
HIST_BINS = 256


@dataclass
class PatchFeatureMap:
    """Grid of D-dimensional patch tokens for one image."""

    image_id: str
    values: np.ndarray  # float32 (h_patches, w_patches, dim)

    @property
    def h_patches(self) -> int:
        return self.values.shape[0]

    @property
    def w_patches(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def validate(self):
        if self.values.ndim != 3:
            raise InvariantViolation("values", "expected a (h, w, dim) tensor")
        if self.h_patches < 2 or self.w_patches < 2:
            raise InvariantViolation("values", "patch grid must be at least 2x2")
        if self.dim < 1:
            raise InvariantViolation("values", "dim must be >= 1")
        if not np.isfinite(self.values).all():
            raise InvariantViolation("values", "contains NaN or Inf")


@dataclass
class ProposalSet:
    """Region proposals for one image with per-box features and histograms."""

    image_id: str
    image_width: int
    image_height: int
    boxes: np.ndarray  # float32 (n, 4) as (x1, y1, x2, y2)
    original_rank: np.ndarray  # uint32 (n,)
    cls_features: np.ndarray  # float32 (n, dim)
    gray_histograms: np.ndarray  # uint32 (n, 256)

    def __len__(self) -> int:
        return self.boxes.shape[0]

    def validate(self):
        n = len(self)
        if self.image_width <= 0 or self.image_height <= 0:
            raise InvariantViolation("image_width/image_height", "must be positive")
        if self.boxes.shape != (n, 4):
            raise InvariantViolation("boxes", "expected shape (n, 4)")
        for name, arr, shape in (
            ("original_rank", self.original_rank, (n,)),
            ("cls_features", self.cls_features, None),
            ("gray_histograms", self.gray_histograms, (n, HIST_BINS)),
        ):
            if shape is not None and arr.shape != shape:
                raise InvariantViolation(name, f"expected shape {shape}")
        if self.cls_features.ndim != 2 or self.cls_features.shape[0] != n:
            raise InvariantViolation("cls_features", "expected shape (n, dim)")
        if n == 0:
            return
        x1, y1, x2, y2 = (self.boxes[:, i] for i in range(4))
        if (x1 < 0).any() or (y1 < 0).any():
            raise InvariantViolation("boxes", "negative coordinates")
        if (x1 >= x2).any() or (y1 >= y2).any():
            raise InvariantViolation("boxes", "empty or inverted box")
        if (x2 > self.image_width).any() or (y2 > self.image_height).any():
            raise InvariantViolation("boxes", "box exceeds image bounds")
        if not np.isfinite(self.cls_features).all():
            raise InvariantViolation("cls_features", "contains NaN or Inf")
        if (np.linalg.norm(self.cls_features, axis=1) == 0).any():
            raise InvariantViolation("cls_features", "zero-norm feature row")
        if (self.gray_histograms.sum(axis=1) == 0).any():
            raise InvariantViolation("gray_histograms", "histogram sums to zero")


@dataclass
class GroundTruth:
    """Evaluation annotations for one image."""

    image_id: str
    boxes: np.ndarray  # float64 (n, 4)
    masks: list = field(default_factory=list)  # optional bool arrays (H, W)


@dataclass
class ImageRecord:
    features: PatchFeatureMap
    proposals: ProposalSet

    def validate(self):
        self.features.validate()
        self.proposals.validate()
        if self.features.image_id != self.proposals.image_id:
            raise InvariantViolation("image_id", "feature map and proposals disagree")
        if len(self.proposals) and self.proposals.cls_features.shape[1] != self.features.dim:
            raise InvariantViolation("cls_features", "dim differs from the feature map")


def _pack_u32(*vals) -> bytes:
    return struct.pack("<%dI" % len(vals), *vals)


def write_image_record(record: ImageRecord, path) -> None:
    """Serialize a validated record; the result round-trips bit-exactly."""
    record.validate()
    fmap, props = record.features, record.proposals
    ident = fmap.image_id.encode("utf-8")
    chunks = [
        MAGIC,
        _pack_u32(VERSION, len(ident)),
        ident,
        _pack_u32(
            props.image_width,
            props.image_height,
            fmap.h_patches,
            fmap.w_patches,
            fmap.dim,
        ),
        np.ascontiguousarray(fmap.values, dtype="<f4").tobytes(),
        _pack_u32(len(props)),
    ]
    for i in range(len(props)):
        chunks.append(np.ascontiguousarray(props.boxes[i], dtype="<f4").tobytes())
        chunks.append(_pack_u32(int(props.original_rank[i])))
        chunks.append(np.ascontiguousarray(props.cls_features[i], dtype="<f4").tobytes())
        chunks.append(np.ascontiguousarray(props.gray_histograms[i], dtype="<u4").tobytes())
    blob = b"".join(chunks)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedArchiveError(
                f"needed {n} bytes at offset {self.pos}, file has {len(self.blob)}"
            )
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, count: int = 1):
        vals = struct.unpack("<%dI" % count, self.take(4 * count))
        return vals[0] if count == 1 else vals

    def array(self, dtype: str, count: int, shape) -> np.ndarray:
        raw = self.take(count * 4)
        return np.frombuffer(raw, dtype=dtype).reshape(shape).copy()


def read_image_record(path) -> ImageRecord:
    """Read and validate one archive file."""
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob)
    if r.take(4) != MAGIC:
        raise BadMagicError(f"{path}: not a UODF file")
    version = r.u32()
    if version != VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {VERSION}")
    ident = r.take(r.u32()).decode("utf-8")
    width, height, h, w, dim = r.u32(5)
    values = r.array("<f4", h * w * dim, (h, w, dim))
    n = r.u32()
    boxes = np.empty((n, 4), dtype=np.float32)
    ranks = np.empty(n, dtype=np.uint32)
    cls = np.empty((n, dim), dtype=np.float32)
    hists = np.empty((n, HIST_BINS), dtype=np.uint32)
    for i in range(n):
        boxes[i] = r.array("<f4", 4, (4,))
        ranks[i] = r.u32()
        cls[i] = r.array("<f4", dim, (dim,))
        hists[i] = r.array("<u4", HIST_BINS, (HIST_BINS,))
    record = ImageRecord(
        PatchFeatureMap(ident, values),
        ProposalSet(ident, width, height, boxes, ranks, cls, hists),
    )
    record.validate()
    return record


def write_manifest(entries, path) -> None:
    """entries: iterable of dicts with keys id, file, width, height."""
    doc = {"images": [dict(e) for e in entries]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> list:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return doc["images"]
