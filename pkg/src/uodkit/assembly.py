"""Merge classified part segments into instances and filter background.

Parts sharing a class whose dilated masks touch are merged transitively
into proto-instances (union mask, area-weighted confidence). After
merging, each proto's pooled feature goes through the foreground/
background decision; survivors are upsampled to image resolution and
become the final instances. Filtering after merging keeps small object
parts from being discarded as background on their own.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .classify import ClassifierBackend
from .errors import DegenerateInputError
from .feature_store import PatchFeatureMap
from .parts import SegmentMap, extract_segments

DEFAULT_DILATION_RADIUS = 2
DEFAULT_MIN_INSTANCE_FRAC = 0.001

_CROSS = ndimage.generate_binary_structure(2, 1)  # 4-connected step


@dataclass
class MergeParams:
    dilation_radius: int = DEFAULT_DILATION_RADIUS
    min_instance_area: int = 0  # pixels at image resolution
    min_part_area: int = 4  # cells at grid resolution

    def __post_init__(self):
        if self.dilation_radius < 0:
            raise ValueError("dilation_radius must be >= 0")


@dataclass
class ProtoInstance:
    mask: np.ndarray  # bool, grid resolution
    class_id: int
    confidence: float
    area: int  # cells


@dataclass
class Instance:
    mask: np.ndarray  # bool, image resolution
    class_id: int
    confidence: float
    bbox: tuple  # (x1, y1, x2, y2) pixels, exclusive right/bottom


@dataclass
class InstanceSet:
    image_id: str
    instances: list
    feature_mode: str = "mean_patch_keys"


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius == 0:
        return mask
    return ndimage.binary_dilation(mask, structure=_CROSS, iterations=radius)


def merge_parts(parts, params: MergeParams) -> list:
    """Transitively merge same-class parts whose dilated masks intersect.

    ``parts`` is a sequence of (PartSegment, ClassDecision) pairs; each
    connected component of the touch graph yields one ProtoInstance.
    """
    parts = list(parts)
    n = len(parts)
    dilated = [_dilate(seg.mask, params.dilation_radius) for seg, _ in parts]
    adjacency = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if parts[i][1].class_id != parts[j][1].class_id:
                continue
            if (dilated[i] & dilated[j]).any():
                adjacency[i].append(j)
                adjacency[j].append(i)
    protos = []
    seen = [False] * n
    for start in range(n):
        if seen[start]:
            continue
        stack, members = [start], []
        seen[start] = True
        while stack:
            node = stack.pop()
            members.append(node)
            for nb in adjacency[node]:
                if not seen[nb]:
                    seen[nb] = True
                    stack.append(nb)
        members.sort()
        mask = np.zeros_like(parts[members[0]][0].mask)
        weighted = 0.0
        total_area = 0
        for m in members:
            seg, decision = parts[m]
            mask |= seg.mask
            weighted += seg.area * decision.confidence
            total_area += seg.area
        protos.append(
            ProtoInstance(
                mask=mask,
                class_id=parts[members[0]][1].class_id,
                confidence=weighted / total_area,
                area=total_area,
            )
        )
    return protos


def upsample_mask(mask: np.ndarray, out_height: int, out_width: int) -> np.ndarray:
    """Nearest-neighbour resize of a boolean grid to image resolution."""
    h, w = mask.shape
    rows = np.minimum((np.arange(out_height) * h) // out_height, h - 1)
    cols = np.minimum((np.arange(out_width) * w) // out_width, w - 1)
    return mask[rows][:, cols]


def mask_to_box(mask: np.ndarray) -> tuple:
    """Tight (x1, y1, x2, y2) box around the true cells, exclusive ends."""
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        raise DegenerateInputError("mask_to_box on an empty mask")
    cols = np.flatnonzero(mask.any(axis=0))
    return (int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)


def pooled_feature(fmap: PatchFeatureMap, mask: np.ndarray) -> np.ndarray:
    """Mean patch-key vector over the masked grid cells.

    The mask may live on an upsampled grid; cells then map back to their
    patch by nearest neighbour, weighting patches by covered cell count.
    """
    if not mask.any():
        raise DegenerateInputError("pooled feature of an empty mask")
    h, w = fmap.h_patches, fmap.w_patches
    mh, mw = mask.shape
    values = np.asarray(fmap.values, dtype=np.float64)
    if (mh, mw) == (h, w):
        return values[mask].mean(axis=0)
    rows = np.minimum((np.arange(mh) * h) // mh, h - 1)
    cols = np.minimum((np.arange(mw) * w) // mw, w - 1)
    rs, cs = np.nonzero(mask)
    return values[rows[rs], cols[cs]].mean(axis=0)


def filter_background(
    protos,
    backend: ClassifierBackend,
    fmap: PatchFeatureMap,
    image_width: int,
    image_height: int,
    min_instance_area: int = 0,
) -> list:
    """Keep foreground protos, upsample their masks, and box them."""
    instances = []
    for proto in protos:
        is_fg, _ = backend.classify_fg(pooled_feature(fmap, proto.mask))
        if not is_fg:
            continue
        mask = upsample_mask(proto.mask, image_height, image_width)
        if int(mask.sum()) < min_instance_area:
            continue
        instances.append(
            Instance(
                mask=mask,
                class_id=proto.class_id,
                confidence=proto.confidence,
                bbox=mask_to_box(mask),
            )
        )
    return instances


def assemble(
    fmap: PatchFeatureMap,
    segmap: SegmentMap,
    backend: ClassifierBackend,
    params: MergeParams,
    image_width: int,
    image_height: int,
) -> InstanceSet:
    """Full per-image tail of the pipeline: segments -> classes -> merge ->
    background filter -> instances with boxes."""
    segments = extract_segments(segmap, params.min_part_area)
    classified = [
        (seg, backend.classify(pooled_feature(fmap, seg.mask))) for seg in segments
    ]
    protos = merge_parts(classified, params)
    instances = filter_background(
        protos, backend, fmap, image_width, image_height, params.min_instance_area
    )
    return InstanceSet(image_id=fmap.image_id, instances=instances)
