"""End-to-end orchestration from archives to pseudo-labels.

Stage order: per-image proposal ranking, one dataset-level clustering
pass (the barrier), then the per-image spectral + part discovery +
assembly fan-out. Every per-image stage is a pure function of the
archive and the frozen model, so the fan-out parallelizes freely and
results are gathered in image-id order regardless of worker count.
"""

import concurrent.futures
import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, coco_io, semantics, spectral
from .assembly import MergeParams, assemble
from .classify import CentroidClassifier
from .config import PipelineConfig
from .errors import UodkitError
from .feature_store import read_image_record, read_manifest
from .parts import discover_parts
from .ranking import RankingParams, objectness_scores, select_priors


@dataclass
class RunManifest:
    config: dict
    tool_version: str = __version__
    timings: dict = field(default_factory=dict)
    image_status: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "tool_version": self.tool_version,
            "timings": self.timings,
            "image_status": self.image_status,
        }


def _ranking_params(config: PipelineConfig) -> RankingParams:
    return RankingParams(
        alpha=config.alpha,
        iou_threshold=config.iou_threshold,
        top_p=config.top_p,
        bottom_q=config.bottom_q,
        max_considered=config.max_considered,
        aggregate=config.aggregate,
    )


def _archive_path(archive_dir, entry):
    return os.path.join(archive_dir, entry["file"])


def load_entries(archive_dir):
    entries = read_manifest(os.path.join(archive_dir, "manifest.json"))
    return sorted(entries, key=lambda e: e["id"])


def rank_image(record, config: PipelineConfig):
    """Rank one image's proposals; returns (ranked, top_idx, bottom_idx)."""
    ranked = objectness_scores(record.proposals, _ranking_params(config))
    top, bottom = select_priors(ranked, _ranking_params(config))
    return ranked, top, bottom


def _rank_signature(config: PipelineConfig) -> np.ndarray:
    return np.array(
        [
            config.alpha,
            config.iou_threshold,
            config.top_p,
            config.bottom_q,
            config.max_considered,
            1.0 if config.aggregate == "mean" else 0.0,
        ]
    )


def run_rank(config: PipelineConfig, entries=None):
    """Stage 1: per-image rankings, persisted as one npz per image.

    Images whose ranking file already exists with a matching parameter
    signature are skipped, making the stage resumable.
    """
    entries = entries if entries is not None else load_entries(config.archive_dir)
    out_dir = os.path.join(config.output_dir, "rankings")
    os.makedirs(out_dir, exist_ok=True)
    signature = _rank_signature(config)
    status = {}
    for entry in entries:
        out_file = os.path.join(out_dir, f"{entry['id']}.npz")
        if os.path.exists(out_file):
            try:
                if np.array_equal(np.load(out_file)["signature"], signature):
                    status[entry["id"]] = "ok"
                    continue
            except (OSError, KeyError, ValueError):
                pass  # unreadable or stale cache: recompute
        try:
            record = read_image_record(_archive_path(config.archive_dir, entry))
            ranked, top, bottom = rank_image(record, config)
            np.savez(
                out_file,
                indices=ranked.indices,
                scores=ranked.scores,
                components=ranked.components,
                order=ranked.order,
                top=top,
                bottom=bottom,
                signature=signature,
            )
            status[entry["id"]] = "ok"
        except (UodkitError, OSError, ValueError) as exc:
            status[entry["id"]] = f"failed: {exc}"
    return status


def run_fit(config: PipelineConfig, entries=None):
    """Stage 2: dataset-level cluster model from the persisted rankings."""
    entries = entries if entries is not None else load_entries(config.archive_dir)
    rank_dir = os.path.join(config.output_dir, "rankings")
    top_feats, bottom_feats = [], []
    for entry in entries:
        rank_file = os.path.join(rank_dir, f"{entry['id']}.npz")
        if not os.path.exists(rank_file):
            continue
        data = np.load(rank_file)
        record = read_image_record(_archive_path(config.archive_dir, entry))
        top_feats.append(record.proposals.cls_features[data["top"]])
        bottom_feats.append(record.proposals.cls_features[data["bottom"]])
    if not top_feats:
        raise UodkitError("no ranked images available for fitting")
    bottom_feats = [b for b in bottom_feats if len(b)]
    if not bottom_feats:
        raise UodkitError("no background exemplars; increase bottom_q or proposals")
    model = semantics.fit(
        np.concatenate(top_feats).astype(np.float64),
        np.concatenate(bottom_feats).astype(np.float64),
        k_range=tuple(config.k_range),
        t_bg=config.t_bg,
        seed=config.seed,
    )
    semantics.save_model(
        model,
        os.path.join(config.output_dir, "model.json"),
        os.path.join(config.output_dir, "model.bin"),
    )
    return model


def _discover_signature(config: PipelineConfig, model) -> str:
    """Fingerprint of everything the per-image stage depends on: the full
    config (minus execution knobs) and the frozen cluster model."""
    doc = config.to_dict()
    for key in ("workers", "output_dir", "archive_dir"):
        doc.pop(key, None)
    digest = hashlib.sha256(json.dumps(doc, sort_keys=True).encode())
    digest.update(np.ascontiguousarray(model.centroids).tobytes())
    digest.update(np.ascontiguousarray(model.bg_pattern).tobytes())
    digest.update(model.is_foreground.astype(np.uint8).tobytes())
    return digest.hexdigest()


def _cache_file(config: PipelineConfig, image_id: str) -> str:
    return os.path.join(config.output_dir, "instances", f"{image_id}.npz")


def _store_instances(path, inst_set, size, signature: str) -> None:
    n = len(inst_set.instances)
    height, width = (inst_set.instances[0].mask.shape if n else (0, 0))
    np.savez_compressed(
        path,
        signature=np.array(signature),
        image_id=np.array(inst_set.image_id),
        feature_mode=np.array(inst_set.feature_mode),
        size=np.array(size, dtype=np.int64),
        masks=np.stack([i.mask for i in inst_set.instances]).astype(bool)
        if n
        else np.zeros((0, height, width), dtype=bool),
        class_ids=np.array([i.class_id for i in inst_set.instances], dtype=np.int64),
        confidences=np.array([i.confidence for i in inst_set.instances], dtype=np.float64),
        bboxes=np.array([i.bbox for i in inst_set.instances], dtype=np.int64).reshape(n, 4),
    )


def _load_instances(path, signature: str):
    from .assembly import Instance, InstanceSet

    try:
        data = np.load(path)
        if str(data["signature"][()]) != signature:
            return None
        instances = [
            Instance(
                mask=data["masks"][i],
                class_id=int(data["class_ids"][i]),
                confidence=float(data["confidences"][i]),
                bbox=tuple(int(v) for v in data["bboxes"][i]),
            )
            for i in range(len(data["class_ids"]))
        ]
        inst_set = InstanceSet(
            image_id=str(data["image_id"][()]),
            instances=instances,
            feature_mode=str(data["feature_mode"][()]),
        )
        return inst_set, tuple(int(v) for v in data["size"])
    except (OSError, KeyError, ValueError):
        return None  # unreadable or stale cache: recompute


def discover_image(path, config: PipelineConfig, model):
    """Per-image tail: spectral features, part discovery, assembly."""
    record = read_image_record(path)
    graph = spectral.build_affinity(
        record.features,
        floor=config.affinity_floor,
        binarize=config.binarize_affinity,
        binarize_tau=config.binarize_tau,
    )
    basis = spectral.eigendecompose(graph, config.n_eigenvectors)
    space = spectral.build_feature_space(
        basis, record.features.h_patches, record.features.w_patches, config.upsample
    )
    segmap = discover_parts(space, config.thresh, config.k_max, config.seed)
    width = record.proposals.image_width
    height = record.proposals.image_height
    params = MergeParams(
        dilation_radius=config.dilation_radius,
        min_instance_area=int(round(config.min_instance_frac * width * height)),
        min_part_area=config.min_part_area,
    )
    backend = CentroidClassifier(model, config.temperature)
    return assemble(record.features, segmap, backend, params, width, height), (width, height)


def _discover_worker(args):
    image_id, path, config, model, signature = args
    cache = _cache_file(config, image_id)
    cached = _load_instances(cache, signature) if os.path.exists(cache) else None
    if cached is not None:
        return image_id, cached[0], cached[1], "ok"
    try:
        inst_set, size = discover_image(path, config, model)
    except (UodkitError, OSError, ValueError) as exc:
        return image_id, None, None, f"failed: {exc}"
    _store_instances(cache, inst_set, size, signature)
    return image_id, inst_set, size, "ok"


def run_discover(config: PipelineConfig):
    """Full pipeline; returns (instance_sets, manifest, exit_code)."""
    config.validate()
    os.makedirs(config.output_dir, exist_ok=True)
    manifest = RunManifest(config=config.to_dict())
    entries = load_entries(config.archive_dir)

    t0 = time.perf_counter()
    rank_status = run_rank(config, entries)
    manifest.timings["rank_s"] = round(time.perf_counter() - t0, 6)

    ok_entries = [e for e in entries if rank_status[e["id"]] == "ok"]
    t0 = time.perf_counter()
    model = run_fit(config, ok_entries)
    manifest.timings["fit_s"] = round(time.perf_counter() - t0, 6)

    t0 = time.perf_counter()
    os.makedirs(os.path.join(config.output_dir, "instances"), exist_ok=True)
    signature = _discover_signature(config, model)
    tasks = [
        (e["id"], _archive_path(config.archive_dir, e), config, model, signature)
        for e in ok_entries
    ]
    results = {}
    sizes = {}
    workers = config.workers or os.cpu_count() or 1
    if workers > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_discover_worker, tasks))
    else:
        outcomes = [_discover_worker(t) for t in tasks]
    for image_id, inst_set, size, status in outcomes:
        manifest.image_status[image_id] = status
        if inst_set is not None:
            results[image_id] = inst_set
            sizes[image_id] = size
    for entry in entries:
        manifest.image_status.setdefault(entry["id"], rank_status[entry["id"]])
    manifest.timings["discover_s"] = round(time.perf_counter() - t0, 6)

    instance_sets = [results[i] for i in sorted(results)]
    coco_io.write_instances(
        instance_sets,
        sizes,
        os.path.join(config.output_dir, "pseudo_labels.json"),
        n_classes=model.n_classes,
        feature_mode=instance_sets[0].feature_mode if instance_sets else None,
    )
    with open(os.path.join(config.output_dir, "run_manifest.json"), "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    failed = any(v != "ok" for v in manifest.image_status.values())
    return instance_sets, manifest, (2 if failed else 0)
