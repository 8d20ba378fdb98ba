"""Command line entry point.

Subcommands mirror the pipeline stages so each can rerun independently
from persisted intermediates:

    uodkit rank     --config run.toml            per-image proposal rankings
    uodkit fit      --config run.toml            dataset-level cluster model
    uodkit discover --config run.toml            full pipeline -> pseudo_labels.json
    uodkit export   --predictions P --out DIR    indexed-color mask PNGs + copy
    uodkit eval     --predictions P --gt G --task odap,ap50,miou,recall

Exit codes: 0 success, 1 usage or config error, 2 partial failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, coco_io, metrics, pipeline
from .config import ConfigError, load_config
from .errors import UodkitError


def _add_config_args(parser):
    parser.add_argument("--config", required=True, help="TOML-style config file")
    parser.add_argument("--archive-dir", dest="archive_dir")
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)


def _load(args) -> "pipeline.PipelineConfig":
    overrides = {
        "archive_dir": args.archive_dir,
        "output_dir": args.output_dir,
        "seed": args.seed,
        "workers": args.workers,
    }
    return load_config(args.config, overrides)


def _cmd_rank(args) -> int:
    config = _load(args)
    os.makedirs(config.output_dir, exist_ok=True)
    status = pipeline.run_rank(config)
    failures = {k: v for k, v in status.items() if v != "ok"}
    for image_id, msg in sorted(failures.items()):
        print(f"{image_id}: {msg}", file=sys.stderr)
    print(f"ranked {len(status) - len(failures)}/{len(status)} images")
    return 2 if failures else 0


def _cmd_fit(args) -> int:
    config = _load(args)
    model = pipeline.run_fit(config)
    print(
        f"fitted {model.n_clusters} clusters "
        f"({model.n_classes} foreground classes) -> {config.output_dir}/model.json"
    )
    return 0


def _cmd_discover(args) -> int:
    config = _load(args)
    instance_sets, manifest, code = pipeline.run_discover(config)
    n_instances = sum(len(s.instances) for s in instance_sets)
    print(
        f"discovered {n_instances} instances across {len(instance_sets)} images "
        f"-> {config.output_dir}/pseudo_labels.json"
    )
    for image_id, status in sorted(manifest.image_status.items()):
        if status != "ok":
            print(f"{image_id}: {status}", file=sys.stderr)
    return code


def _cmd_export(args) -> int:
    dets, masks, shapes = coco_io.read_detections(args.predictions)
    os.makedirs(args.out, exist_ok=True)
    if args.mask_pngs:
        from .mask_png import write_indexed_png

        for image_id, image_masks in sorted(masks.items()):
            if not image_masks:
                continue
            h, w = shapes[image_id]
            canvas = np.zeros((h, w), dtype=np.uint8)
            for i, m in enumerate(image_masks, start=1):
                canvas[m] = min(i, 255)
            write_indexed_png(
                canvas, os.path.join(args.out, f"{image_id}_masks.png")
            )
    with open(args.predictions, encoding="utf-8") as fh:
        doc = json.load(fh)
    out_json = os.path.join(args.out, "pseudo_labels.json")
    with open(out_json, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"exported {len(dets)} annotations -> {out_json}")
    return 0


def _cmd_eval(args) -> int:
    tasks = [t.strip() for t in args.task.split(",") if t.strip()]
    dets, pred_masks, pred_shapes = coco_io.read_detections(args.predictions)
    gts, gt_masks, gt_shapes = coco_io.read_ground_truth(args.gt)
    report = {
        "config": {
            "predictions": args.predictions,
            "ground_truth": args.gt,
            "tasks": tasks,
            "recall_k": args.recall_k,
        },
        "metrics": {},
    }
    for task in tasks:
        if task == "ap50":
            report["metrics"]["ap50"] = metrics.ap50(dets, gts)
        elif task == "odap":
            per, mean = metrics.odap(dets, gts)
            report["metrics"]["odap50"] = per[0.5]
            report["metrics"]["odap_50_95"] = mean
        elif task == "miou":
            report["metrics"]["miou"] = metrics.miou(pred_masks, gt_masks, gt_shapes)
        elif task == "recall":
            boxes = {}
            for det in sorted(dets, key=lambda d: -d.score):
                boxes.setdefault(det.image_id, []).append(det.bbox)
            from .ranking import detection_rate

            report["metrics"][f"recall@{args.recall_k}"] = detection_rate(
                boxes, gts, args.recall_k
            )
        else:
            print(f"unknown task {task!r}", file=sys.stderr)
            return 1
    out = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(out + "\n")
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uodkit", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn in (("rank", _cmd_rank), ("fit", _cmd_fit), ("discover", _cmd_discover)):
        p = sub.add_parser(name)
        _add_config_args(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("export")
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask-pngs", action="store_true")
    p.set_defaults(fn=_cmd_export)

    p = sub.add_parser("eval")
    p.add_argument("--predictions", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--task", default="ap50,odap,miou")
    p.add_argument("--recall-k", type=int, default=50)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except UodkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
