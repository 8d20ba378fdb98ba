"""CLI: uod-extract --images DIR --out DIR --checkpoint ID"""

import argparse
import logging
import sys

from .extract import ExtractionConfig, run


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="uod-extract", description=__doc__)
    parser.add_argument("--images", required=True, help="directory of input images")
    parser.add_argument("--out", required=True, help="archive output directory")
    parser.add_argument(
        "--checkpoint",
        required=True,
        help="backbone checkpoint path, or random:<seed> for a test model",
    )
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--crop-resolution", type=int, default=224)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    config = ExtractionConfig(
        image_dir=args.images,
        out_dir=args.out,
        checkpoint=args.checkpoint,
        crop_resolution=args.crop_resolution,
        device=args.device,
        batch_size=args.batch_size,
    )
    entries = run(config)
    print(f"wrote {len(entries)} archives to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
