"""Benchmark the compiled kernels against the pure numpy/scipy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Sizes mirror real workloads: ~1200 patch nodes per 480x640 image for
k-means and labeling, a 5000-point silhouette pool, 500 proposals for
pairwise IoU.
"""

import argparse
import time

import numpy as np

from uodkit.kernels import _pure

try:
    from uodkit.kernels import _compiled
except ImportError:
    _compiled = None


def bench(fn, args, repeats):
    fn(*args)  # warm up
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument(
        "--quick", action="store_true", help="tiny inputs, smoke test only"
    )
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    n_points, n_pool, n_boxes = (120, 300, 50) if args.quick else (1200, 5000, 500)
    pts_small = rng.normal(size=(n_points, 3))
    cents = rng.normal(size=(10, 3))
    pool = rng.normal(size=(n_pool, 64))
    pool_labels = rng.integers(0, 20, size=n_pool)
    mask = rng.random((30, 40)) > 0.5
    boxes = rng.uniform(0, 400, size=(n_boxes, 4))
    boxes[:, 2:] = boxes[:, :2] + rng.uniform(5, 100, size=(n_boxes, 2))

    cases = [
        (f"nearest_centroid ({n_points}x3, k=10)", "nearest_centroid", (pts_small, cents)),
        (
            f"cluster_distance_sums ({n_pool}x64, k=20)",
            "cluster_distance_sums",
            (pool, pool_labels, 20),
        ),
        ("label_components_4 (30x40)", "label_components_4", (mask,)),
        (f"pairwise_iou ({n_boxes} boxes)", "pairwise_iou", (boxes,)),
    ]

    print(f"{'kernel':44s} {'python':>12s} {'compiled':>12s} {'speedup':>9s}")
    for label, name, call_args in cases:
        t_py = bench(getattr(_pure, name), call_args, args.repeats)
        if _compiled is None:
            print(f"{label:44s} {t_py * 1e3:10.3f}ms {'n/a':>12s} {'n/a':>9s}")
            continue
        t_c = bench(getattr(_compiled, name), call_args, args.repeats)
        print(
            f"{label:44s} {t_py * 1e3:10.3f}ms {t_c * 1e3:10.3f}ms "
            f"{t_py / t_c:8.2f}x"
        )


if __name__ == "__main__":
    main()
