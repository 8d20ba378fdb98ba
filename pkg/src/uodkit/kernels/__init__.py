"""Hot numeric kernels with a compiled core and a pure-Python fallback.

The compiled Cython extension is preferred when importable; setting
UODKIT_PURE_PYTHON=1 forces the fallback. ``BACKEND`` reports which
implementation is active ("compiled" or "python").
"""

import os

from . import _pure

if os.environ.get("UODKIT_PURE_PYTHON") == "1":
    _impl = _pure
    BACKEND = "python"
else:
    try:
        from . import _compiled as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        BACKEND = "python"

nearest_centroid = _impl.nearest_centroid
cluster_distance_sums = _impl.cluster_distance_sums
label_components_4 = _impl.label_components_4
pairwise_iou = _impl.pairwise_iou

__all__ = [
    "BACKEND",
    "nearest_centroid",
    "cluster_distance_sums",
    "label_components_4",
    "pairwise_iou",
]
