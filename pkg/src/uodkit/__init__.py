"""Unsupervised multi-object discovery toolkit.

Discovers, segments, scores, and evaluates object instances in image
collections with zero supervision, working entirely from precomputed
self-supervised ViT features stored in UODF archives.
"""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
