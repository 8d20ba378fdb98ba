"""Region classification against the dataset-level cluster model.

Two decisions per region feature: which discovered class (softmax over
cosine similarity to foreground centroids) and whether the region is
foreground at all (softmax over all centroids, foreground probability
mass). The backend is pluggable so an externally trained classifier can
replace the centroid rule without touching the rest of the pipeline.
"""

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import DegenerateInputError
from .semantics import ClusterModel

DEFAULT_TEMPERATURE = 0.07


@dataclass
class ClassDecision:
    class_id: int
    confidence: float
    probabilities: np.ndarray  # (n_classes,), sums to 1


@runtime_checkable
class ClassifierBackend(Protocol):
    def classify(self, feature) -> ClassDecision: ...

    def classify_fg(self, feature) -> tuple: ...


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max())
    return z / z.sum()


def _unit(feature) -> np.ndarray:
    f = np.asarray(feature, dtype=np.float64)
    norm = np.linalg.norm(f)
    if norm == 0:
        raise DegenerateInputError("zero region feature")
    return f / norm


class CentroidClassifier:
    """Default backend: cosine softmax against the cluster centroids."""

    def __init__(self, model: ClusterModel, temperature: float = DEFAULT_TEMPERATURE):
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        if model.n_classes < 1:
            raise DegenerateInputError("model has no foreground centroid")
        self.model = model
        self.temperature = temperature
        norms = np.linalg.norm(model.centroids, axis=1)
        self._unit_centroids = model.centroids / norms[:, None]
        self._fg_mask = np.asarray(model.is_foreground, dtype=bool)

    def classify(self, feature) -> ClassDecision:
        f = _unit(feature)
        cos = self._unit_centroids[self._fg_mask] @ f
        probs = _softmax(cos / self.temperature)
        class_id = int(np.argmax(probs))  # ties: lowest class id
        return ClassDecision(class_id, float(probs[class_id]), probs)

    def classify_fg(self, feature) -> tuple:
        if not (~self._fg_mask).any():
            return True, 1.0
        f = _unit(feature)
        cos = self._unit_centroids @ f
        probs = _softmax(cos / self.temperature)
        p_fg = float(probs[self._fg_mask].sum())
        return p_fg >= 0.5, p_fg
