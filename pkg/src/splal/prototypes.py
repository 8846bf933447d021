"""Per-class FIFO feature queues and the derived class prototypes."""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import ConfigurationError, InputDomainError


class PrototypeBank:
    """Fixed-capacity FIFO queue of recent features per class, with cached means.

    Classes are 0-based ids in [0, num_classes). The cached mean of each
    queue is kept exact by recomputing from queue contents on every push;
    queues are small (capacity defaults to 64) so this is cheap and avoids
    incremental drift.
    """

    def __init__(self, num_classes: int, feature_dim: int, capacity: int = 64):
        if num_classes < 1 or capacity < 1:
            raise ConfigurationError("bank needs at least one class and capacity >= 1")
        self.num_classes = num_classes
        self.feature_dim = feature_dim
        self.capacity = capacity
        self._queues: list[deque[np.ndarray]] = [deque(maxlen=capacity) for _ in range(num_classes)]
        self._means: list[np.ndarray | None] = [None] * num_classes

    def push(self, class_id: int, feature: np.ndarray) -> None:
        """Append a feature to class_id's queue, evicting the oldest when full."""
        if not (0 <= class_id < self.num_classes):
            raise InputDomainError(f"class id {class_id} out of range [0, {self.num_classes})")
        feature = np.asarray(feature, dtype=np.float64)
        if feature.shape != (self.feature_dim,):
            raise InputDomainError(
                f"feature shape {feature.shape} does not match bank dimension {self.feature_dim}"
            )
        q = self._queues[class_id]
        q.append(feature.copy())
        self._means[class_id] = np.mean(np.stack(q), axis=0)

    def queue_contents(self, class_id: int) -> list[np.ndarray]:
        return [f.copy() for f in self._queues[class_id]]

    def queue_size(self, class_id: int) -> int:
        return len(self._queues[class_id])

    def is_seeded(self) -> bool:
        return all(len(q) > 0 for q in self._queues)

    def prototypes(self) -> np.ndarray:
        """Current class means as a (num_classes, feature_dim) snapshot."""
        empty = [k for k in range(self.num_classes) if not self._queues[k]]
        if empty:
            raise ConfigurationError(f"unseeded class queues: {empty}")
        return np.stack([self._means[k] for k in range(self.num_classes)])
