"""Three component classifiers and their weighted combination into pseudo-labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputDomainError
from .model import ModelParams, forward
from .numerics import cosine_similarity, one_hot
from .selector import ReliabilityVerdict

ALPHA_TOL = 1e-9


@dataclass(frozen=True)
class PseudoLabelRecord:
    sample_id: int
    stage: int
    linear: np.ndarray
    knn: np.ndarray
    similarity: np.ndarray
    combined: np.ndarray
    alphas: tuple[float, float, float]


def linear_prediction(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """The model's own softmax output for a flattened sample."""
    return forward(params, x).probabilities[0]


def knn_prediction(
    feature: np.ndarray,
    labeled_features: np.ndarray,
    labeled_labels: np.ndarray,
    labeled_ids: np.ndarray,
    k: int,
) -> np.ndarray:
    """Mean label vector of the k nearest labeled features under cosine distance.

    Distance ties break by sample id ascending. Labels may be soft vectors
    (pseudo-labeled neighbors contribute their stored distributions).
    """
    n = len(labeled_ids)
    if k < 1:
        raise ConfigurationError(f"neighbor count must be >= 1, got {k}")
    if n < k:
        raise ConfigurationError(f"need at least {k} labeled samples, have {n}")
    feature = np.asarray(feature, dtype=np.float64)
    qnorm = np.linalg.norm(feature)

    def distance(f: np.ndarray) -> float:
        # a dead (all-zero) feature on either side has no direction; score
        # the pair as orthogonal instead of failing
        if qnorm == 0.0 or np.linalg.norm(f) == 0.0:
            return 1.0
        return 1.0 - cosine_similarity(f, feature)

    dists = np.array([distance(f) for f in labeled_features])
    order = np.lexsort((labeled_ids, dists))
    nearest = order[:k]
    return labeled_labels[nearest].mean(axis=0)


def similarity_prediction(verdict: ReliabilityVerdict) -> np.ndarray:
    """One-hot at the winning class of a reliable verdict."""
    if not verdict.reliable or verdict.winning_class is None:
        raise InputDomainError("similarity_prediction requires a reliable verdict")
    return one_hot(verdict.winning_class, len(verdict.posterior))


def combine(
    linear: np.ndarray,
    knn: np.ndarray,
    similarity: np.ndarray,
    alphas: tuple[float, float, float],
) -> np.ndarray:
    """Elementwise convex combination of the three component predictions."""
    a1, a2, a3 = alphas
    if min(a1, a2, a3) < 0 or abs(a1 + a2 + a3 - 1.0) > ALPHA_TOL:
        raise ConfigurationError(f"alphas must be nonnegative and sum to 1, got {alphas}")
    if not (len(linear) == len(knn) == len(similarity)):
        raise InputDomainError("component prediction length mismatch")
    return a1 * np.asarray(linear) + a2 * np.asarray(knn) + a3 * np.asarray(similarity)
