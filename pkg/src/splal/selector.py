"""Reliability gate over unlabeled samples.

An unlabeled sample is reliable when the temperature softmax over its
cosine similarities to the class prototypes has exactly one entry at or
above the upper threshold while every other entry sits at or below the
lower threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputDomainError
from .numerics import cosine_similarity, softmax

DEFAULT_TEMPERATURE = 0.1


@dataclass(frozen=True)
class ReliabilityVerdict:
    similarities: np.ndarray      # raw cosine similarities to each prototype
    posterior: np.ndarray         # temperature softmax of similarities
    reliable: bool
    winning_class: int | None


def similarity_vector(prototypes: np.ndarray, feature: np.ndarray) -> np.ndarray:
    """Cosine similarity of the feature against every class prototype."""
    feature = np.asarray(feature, dtype=np.float64)
    if np.linalg.norm(feature) == 0.0:
        raise InputDomainError("zero feature vector in similarity_vector")
    # A zero-norm prototype (every queued feature dead for that class) has no
    # direction to compare against; score it as orthogonal rather than failing.
    return np.array(
        [
            0.0 if np.linalg.norm(c) == 0.0 else cosine_similarity(c, feature)
            for c in prototypes
        ]
    )


def is_reliable(posterior: np.ndarray, gamma1: float, gamma2: float) -> tuple[bool, int | None]:
    """Two-threshold criterion; returns (verdict, winning index or None)."""
    k = len(posterior)
    if not (gamma1 > 1.0 / k and gamma1 <= 1.0):
        raise ConfigurationError(f"gamma1 must lie in (1/{k}, 1], got {gamma1}")
    if not (0.0 <= gamma2 < gamma1):
        raise ConfigurationError(f"gamma2 must lie in [0, gamma1), got {gamma2}")
    above = np.flatnonzero(posterior >= gamma1)
    if len(above) != 1:
        return False, None
    j = int(above[0])
    others = np.delete(posterior, j)
    if np.all(others <= gamma2):
        return True, j
    return False, None


def evaluate_feature(
    prototypes: np.ndarray,
    feature: np.ndarray,
    gamma1: float,
    gamma2: float,
    temperature: float = DEFAULT_TEMPERATURE,
) -> ReliabilityVerdict:
    feature = np.asarray(feature, dtype=np.float64)
    if np.linalg.norm(feature) == 0.0:
        # A dead (all-zero) feature carries no similarity information; treat
        # it as maximally ambiguous rather than failing the whole pass.
        k = len(prototypes)
        v = np.full(k, 1.0 / k)
        is_reliable(v, gamma1, gamma2)  # still validate the thresholds
        return ReliabilityVerdict(
            similarities=np.zeros(k), posterior=v, reliable=False, winning_class=None
        )
    w = similarity_vector(prototypes, feature)
    v = softmax(w, temperature)
    reliable, winner = is_reliable(v, gamma1, gamma2)
    return ReliabilityVerdict(similarities=w, posterior=v, reliable=reliable, winning_class=winner)


def select_reliable(
    features_by_id: list[tuple[int, np.ndarray]],
    prototypes: np.ndarray,
    gamma1: float,
    gamma2: float,
    temperature: float = DEFAULT_TEMPERATURE,
) -> list[tuple[int, ReliabilityVerdict]]:
    """Pure filter over (sample id, feature) pairs; keeps reliable ones with verdicts."""
    out = []
    for sid, feat in features_by_id:
        verdict = evaluate_feature(prototypes, feat, gamma1, gamma2, temperature)
        if verdict.reliable:
            out.append((sid, verdict))
    return out


def gamma2_from_gamma1(gamma1: float) -> float:
    """Lower-threshold coupling used by the threshold sweep."""
    return abs(1.0 - gamma1) / 2.0


def max_attainable_posterior(num_classes: int, temperature: float) -> float:
    """Largest softmax entry reachable from cosine similarities in [-1, 1]."""
    hi = math.exp(1.0 / temperature)
    lo = math.exp(-1.0 / temperature)
    return hi / (hi + (num_classes - 1) * lo)


def reachability_warning(num_classes: int, temperature: float, gamma1: float) -> str | None:
    """A message when the gate can never fire, else None."""
    cap = max_attainable_posterior(num_classes, temperature)
    if gamma1 > cap:
        return (
            f"reliability gate unattainable: gamma1={gamma1} exceeds the maximum "
            f"achievable posterior {cap:.4f} for {num_classes} classes at "
            f"temperature {temperature}; no sample can ever be selected"
        )
    return None
