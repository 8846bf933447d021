"""Total training objective: weighted classification plus alignment term.

The classification term is cross-entropy between each sample's label (or
soft pseudo-label) and the prediction on the original, un-augmented
input. The alignment term is cross-entropy between the prediction on a
weak view (treated as a fixed target by default) and the prediction on a
strong view of the same sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .augment import AugmentDraws, augment_pair, replay_pair
from .errors import ConfigurationError
from .model import (
    Gradients,
    ModelParams,
    backward_from_dlogits,
    ce_value_and_dlogits,
    dlogits_from_dprobs,
    forward,
)
from .numerics import LOG_EPS

LAMBDA_TOL = 1e-9


@dataclass(frozen=True)
class LossBreakdown:
    classification: float
    alignment: float
    lam1: float
    lam2: float

    @property
    def total(self) -> float:
        return self.lam1 * self.classification + self.lam2 * self.alignment


def make_views(
    grids: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, list[AugmentDraws]]:
    """Weak and strong views for a (B, H, W) stack, with replayable draws."""
    weak, strong, draws = [], [], []
    for g in grids:
        pair = augment_pair(g, rng)
        weak.append(pair.x_weak)
        strong.append(pair.x_strong)
        draws.append(pair.draws)
    return np.stack(weak), np.stack(strong), draws


def replay_views(
    grids: np.ndarray, draws: list[AugmentDraws]
) -> tuple[np.ndarray, np.ndarray]:
    pairs = [replay_pair(g, d) for g, d in zip(grids, draws)]
    return np.stack([p.x_weak for p in pairs]), np.stack([p.x_strong for p in pairs])


def total_loss(
    params: ModelParams,
    grids: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray,
    weak_grids: np.ndarray,
    strong_grids: np.ndarray,
    lam1: float,
    lam2: float,
    stop_gradient: bool = True,
    with_grads: bool = True,
) -> tuple[LossBreakdown, Gradients | None]:
    """Loss breakdown and (optionally) exact gradients for one batch.

    Views must be precomputed (see make_views) so the whole computation is
    a pure function of its arguments.
    """
    if abs(lam1 + lam2 - 1.0) > LAMBDA_TOL or lam1 < 0 or lam2 < 0:
        raise ConfigurationError(f"loss weights must be nonnegative and sum to 1, got ({lam1}, {lam2})")
    B = grids.shape[0]
    flat = grids.reshape(B, -1)
    fwd = forward(params, flat)
    cls_value, dlogits_cls = ce_value_and_dlogits(fwd, targets, weights)

    fwd_weak = forward(params, weak_grids.reshape(B, -1))
    fwd_strong = forward(params, strong_grids.reshape(B, -1))
    p_weak = fwd_weak.probabilities
    p_strong = fwd_strong.probabilities
    clipped_strong = np.clip(p_strong, LOG_EPS, 1.0)
    align_value = float(-(p_weak * np.log(clipped_strong)).sum(axis=1).mean())

    breakdown = LossBreakdown(
        classification=cls_value, alignment=align_value, lam1=lam1, lam2=lam2
    )
    if not with_grads:
        return breakdown, None

    grads = backward_from_dlogits(params, fwd, lam1 * dlogits_cls)
    dlogits_strong = lam2 * (p_strong - p_weak) / B
    grads.add_scaled(backward_from_dlogits(params, fwd_strong, dlogits_strong))
    if not stop_gradient:
        # Symmetric variant: the weak prediction is also differentiated through.
        dprobs_weak = lam2 * (-np.log(clipped_strong)) / B
        dlogits_weak = dlogits_from_dprobs(p_weak, dprobs_weak)
        grads.add_scaled(backward_from_dlogits(params, fwd_weak, dlogits_weak))
    return breakdown, grads
