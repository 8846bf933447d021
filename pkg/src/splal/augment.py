"""Weak (flips) and strong (Gaussian blur) views of a sample grid.

Every random decision is recorded so a pair can be replayed exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputDomainError

BLUR_SIGMA = 1.0
FLIP_PROB = 0.5


def _gaussian_kernel_3x3(sigma: float = BLUR_SIGMA) -> np.ndarray:
    ax = np.array([-1.0, 0.0, 1.0])
    gx = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    k = np.outer(gx, gx)
    return k / k.sum()


_KERNEL = _gaussian_kernel_3x3()


@dataclass(frozen=True)
class AugmentDraws:
    """The random decisions behind one weak/strong pair."""

    flip_h: bool
    flip_v: bool


@dataclass(frozen=True)
class AugmentedPair:
    x_weak: np.ndarray
    x_strong: np.ndarray
    draws: AugmentDraws


def weak_augment(x: np.ndarray, flip_h: bool, flip_v: bool) -> np.ndarray:
    """Horizontal then vertical flip per the given draw bits."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise InputDomainError(f"weak_augment needs an HxW grid, got shape {x.shape}")
    out = x
    if flip_h:
        out = out[:, ::-1]
    if flip_v:
        out = out[::-1, :]
    return np.ascontiguousarray(out)


def strong_augment(x: np.ndarray) -> np.ndarray:
    """3x3 Gaussian blur (sigma 1.0) with reflect padding."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 3 or x.shape[1] < 3:
        raise InputDomainError(f"strong_augment needs at least a 3x3 grid, got shape {x.shape}")
    padded = np.pad(x, 1, mode="reflect")
    out = np.zeros_like(x)
    for di in range(3):
        for dj in range(3):
            out += _KERNEL[di, dj] * padded[di : di + x.shape[0], dj : dj + x.shape[1]]
    return out


def draw_augment(rng: np.random.Generator) -> AugmentDraws:
    return AugmentDraws(
        flip_h=bool(rng.random() < FLIP_PROB),
        flip_v=bool(rng.random() < FLIP_PROB),
    )


def augment_pair(x: np.ndarray, rng: np.random.Generator) -> AugmentedPair:
    """One weak and one strong view; replaying the draws reproduces the pair."""
    draws = draw_augment(rng)
    return replay_pair(x, draws)


def replay_pair(x: np.ndarray, draws: AugmentDraws) -> AugmentedPair:
    return AugmentedPair(
        x_weak=weak_augment(x, draws.flip_h, draws.flip_v),
        x_strong=strong_augment(x),
        draws=draws,
    )
