"""Synthetic imbalanced grid datasets, labeled/unlabeled splits, CSV round-trip.

Each class renders a distinct parametric pattern that is exactly symmetric
under horizontal and vertical flips, so the weak augmentation is
label-preserving by construction. Pixel noise is added on top and values
are clipped to [0, 1].
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InputDomainError, ParseError
from .numerics import one_hot

GROUND_TRUTH = "ground-truth"
PSEUDO = "pseudo"


@dataclass
class Sample:
    """One grid with an immutable hidden truth and a mutable visible label.

    The visible label is None for unlabeled samples, a one-hot vector for
    ground-truth labels, and a soft distribution once pseudo-labeled.
    """

    sample_id: int
    grid: np.ndarray
    true_label: int | None
    visible_label: np.ndarray | None = None
    provenance: str | None = None


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int = 4
    class_counts: tuple[int, ...] = (500, 200, 60, 20)
    height: int = 16
    width: int = 16
    noise_sigma: float = 0.15
    seed: int = 0

    def validate(self) -> None:
        if self.height < 8 or self.width < 8:
            raise InputDomainError("grids must be at least 8x8")
        if len(self.class_counts) != self.num_classes:
            raise InputDomainError("class_counts length must equal num_classes")
        if any(c < 1 for c in self.class_counts):
            raise InputDomainError("every class needs at least one sample")


def _centered_coords(h: int, w: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    yy = np.arange(h, dtype=np.float64)[:, None] - (h - 1) / 2.0
    xx = np.arange(w, dtype=np.float64)[None, :] - (w - 1) / 2.0
    rr = np.sqrt(yy ** 2 + xx ** 2)
    return yy + np.zeros((h, w)), xx + np.zeros((h, w)), rr


def render_pattern(class_id: int, h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    """Noise-free pattern for one sample of a class; symmetric under both flips."""
    yy, xx, rr = _centered_coords(h, w)
    scale = min(h, w) / 16.0
    amplitude = rng.uniform(0.65, 0.95)
    kind = class_id % 4
    if kind == 0:
        # Symmetric pair of horizontal bars; offset/thickness vary per sample.
        offset = rng.uniform(5.0, 6.5) * scale
        thickness = rng.uniform(0.8, 1.4) * scale
        pattern = np.exp(-(((np.abs(yy) - offset) / thickness) ** 2))
    elif kind == 1:
        offset = rng.uniform(5.0, 6.5) * scale
        thickness = rng.uniform(0.8, 1.4) * scale
        pattern = np.exp(-(((np.abs(xx) - offset) / thickness) ** 2))
    elif kind == 2:
        sigma = rng.uniform(1.0, 2.0) * scale
        pattern = np.exp(-(rr ** 2) / (2.0 * sigma ** 2))
    else:
        # Radius range deliberately reaches down to blob-like shapes so a
        # slice of this class is genuinely ambiguous with the blob class.
        radius = rng.uniform(1.5, 4.0) * scale
        width_r = rng.uniform(0.8, 1.4) * scale
        pattern = np.exp(-((rr - radius) ** 2) / (2.0 * width_r ** 2))
    if class_id >= 4:
        # Extra classes modulate the base shape with an even cosine grating.
        freq = 2 + (class_id - 4) // 4
        grating = 0.5 * (1.0 + np.cos(2.0 * np.pi * freq * xx / w) * np.cos(2.0 * np.pi * freq * yy / h))
        pattern = pattern * grating
    return amplitude * pattern


def generate(spec: SyntheticSpec) -> list[Sample]:
    """Deterministic dataset for a spec; sample ids are 0..n-1 in class order."""
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    samples: list[Sample] = []
    sid = 0
    for k, count in enumerate(spec.class_counts):
        for _ in range(count):
            clean = render_pattern(k, spec.height, spec.width, rng)
            noisy = clean + rng.normal(0.0, spec.noise_sigma, size=clean.shape)
            grid = np.clip(noisy, 0.0, 1.0)
            samples.append(Sample(sample_id=sid, grid=grid, true_label=k))
            sid += 1
    return samples


def balanced_test_spec(spec: SyntheticSpec, per_class: int = 50, seed_offset: int = 10_000) -> SyntheticSpec:
    """Held-out evaluation spec: same patterns, balanced counts, disjoint seed."""
    return replace(
        spec,
        class_counts=tuple(per_class for _ in spec.class_counts),
        seed=spec.seed + seed_offset,
    )


def split_labeled(
    samples: list[Sample], ratio: float, seed: int
) -> tuple[list[Sample], list[Sample]]:
    """Stratified split; ceil(ratio * n_k) labeled per class, at least 1."""
    if not (0.0 < ratio <= 1.0):
        raise InputDomainError(f"labeled ratio must lie in (0, 1], got {ratio}")
    by_class: dict[int, list[Sample]] = {}
    for s in samples:
        if s.true_label is None:
            raise InputDomainError(f"sample {s.sample_id} has no label; cannot stratify")
        by_class.setdefault(s.true_label, []).append(s)
    num_classes = max(by_class) + 1
    if sorted(by_class) != list(range(num_classes)):
        missing = sorted(set(range(num_classes)) - set(by_class))
        raise InputDomainError(f"classes with zero samples: {missing}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    labeled: list[Sample] = []
    unlabeled: list[Sample] = []
    for k in range(num_classes):
        group = sorted(by_class[k], key=lambda s: s.sample_id)
        take = max(1, math.ceil(ratio * len(group)))
        order = rng.permutation(len(group))
        chosen = set(order[:take].tolist())
        for i, s in enumerate(group):
            if i in chosen:
                s.visible_label = one_hot(k, num_classes)
                s.provenance = GROUND_TRUTH
                labeled.append(s)
            else:
                s.visible_label = None
                s.provenance = None
                unlabeled.append(s)
    labeled.sort(key=lambda s: s.sample_id)
    unlabeled.sort(key=lambda s: s.sample_id)
    return labeled, unlabeled


def save_csv(samples: list[Sample], path, height: int, width: int, num_classes: int) -> None:
    """Pixel CSV with a metadata comment line; floats at 17 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# H={height} W={width} K={num_classes}\n")
        writer = csv.writer(fh)
        writer.writerow(["id", "label"] + [f"p{i}" for i in range(height * width)])
        for s in samples:
            label = -1 if s.true_label is None else s.true_label
            row = [s.sample_id, label] + [repr(float(v)) for v in s.grid.ravel()]
            writer.writerow(row)


def load_csv(path) -> tuple[list[Sample], int, int, int]:
    """Inverse of save_csv; raises ParseError with a line number on bad input."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ParseError("missing metadata comment line", line=1)
        try:
            meta = dict(part.split("=") for part in header.lstrip("# ").split())
            h, w, k = int(meta["H"]), int(meta["W"]), int(meta["K"])
        except (ValueError, KeyError) as exc:
            raise ParseError(f"bad metadata line: {exc}", line=1)
        reader = csv.reader(fh)
        try:
            columns = next(reader)
        except StopIteration:
            raise ParseError("missing column header", line=2)
        expected_cols = 2 + h * w
        if len(columns) != expected_cols:
            raise ParseError(
                f"expected {expected_cols} columns, found {len(columns)}", line=2
            )
        samples: list[Sample] = []
        for lineno, row in enumerate(reader, start=3):
            if len(row) != expected_cols:
                raise ParseError(
                    f"expected {expected_cols} fields, found {len(row)}", line=lineno
                )
            try:
                sid = int(row[0])
                label = int(row[1])
                pixels = np.array([float(v) for v in row[2:]], dtype=np.float64)
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno)
            if label < -1 or label >= k:
                raise ParseError(f"label {label} out of range for K={k}", line=lineno)
            samples.append(
                Sample(
                    sample_id=sid,
                    grid=pixels.reshape(h, w),
                    true_label=None if label == -1 else label,
                )
            )
    return samples, h, w, k


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def write_manifest(path, spec: SyntheticSpec, csv_path) -> None:
    manifest = {
        "num_classes": spec.num_classes,
        "class_counts": list(spec.class_counts),
        "height": spec.height,
        "width": spec.width,
        "noise_sigma": spec.noise_sigma,
        "seed": spec.seed,
        "csv_sha256": file_sha256(csv_path),
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
