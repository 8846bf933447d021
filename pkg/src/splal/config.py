"""Experiment configuration: defaults, flat key=value files, validation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigurationError
from .selector import gamma2_from_gamma1, reachability_warning

MODES = ("splal", "baseline")


@dataclass
class ExperimentConfig:
    # dataset: synthetic spec, or CSV paths overriding it
    data_csv: str | None = None
    test_csv: str | None = None
    num_classes: int = 4
    class_counts: tuple[int, ...] = (500, 200, 60, 20)
    height: int = 16
    width: int = 16
    noise_sigma: float = 0.15
    data_seed: int = 0
    test_per_class: int = 50
    labeled_ratio: float = 0.10

    # reliability gate
    gamma1: float = 0.99
    gamma2: float | None = None     # None couples it to gamma1 via |1-gamma1|/2
    temperature: float = 0.1

    # pseudo-label ensemble
    alpha1: float = 0.20
    alpha2: float = 0.10
    alpha3: float = 0.70
    knn_k: int = 25

    # loss
    lam1: float = 0.60
    lam2: float = 0.40

    # model / optimizer
    hidden_widths: tuple[int, ...] = (64, 32)
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    ema_decay: float = 0.99

    # schedule
    stages: int = 5
    epochs_warmup: int = 20
    epochs_stage: int = 10
    batch_size: int = 32
    queue_capacity: int = 64

    # run control
    seeds: tuple[int, ...] = (0,)
    mode: str = "splal"
    pseudo_weight: float = 1.0

    # behavior switches
    stop_gradient: bool = True
    soft_pseudo_labels: bool = True
    pseudo_in_queue: bool = True
    ema_for_pseudo_labeling: bool = False

    def effective_gamma2(self) -> float:
        return gamma2_from_gamma1(self.gamma1) if self.gamma2 is None else self.gamma2

    def normalized(self) -> "ExperimentConfig":
        """Apply mode semantics: baseline trains supervised only, no alignment."""
        if self.mode == "baseline":
            return replace(self, stages=0, lam1=1.0, lam2=0.0)
        return self

    def validate(self) -> list[str]:
        """Raise ConfigurationError naming the offending field; return warnings."""
        def fail(name: str, msg: str):
            raise ConfigurationError(f"{name}: {msg}")

        if self.mode not in MODES:
            fail("mode", f"must be one of {MODES}, got {self.mode!r}")
        if self.data_csv is None:
            if self.num_classes < 2:
                fail("num_classes", "need at least 2 classes")
            if len(self.class_counts) != self.num_classes:
                fail("class_counts", f"length {len(self.class_counts)} != num_classes {self.num_classes}")
            if self.height < 8 or self.width < 8:
                fail("height/width", "grids must be at least 8x8")
            if self.noise_sigma < 0:
                fail("noise_sigma", "must be nonnegative")
        if not (0 < self.labeled_ratio <= 1):
            fail("labeled_ratio", f"must lie in (0, 1], got {self.labeled_ratio}")
        if abs(self.lam1 + self.lam2 - 1.0) > 1e-9 or self.lam1 < 0 or self.lam2 < 0:
            fail("lam1/lam2", f"must be nonnegative and sum to 1, got ({self.lam1}, {self.lam2})")
        alphas = (self.alpha1, self.alpha2, self.alpha3)
        if min(alphas) < 0 or abs(sum(alphas) - 1.0) > 1e-9:
            fail("alpha1/alpha2/alpha3", f"must be nonnegative and sum to 1, got {alphas}")
        if not (0 < self.gamma1 <= 1):
            fail("gamma1", f"must lie in (0, 1], got {self.gamma1}")
        g2 = self.effective_gamma2()
        if not (0 <= g2 < self.gamma1):
            fail("gamma2", f"must lie in [0, gamma1), got {g2}")
        if self.temperature <= 0:
            fail("temperature", f"must be positive, got {self.temperature}")
        if self.knn_k < 1:
            fail("knn_k", "must be >= 1")
        if not (0 <= self.ema_decay <= 1):
            fail("ema_decay", f"must lie in [0, 1], got {self.ema_decay}")
        if self.learning_rate <= 0:
            fail("learning_rate", "must be positive")
        if self.stages < 0 or self.epochs_warmup < 0 or self.epochs_stage < 0:
            fail("stages/epochs_warmup/epochs_stage", "must be nonnegative")
        if self.batch_size < 1:
            fail("batch_size", "must be >= 1")
        if self.queue_capacity < 1:
            fail("queue_capacity", "must be >= 1")
        if not (0 < self.pseudo_weight <= 1):
            fail("pseudo_weight", f"must lie in (0, 1], got {self.pseudo_weight}")
        if not self.seeds:
            fail("seeds", "need at least one seed")

        notes = []
        msg = reachability_warning(self.num_classes, self.temperature, self.gamma1)
        if msg is not None:
            notes.append(msg)
            warnings.warn(msg, UserWarning, stacklevel=2)
        return notes


_BOOL_FIELDS = {"stop_gradient", "soft_pseudo_labels", "pseudo_in_queue", "ema_for_pseudo_labeling"}
_TUPLE_INT_FIELDS = {"class_counts", "hidden_widths", "seeds"}
_OPTIONAL_STR_FIELDS = {"data_csv", "test_csv"}


def _parse_value(name: str, raw: str, target_type):
    raw = raw.strip()
    if name in _OPTIONAL_STR_FIELDS:
        return None if raw.lower() in ("", "none") else raw
    if name == "gamma2":
        return None if raw.lower() in ("", "none", "auto") else float(raw)
    if name in _BOOL_FIELDS:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigurationError(f"{name}: expected a boolean, got {raw!r}")
    if name in _TUPLE_INT_FIELDS:
        try:
            return tuple(int(part) for part in raw.split(",") if part.strip())
        except ValueError:
            raise ConfigurationError(f"{name}: expected comma-separated integers, got {raw!r}")
    try:
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
    except ValueError:
        raise ConfigurationError(f"{name}: cannot parse {raw!r} as {target_type.__name__}")
    return raw


def load_config(path) -> ExperimentConfig:
    """Read a flat key = value file into a validated-parseable config."""
    text = Path(path).read_text()
    return parse_config(text)


def parse_config(text: str) -> ExperimentConfig:
    known = {f.name: f for f in fields(ExperimentConfig)}
    type_map = {"int": int, "float": float, "str": str}
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"config line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in known:
            raise ConfigurationError(f"config line {lineno}: unknown key {key!r}")
        base = str(known[key].type).replace("builtins.", "")
        target = type_map.get(base.split(" ")[0], str)
        values[key] = _parse_value(key, raw, target)
    return ExperimentConfig(**values)


def config_to_text(cfg: ExperimentConfig) -> str:
    """Echo a config as a flat key = value file (diffable provenance)."""
    lines = []
    for f in fields(ExperimentConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        elif value is None:
            value = "none"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
