"""End-to-end training loop: warm-up, staged selection, pseudo-labeling,
set migration, re-optimization, and EMA maintenance.

Pools are conserved and disjoint at every step; a sample is pseudo-labeled
at most once and never returns to the unlabeled pool.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .config import ExperimentConfig, config_to_text
from .data import (
    GROUND_TRUTH,
    PSEUDO,
    Sample,
    SyntheticSpec,
    balanced_test_spec,
    generate,
    load_csv,
    split_labeled,
)
from .errors import ConfigurationError, TrainingError
from .loss import total_loss, make_views
from .model import (
    EmaParams,
    ModelParams,
    OptimizerState,
    adam_step,
    ema_update,
    forward,
    init_params,
    save_checkpoint,
)
from .numerics import one_hot_argmax
from .prototypes import PrototypeBank
from .pseudo import combine, knn_prediction
from .selector import evaluate_feature, select_reliable

# Named sub-streams derived from the master seed.
STREAM_INIT = 0
STREAM_SPLIT = 1
STREAM_SHUFFLE = 2
STREAM_AUGMENT = 3
STREAM_AUDIT = 4


def substream(master_seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(stream,)))


@dataclass
class DatasetState:
    """Labeled and unlabeled pools with conservation instrumentation."""

    labeled: list[Sample]
    unlabeled: list[Sample]
    stage: int = 0
    pseudo_ever: set = field(default_factory=set)

    def total(self) -> int:
        return len(self.labeled) + len(self.unlabeled)

    def check_invariants(self, expected_total: int) -> None:
        lab = {s.sample_id for s in self.labeled}
        unl = {s.sample_id for s in self.unlabeled}
        if lab & unl:
            raise TrainingError(f"pools overlap: {sorted(lab & unl)[:5]}")
        if len(lab) + len(unl) != expected_total:
            raise TrainingError(
                f"pool conservation violated: {len(lab)} + {len(unl)} != {expected_total}"
            )


@dataclass
class StageReport:
    stage: int
    num_selected: int
    pseudo_accuracy: float | None
    random_subset_accuracy: float | None
    epoch_losses: list[dict]

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "num_selected": self.num_selected,
            "pseudo_accuracy": self.pseudo_accuracy,
            "random_subset_accuracy": self.random_subset_accuracy,
            "epoch_losses": self.epoch_losses,
        }


@dataclass
class RunResult:
    live: ModelParams
    ema: EmaParams
    state: DatasetState
    stage_reports: list[StageReport]
    warmup_losses: list[dict]
    metrics: dict
    test_samples: list[Sample]
    config_warnings: list[str]
    audits: dict | None = None


def batch_features(params: ModelParams, samples: list[Sample]) -> np.ndarray:
    X = np.stack([s.grid.ravel() for s in samples])
    return forward(params, X).features


def _train_epochs(
    params: ModelParams,
    opt: OptimizerState,
    ema: EmaParams | None,
    labeled: list[Sample],
    epochs: int,
    cfg: ExperimentConfig,
    rng_shuffle: np.random.Generator,
    rng_augment: np.random.Generator,
    bank=None,
    stage: int = -1,
) -> list[dict]:
    """Train on the labeled pool; optionally keep the bank and EMA fresh."""
    logs = []
    n = len(labeled)
    for epoch in range(epochs):
        order = rng_shuffle.permutation(n)
        sums = np.zeros(3)
        num_batches = 0
        for start in range(0, n, cfg.batch_size):
            batch = [labeled[i] for i in order[start : start + cfg.batch_size]]
            grids = np.stack([s.grid for s in batch])
            targets = np.stack([s.visible_label for s in batch])
            w = np.array(
                [1.0 if s.provenance == GROUND_TRUTH else cfg.pseudo_weight for s in batch]
            )
            weak, strong, _ = make_views(grids, rng_augment)
            breakdown, grads = total_loss(
                params, grids, targets, w, weak, strong,
                cfg.lam1, cfg.lam2, stop_gradient=cfg.stop_gradient,
            )
            adam_step(params, grads, opt)
            if not params.all_finite():
                raise TrainingError("non-finite parameters after optimizer step")
            if ema is not None:
                ema_update(ema, params)
            if bank is not None:
                feats = batch_features(params, batch)
                for s, f in zip(batch, feats):
                    if s.provenance == GROUND_TRUTH or (
                        s.provenance == PSEUDO and cfg.pseudo_in_queue
                    ):
                        bank.push(int(np.argmax(s.visible_label)), f)
            sums += (breakdown.classification, breakdown.alignment, breakdown.total)
            num_batches += 1
        mean = sums / max(num_batches, 1)
        logs.append(
            {
                "stage": stage,
                "epoch": epoch,
                "classification": float(mean[0]),
                "alignment": float(mean[1]),
                "total": float(mean[2]),
            }
        )
    return logs


def warmup(
    params: ModelParams,
    opt: OptimizerState,
    labeled: list[Sample],
    cfg: ExperimentConfig,
    rng_shuffle: np.random.Generator,
    rng_augment: np.random.Generator,
    bank,
) -> tuple[EmaParams, list[dict]]:
    """Supervised warm-up, then seed the bank with one pass over the labeled pool."""
    if not labeled:
        raise ConfigurationError("warm-up requires a nonempty labeled pool")
    classes_present = {int(np.argmax(s.visible_label)) for s in labeled}
    missing = set(range(cfg.num_classes)) - classes_present
    if missing:
        raise ConfigurationError(f"unseeded class: no labeled samples for classes {sorted(missing)}")
    logs = _train_epochs(
        params, opt, None, labeled, cfg.epochs_warmup, cfg, rng_shuffle, rng_augment
    )
    feats = batch_features(params, labeled)
    for s, f in zip(labeled, feats):
        bank.push(int(np.argmax(s.visible_label)), f)
    ema = EmaParams.from_live(params, cfg.ema_decay)
    return ema, logs


def _ensemble_accuracy(
    chosen: list[tuple[int, np.ndarray]],
    by_id: dict[int, Sample],
    params: ModelParams,
    prototypes: np.ndarray,
    labeled_feats: np.ndarray,
    labeled_labels: np.ndarray,
    labeled_ids: np.ndarray,
    cfg: ExperimentConfig,
) -> tuple[float | None, list[dict]]:
    """Combined-prediction records and accuracy vs hidden truth for given samples."""
    records = []
    correct = 0
    known = 0
    k_eff = min(cfg.knn_k, len(labeled_ids))
    for sid, feat in chosen:
        sample = by_id[sid]
        verdict = evaluate_feature(
            prototypes, feat, cfg.gamma1, cfg.effective_gamma2(), cfg.temperature
        )
        linear = forward(params, sample.grid.ravel()).probabilities[0]
        knn = knn_prediction(feat, labeled_feats, labeled_labels, labeled_ids, k_eff)
        sim = one_hot_argmax(verdict.posterior)
        combined = combine(linear, knn, sim, (cfg.alpha1, cfg.alpha2, cfg.alpha3))
        predicted = int(np.argmax(combined))
        rec = {
            "sample_id": sid,
            "linear": linear,
            "knn": knn,
            "similarity": sim,
            "combined": combined,
            "predicted": predicted,
            "true_label": sample.true_label,
        }
        records.append(rec)
        if sample.true_label is not None:
            known += 1
            if predicted == sample.true_label:
                correct += 1
    accuracy = correct / known if known else None
    return accuracy, records


def run_stage(
    state: DatasetState,
    params: ModelParams,
    ema: EmaParams,
    opt: OptimizerState,
    bank,
    cfg: ExperimentConfig,
    rng_shuffle: np.random.Generator,
    rng_augment: np.random.Generator,
    rng_audit: np.random.Generator,
    audits: dict | None = None,
) -> StageReport:
    """One selection / pseudo-labeling / migration / re-optimization round."""
    expected_total = state.total()
    prototypes = bank.prototypes()
    feature_params = ema.shadow if cfg.ema_for_pseudo_labeling else params

    unlabeled = list(state.unlabeled)
    by_id = {s.sample_id: s for s in unlabeled}
    feats = batch_features(feature_params, unlabeled) if unlabeled else np.zeros((0, params.feature_dim))
    features_by_id = [(s.sample_id, f) for s, f in zip(unlabeled, feats)]

    selected = select_reliable(
        features_by_id, prototypes, cfg.gamma1, cfg.effective_gamma2(), cfg.temperature
    )
    if audits is not None:
        for (sid, feat), verdict in zip(
            features_by_id,
            (evaluate_feature(prototypes, f, cfg.gamma1, cfg.effective_gamma2(), cfg.temperature)
             for _, f in features_by_id),
        ):
            audits["selector"].append(
                {
                    "stage": state.stage,
                    "sample_id": sid,
                    "w": verdict.similarities,
                    "v": verdict.posterior,
                    "reliable": verdict.reliable,
                    "winning_class": verdict.winning_class,
                }
            )

    labeled_feats = batch_features(feature_params, state.labeled)
    labeled_labels = np.stack([s.visible_label for s in state.labeled])
    labeled_ids = np.array([s.sample_id for s in state.labeled])

    chosen_pairs = [(sid, dict(features_by_id)[sid]) for sid, _ in selected]
    pseudo_acc, records = _ensemble_accuracy(
        chosen_pairs, by_id, feature_params, prototypes,
        labeled_feats, labeled_labels, labeled_ids, cfg,
    )

    # Control arm: the same ensemble on a random equal-size unlabeled subset.
    random_acc = None
    if selected and len(unlabeled) >= len(selected):
        pick = rng_audit.choice(len(unlabeled), size=len(selected), replace=False)
        control = [(unlabeled[i].sample_id, feats[i]) for i in sorted(pick.tolist())]
        random_acc, _ = _ensemble_accuracy(
            control, by_id, feature_params, prototypes,
            labeled_feats, labeled_labels, labeled_ids, cfg,
        )

    # Migration: selected samples get a permanent pseudo-label and move pools.
    selected_ids = {sid for sid, _ in selected}
    for rec in records:
        sid = rec["sample_id"]
        if sid in state.pseudo_ever:
            raise TrainingError(f"sample {sid} pseudo-labeled twice")
        sample = by_id[sid]
        label = rec["combined"] if cfg.soft_pseudo_labels else one_hot_argmax(rec["combined"])
        sample.visible_label = np.asarray(label, dtype=np.float64)
        sample.provenance = PSEUDO
        state.pseudo_ever.add(sid)
        if audits is not None:
            audits["pseudo"].append({"stage": state.stage, **rec})
    state.labeled = state.labeled + [s for s in unlabeled if s.sample_id in selected_ids]
    state.unlabeled = [s for s in unlabeled if s.sample_id not in selected_ids]
    state.check_invariants(expected_total)

    logs = _train_epochs(
        params, opt, ema, state.labeled, cfg.epochs_stage, cfg,
        rng_shuffle, rng_augment, bank=bank, stage=state.stage,
    )
    report = StageReport(
        stage=state.stage,
        num_selected=len(selected),
        pseudo_accuracy=pseudo_acc,
        random_subset_accuracy=random_acc,
        epoch_losses=logs,
    )
    state.stage += 1
    return report


def evaluate_params(params: ModelParams, samples: list[Sample], num_classes: int) -> dict:
    """Metrics report dict for a parameter snapshot on a labeled evaluation set."""
    X = np.stack([s.grid.ravel() for s in samples])
    truths = np.array([s.true_label for s in samples], dtype=np.int64)
    probs = forward(params, X).probabilities
    predictions = probs.argmax(axis=1)
    matrix = metrics_mod.confusion(predictions, truths, num_classes)
    summ = metrics_mod.summary(matrix)
    auc = metrics_mod.auc_ovr(probs, truths)
    return {
        "accuracy": summ.accuracy,
        "macro_f1": summ.macro_f1,
        "macro_precision": summ.macro_precision,
        "macro_recall": summ.macro_recall,
        "macro_specificity": summ.macro_specificity,
        "macro_auc": auc.macro_auc,
        "per_class": summ.per_class,
        "per_class_auc": {str(k): v for k, v in auc.per_class_auc.items()},
        "auc_excluded_classes": auc.excluded_classes,
        "zero_support_classes": summ.zero_support_classes,
        "confusion": matrix.tolist(),
        "roc": {str(k): pts for k, pts in auc.roc.items()},
    }


def build_pools(cfg: ExperimentConfig, seed: int) -> tuple[list[Sample], list[Sample], list[Sample]]:
    """Materialize (labeled, unlabeled, test) pools from the config."""
    if cfg.data_csv is not None:
        samples, h, w, k = load_csv(cfg.data_csv)
        if k != cfg.num_classes:
            raise ConfigurationError(
                f"data_csv: file declares {k} classes, config says {cfg.num_classes}"
            )
        if cfg.test_csv is None:
            raise ConfigurationError("test_csv: required when data_csv is given")
        test_samples, th, tw, tk = load_csv(cfg.test_csv)
        if (th, tw, tk) != (h, w, k):
            raise ConfigurationError("test_csv: shape metadata differs from data_csv")
    else:
        spec = SyntheticSpec(
            num_classes=cfg.num_classes,
            class_counts=cfg.class_counts,
            height=cfg.height,
            width=cfg.width,
            noise_sigma=cfg.noise_sigma,
            seed=cfg.data_seed,
        )
        samples = generate(spec)
        test_samples = generate(balanced_test_spec(spec, per_class=cfg.test_per_class))
    split_rng_seed = int(substream(seed, STREAM_SPLIT).integers(0, 2**31 - 1))
    labeled, unlabeled = split_labeled(samples, cfg.labeled_ratio, split_rng_seed)
    return labeled, unlabeled, test_samples


def run(cfg: ExperimentConfig, seed: int, collect_audits: bool = False) -> RunResult:
    """Warm-up then stages until the budget is exhausted or no unlabeled remain.

    The returned metrics are computed with the EMA shadow weights.
    """
    cfg = cfg.normalized()
    notes = cfg.validate()

    labeled, unlabeled, test_samples = build_pools(cfg, seed)
    state = DatasetState(labeled=labeled, unlabeled=unlabeled)
    expected_total = state.total()

    input_dim = labeled[0].grid.size
    params = init_params(
        input_dim, cfg.hidden_widths, cfg.num_classes, substream(seed, STREAM_INIT)
    )
    opt = OptimizerState.for_params(
        params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    )
    bank = PrototypeBank(cfg.num_classes, params.feature_dim, cfg.queue_capacity)
    rng_shuffle = substream(seed, STREAM_SHUFFLE)
    rng_augment = substream(seed, STREAM_AUGMENT)
    rng_audit = substream(seed, STREAM_AUDIT)

    ema, warmup_losses = warmup(params, opt, state.labeled, cfg, rng_shuffle, rng_augment, bank)

    audits = {"selector": [], "pseudo": []} if collect_audits else None
    stage_reports: list[StageReport] = []
    while state.stage < cfg.stages and state.unlabeled:
        report = run_stage(
            state, params, ema, opt, bank, cfg,
            rng_shuffle, rng_augment, rng_audit, audits,
        )
        stage_reports.append(report)
        state.check_invariants(expected_total)

    metrics = evaluate_params(ema.shadow, test_samples, cfg.num_classes)
    metrics["config_warnings"] = notes
    result = RunResult(
        live=params,
        ema=ema,
        state=state,
        stage_reports=stage_reports,
        warmup_losses=warmup_losses,
        metrics=metrics,
        test_samples=test_samples,
        config_warnings=notes,
        audits=audits,
    )
    return result


def _metrics_for_json(metrics: dict) -> dict:
    out = dict(metrics)
    out.pop("roc", None)
    return out


def write_run_dir(out_dir, cfg: ExperimentConfig, seed: int, result: RunResult) -> None:
    """Emit the run directory: config echo, logs, audits, metrics, checkpoint, ROC."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(config_to_text(cfg))

    with (out / "loss_log.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stage", "epoch", "classification", "alignment", "total"])
        for row in result.warmup_losses:
            writer.writerow([row["stage"], row["epoch"], repr(row["classification"]),
                             repr(row["alignment"]), repr(row["total"])])
        for rep in result.stage_reports:
            for row in rep.epoch_losses:
                writer.writerow([row["stage"], row["epoch"], repr(row["classification"]),
                                 repr(row["alignment"]), repr(row["total"])])

    (out / "metrics.json").write_text(
        json.dumps(_metrics_for_json(result.metrics), indent=2, sort_keys=True) + "\n"
    )
    (out / "stage_reports.json").write_text(
        json.dumps([r.to_dict() for r in result.stage_reports], indent=2) + "\n"
    )

    with (out / "confusion.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        for row in result.metrics["confusion"]:
            writer.writerow(row)

    for key, points in result.metrics["roc"].items():
        with (out / f"roc_class{key}.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["threshold", "fpr", "tpr"])
            for threshold, fpr, tpr in points:
                writer.writerow([repr(threshold), repr(fpr), repr(tpr)])

    save_checkpoint(
        out / "checkpoint.npz", result.live, result.ema.shadow,
        {"seed": seed, "num_classes": cfg.num_classes,
         "height": cfg.height, "width": cfg.width},
    )

    audits = getattr(result, "audits", None)
    if audits is not None:
        k = cfg.num_classes
        with (out / "selector_audit.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["stage", "sample_id"]
                + [f"w{i}" for i in range(k)] + [f"v{i}" for i in range(k)]
                + ["reliable", "winning_class"]
            )
            for rec in audits["selector"]:
                writer.writerow(
                    [rec["stage"], rec["sample_id"]]
                    + [repr(float(x)) for x in rec["w"]]
                    + [repr(float(x)) for x in rec["v"]]
                    + [int(rec["reliable"]), rec["winning_class"] if rec["winning_class"] is not None else ""]
                )
        with (out / "pseudo_audit.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["stage", "sample_id"]
                + [f"linear{i}" for i in range(k)] + [f"knn{i}" for i in range(k)]
                + [f"sim{i}" for i in range(k)] + [f"combined{i}" for i in range(k)]
                + ["true_label", "correct"]
            )
            for rec in audits["pseudo"]:
                correct = "" if rec["true_label"] is None else int(rec["predicted"] == rec["true_label"])
                writer.writerow(
                    [rec["stage"], rec["sample_id"]]
                    + [repr(float(x)) for x in rec["linear"]]
                    + [repr(float(x)) for x in rec["knn"]]
                    + [repr(float(x)) for x in rec["similarity"]]
                    + [repr(float(x)) for x in rec["combined"]]
                    + [rec["true_label"] if rec["true_label"] is not None else "", correct]
                )
