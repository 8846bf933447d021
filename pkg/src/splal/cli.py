"""Command-line front door: data generation, training, evaluation, ablations.

Exit codes: 0 success, 1 usage/config error, 2 runtime/data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, config_to_text, load_config
from .data import (
    SyntheticSpec,
    balanced_test_spec,
    generate,
    load_csv,
    save_csv,
    write_manifest,
)
from .errors import ConfigurationError, SplalError
from .model import load_checkpoint
from .orchestrator import evaluate_params, run, write_run_dir

USAGE_EXIT = 1
RUNTIME_EXIT = 2

LAMBDA2_GRID = (0.0, 0.10, 0.25, 0.40, 0.50, 0.60)
GAMMA1_GRID = (0.90, 0.95, 0.99, 0.995)
ALPHA_GRID = (
    (0.35, 0.35, 0.30),
    (0.35, 0.15, 0.50),
    (0.25, 0.25, 0.50),
    (0.15, 0.35, 0.50),
    (0.20, 0.10, 0.70),
    (0.15, 0.15, 0.70),
    (0.10, 0.20, 0.70),
)
COMBO_GRID = ("similarity+knn+linear", "similarity+linear", "similarity+knn")
LABEL_RATIO_GRID = (0.05, 0.10, 0.20, 0.30)
SWEEPS = ("lambda2", "gamma1", "alpha", "classifier-combo", "label-ratio")

METRIC_KEYS = (
    "accuracy", "macro_f1", "macro_auc", "macro_precision",
    "macro_recall", "macro_specificity",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _spec_from_file(path) -> SyntheticSpec:
    values: dict = {}
    casts = {
        "num_classes": int, "height": int, "width": int, "seed": int,
        "noise_sigma": float,
        "class_counts": lambda raw: tuple(int(p) for p in raw.split(",") if p.strip()),
    }
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"spec line {lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in casts:
            raise ConfigurationError(f"spec line {lineno}: unknown key {key!r}")
        try:
            values[key] = casts[key](raw.strip())
        except ValueError as exc:
            raise ConfigurationError(f"spec line {lineno}: {exc}")
    return SyntheticSpec(**values)


def cmd_generate_data(args) -> int:
    spec = _spec_from_file(args.spec) if args.spec else SyntheticSpec()
    samples = generate(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(samples, out, spec.height, spec.width, spec.num_classes)
    write_manifest(out.with_suffix(out.suffix + ".manifest.json"), spec, out)
    if args.test_out:
        test_spec = balanced_test_spec(spec, per_class=args.test_per_class)
        test_samples = generate(test_spec)
        test_out = Path(args.test_out)
        save_csv(test_samples, test_out, spec.height, spec.width, spec.num_classes)
        write_manifest(test_out.with_suffix(test_out.suffix + ".manifest.json"), test_spec, test_out)
    print(f"wrote {len(samples)} samples to {out}")
    return 0


def _aggregate_rows(per_seed: dict[int, dict]) -> list[tuple[str, float, float]]:
    rows = []
    for key in METRIC_KEYS:
        values = np.array([m[key] for m in per_seed.values()])
        rows.append((key, float(values.mean()), float(values.std(ddof=0))))
    return rows


def run_training(cfg: ExperimentConfig, out_dir) -> dict[int, dict]:
    """One run per seed, each in its own subdirectory, plus an aggregate CSV."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(config_to_text(cfg))
    per_seed: dict[int, dict] = {}
    for seed in cfg.seeds:
        result = run(cfg, seed, collect_audits=True)
        seed_dir = out / f"seed_{seed}"
        write_run_dir(seed_dir, cfg, seed, result)
        save_csv(
            result.test_samples, seed_dir / "test.csv",
            result.test_samples[0].grid.shape[0],
            result.test_samples[0].grid.shape[1],
            cfg.num_classes,
        )
        per_seed[seed] = result.metrics
    with (out / "aggregate.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "mean", "sd"])
        for name, mean, sd in _aggregate_rows(per_seed):
            writer.writerow([name, repr(mean), repr(sd)])
    return per_seed


def cmd_train(args) -> int:
    cfg = load_config(args.config).normalized()
    cfg.validate()
    per_seed = run_training(cfg, args.out_dir)
    for seed, m in per_seed.items():
        print(f"seed {seed}: accuracy={m['accuracy']:.4f} macro_f1={m['macro_f1']:.4f} "
              f"macro_auc={m['macro_auc']:.4f}")
    return 0


def cmd_evaluate(args) -> int:
    live, ema, meta = load_checkpoint(args.checkpoint)
    samples, h, w, k = load_csv(args.data)
    if h * w != ema.input_dim:
        raise ConfigurationError(
            f"data: grid size {h}x{w} does not match checkpoint input width {ema.input_dim}"
        )
    if k != ema.num_classes:
        raise ConfigurationError(
            f"data: {k} classes do not match checkpoint classifier width {ema.num_classes}"
        )
    if any(s.true_label is None for s in samples):
        raise ConfigurationError("data: evaluation set must be fully labeled")
    metrics = evaluate_params(ema, samples, k)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    roc = metrics.pop("roc")
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    with (out / "confusion.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        for row in metrics["confusion"]:
            writer.writerow(row)
    for key, points in roc.items():
        with (out / f"roc_class{key}.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["threshold", "fpr", "tpr"])
            for threshold, fpr, tpr in points:
                writer.writerow([repr(threshold), repr(fpr), repr(tpr)])
    print(f"accuracy={metrics['accuracy']:.4f} macro_f1={metrics['macro_f1']:.4f} "
          f"macro_auc={metrics['macro_auc']:.4f}")
    return 0


def sweep_configs(cfg: ExperimentConfig, sweep: str) -> list[tuple[str, ExperimentConfig]]:
    """Named grid of config variants for one ablation axis."""
    if sweep == "lambda2":
        return [(str(v), replace(cfg, lam1=1.0 - v, lam2=v)) for v in LAMBDA2_GRID]
    if sweep == "gamma1":
        return [(str(v), replace(cfg, gamma1=v, gamma2=None)) for v in GAMMA1_GRID]
    if sweep == "alpha":
        return [
            (f"{a1}/{a2}/{a3}", replace(cfg, alpha1=a1, alpha2=a2, alpha3=a3))
            for a1, a2, a3 in ALPHA_GRID
        ]
    if sweep == "classifier-combo":
        out = []
        for combo in COMBO_GRID:
            a1, a2, a3 = cfg.alpha1, cfg.alpha2, cfg.alpha3
            if combo == "similarity+linear":
                a1, a2, a3 = a1 / (a1 + a3), 0.0, a3 / (a1 + a3)
            elif combo == "similarity+knn":
                a1, a2, a3 = 0.0, a2 / (a2 + a3), a3 / (a2 + a3)
            out.append((combo, replace(cfg, alpha1=a1, alpha2=a2, alpha3=a3)))
        return out
    if sweep == "label-ratio":
        return [(str(v), replace(cfg, labeled_ratio=v)) for v in LABEL_RATIO_GRID]
    raise ConfigurationError(f"unknown sweep {sweep!r}; expected one of {SWEEPS}")


def run_sweep(cfg: ExperimentConfig, sweep: str, out_csv) -> list[dict]:
    """Long-form rows (sweep value, seed, metrics) across the whole grid."""
    rows = []
    for value, variant in sweep_configs(cfg, sweep):
        variant = variant.normalized()
        variant.validate()
        for seed in variant.seeds:
            result = run(variant, seed)
            m = result.metrics
            minority = int(np.argmin(cfg.class_counts))
            row = {"sweep": sweep, "value": value, "seed": seed}
            row.update({key: m[key] for key in METRIC_KEYS})
            row["minority_recall"] = m["per_class"][minority]["recall"]
            rows.append(row)
    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with out_csv.open("w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["sweep", "value", "seed", *METRIC_KEYS, "minority_recall"]
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return rows


def cmd_ablate(args) -> int:
    cfg = load_config(args.config)
    if args.sweep not in SWEEPS:
        raise ConfigurationError(f"unknown sweep {args.sweep!r}; expected one of {SWEEPS}")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_sweep(cfg, args.sweep, out / f"{args.sweep}.csv")
    print(f"wrote {len(rows)} rows to {out / (args.sweep + '.csv')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="splal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate-data", help="write a synthetic dataset CSV + manifest")
    gen.add_argument("--spec", help="flat key=value synthetic spec file (default: built-in benchmark)")
    gen.add_argument("--out", required=True, help="output CSV path")
    gen.add_argument("--test-out", help="also write a balanced held-out test CSV here")
    gen.add_argument("--test-per-class", type=int, default=50)

    train = sub.add_parser("train", help="run training per the config, one run per seed")
    train.add_argument("--config", required=True)
    train.add_argument("--out-dir", required=True)

    ev = sub.add_parser("evaluate", help="metrics from an EMA checkpoint on a labeled CSV")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--out-dir", required=True)

    ab = sub.add_parser("ablate", help="run one ablation sweep, emit a long-form CSV")
    ab.add_argument("--config", required=True)
    ab.add_argument("--sweep", required=True, choices=SWEEPS)
    ab.add_argument("--out-dir", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "generate-data": cmd_generate_data,
        "train": cmd_train,
        "evaluate": cmd_evaluate,
        "ablate": cmd_ablate,
    }
    try:
        return handlers[args.command](args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (SplalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
