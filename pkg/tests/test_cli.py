import json

import pytest

from splal.cli import (
    ALPHA_GRID,
    LAMBDA2_GRID,
    SWEEPS,
    build_parser,
    main,
    sweep_configs,
)
from splal.config import ExperimentConfig, config_to_text
from splal.data import file_sha256, load_csv

from test_orchestrator import tiny_config


def write_config(tmp_path, **overrides):
    cfg = tiny_config(seeds=(0,), stages=1, epochs_warmup=2, epochs_stage=1, **overrides)
    path = tmp_path / "exp.cfg"
    path.write_text(config_to_text(cfg))
    return path, cfg


SPEC_TEXT = """
num_classes = 4
class_counts = 8,6,5,4
height = 8
width = 8
noise_sigma = 0.1
seed = 3
"""


class TestGenerateData:
    def test_writes_csv_and_manifest(self, tmp_path):
        spec = tmp_path / "spec.txt"
        spec.write_text(SPEC_TEXT)
        out = tmp_path / "data.csv"
        test_out = tmp_path / "test.csv"
        code = main([
            "generate-data", "--spec", str(spec), "--out", str(out),
            "--test-out", str(test_out), "--test-per-class", "3",
        ])
        assert code == 0
        samples, h, w, k = load_csv(out)
        assert (h, w, k) == (8, 8, 4)
        assert len(samples) == 23
        test_samples, *_ = load_csv(test_out)
        assert len(test_samples) == 12
        manifest = json.loads((tmp_path / "data.csv.manifest.json").read_text())
        assert manifest["class_counts"] == [8, 6, 5, 4]
        assert manifest["csv_sha256"] == file_sha256(out)

    def test_deterministic_output(self, tmp_path):
        spec = tmp_path / "spec.txt"
        spec.write_text(SPEC_TEXT)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["generate-data", "--spec", str(spec), "--out", str(a)]) == 0
        assert main(["generate-data", "--spec", str(spec), "--out", str(b)]) == 0
        assert file_sha256(a) == file_sha256(b)

    def test_bad_spec_key_exits_one(self, tmp_path):
        spec = tmp_path / "spec.txt"
        spec.write_text("bogus = 1\n")
        code = main(["generate-data", "--spec", str(spec), "--out", str(tmp_path / "x.csv")])
        assert code == 1


class TestTrain:
    def test_artifacts_and_exit_code(self, tmp_path, capsys):
        cfg_path, cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["train", "--config", str(cfg_path), "--out-dir", str(out)]) == 0
        assert (out / "config.txt").exists()
        assert (out / "aggregate.csv").exists()
        seed_dir = out / "seed_0"
        for name in ("metrics.json", "checkpoint.npz", "test.csv",
                     "loss_log.csv", "selector_audit.csv", "pseudo_audit.csv"):
            assert (seed_dir / name).exists(), name
        agg = (out / "aggregate.csv").read_text().strip().splitlines()
        assert agg[0] == "metric,mean,sd"
        assert len(agg) == 7
        assert "accuracy=" in capsys.readouterr().out

    def test_missing_config_exits_two(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "nope.cfg"),
                     "--out-dir", str(tmp_path / "o")]) == 2

    def test_invalid_config_value_exits_one(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("gamma1 = 2.0\n")
        assert main(["train", "--config", str(path), "--out-dir", str(tmp_path / "o")]) == 1


class TestEvaluate:
    def test_matches_training_metrics(self, tmp_path):
        cfg_path, cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["train", "--config", str(cfg_path), "--out-dir", str(out)]) == 0
        seed_dir = out / "seed_0"
        eval_dir = tmp_path / "eval"
        code = main([
            "evaluate", "--checkpoint", str(seed_dir / "checkpoint.npz"),
            "--data", str(seed_dir / "test.csv"), "--out-dir", str(eval_dir),
        ])
        assert code == 0
        trained = json.loads((seed_dir / "metrics.json").read_text())
        evaluated = json.loads((eval_dir / "metrics.json").read_text())
        assert evaluated["accuracy"] == trained["accuracy"]
        assert evaluated["confusion"] == trained["confusion"]
        assert (eval_dir / "confusion.csv").exists()

    def test_shape_mismatch_exits_one(self, tmp_path):
        cfg_path, cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["train", "--config", str(cfg_path), "--out-dir", str(out)]) == 0
        bad = tmp_path / "bad.csv"
        bad.write_text(
            "# H=4 W=4 K=4\n"
            + ",".join(["id", "label"] + [f"p{i}" for i in range(16)]) + "\n"
            + "0,0," + ",".join(["0.5"] * 16) + "\n"
        )
        code = main([
            "evaluate", "--checkpoint", str(out / "seed_0" / "checkpoint.npz"),
            "--data", str(bad), "--out-dir", str(tmp_path / "e"),
        ])
        assert code == 1

    def test_missing_checkpoint_exits_two(self, tmp_path):
        code = main([
            "evaluate", "--checkpoint", str(tmp_path / "nope.npz"),
            "--data", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path / "e"),
        ])
        assert code == 2


class TestSweepConfigs:
    def test_lambda2_grid_sums_to_one(self):
        cfg = ExperimentConfig()
        variants = sweep_configs(cfg, "lambda2")
        assert len(variants) == len(LAMBDA2_GRID)
        for value, v in variants:
            assert v.lam1 + v.lam2 == pytest.approx(1.0, abs=1e-12)
            assert v.lam2 == float(value)

    def test_alpha_grid_on_simplex(self):
        cfg = ExperimentConfig()
        variants = sweep_configs(cfg, "alpha")
        assert len(variants) == len(ALPHA_GRID)
        for _, v in variants:
            assert v.alpha1 + v.alpha2 + v.alpha3 == pytest.approx(1.0, abs=1e-9)

    def test_combo_renormalization(self):
        cfg = ExperimentConfig()
        variants = dict(sweep_configs(cfg, "classifier-combo"))
        no_knn = variants["similarity+linear"]
        assert no_knn.alpha2 == 0.0
        assert no_knn.alpha1 + no_knn.alpha3 == pytest.approx(1.0, abs=1e-12)
        no_linear = variants["similarity+knn"]
        assert no_linear.alpha1 == 0.0
        assert no_linear.alpha2 + no_linear.alpha3 == pytest.approx(1.0, abs=1e-12)
        full = variants["similarity+knn+linear"]
        assert (full.alpha1, full.alpha2, full.alpha3) == (0.20, 0.10, 0.70)

    def test_every_named_sweep_builds(self):
        cfg = ExperimentConfig()
        for sweep in SWEEPS:
            assert sweep_configs(cfg, sweep)

    def test_unknown_sweep_rejected(self):
        from splal.errors import ConfigurationError

        with pytest.raises(ConfigurationError):
            sweep_configs(ExperimentConfig(), "bogus")


class TestAblate:
    def test_lambda2_sweep_csv(self, tmp_path):
        cfg_path, cfg = write_config(tmp_path)
        out = tmp_path / "ablate"
        code = main(["ablate", "--config", str(cfg_path), "--sweep", "lambda2",
                     "--out-dir", str(out)])
        assert code == 0
        lines = (out / "lambda2.csv").read_text().strip().splitlines()
        header = lines[0].split(",")
        assert header[:3] == ["sweep", "value", "seed"]
        assert "macro_f1" in header
        assert "minority_recall" in header
        assert len(lines) == 1 + len(LAMBDA2_GRID) * len(cfg.seeds)
        values = {line.split(",")[1] for line in lines[1:]}
        assert values == {str(v) for v in LAMBDA2_GRID}
        for line in lines[1:]:
            fields = dict(zip(header, line.split(",")))
            assert 0.0 <= float(fields["macro_f1"]) <= 1.0
            assert 0.0 <= float(fields["minority_recall"]) <= 1.0


class TestUsageErrors:
    def test_no_command_exits_one(self):
        with pytest.raises(SystemExit) as err:
            main([])
        assert err.value.code == 1

    def test_unknown_command_exits_one(self):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 1

    def test_bad_sweep_choice_exits_one(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["ablate", "--config", "x", "--sweep", "nope", "--out-dir", "y"])
        assert err.value.code == 1

    def test_parser_builds(self):
        parser = build_parser()
        args = parser.parse_args(["generate-data", "--out", "x.csv"])
        assert args.command == "generate-data"
