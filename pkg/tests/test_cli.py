import json
import math

import pytest

from picnn.cli import main
from picnn.networks import search_space
from picnn.tensorio import load_tensor


def write_cfg(tmp_path, **patch):
    data = {
        "problem": "heat_annulus",
        "problem_kwargs": {"n_rho": 8, "n_theta": 16},
        "seed": 5,
        "space": "cnn_stack",
        "metric": "relative_l2",
        "out_dir": str(tmp_path / "run"),
        "stage1": {"budget": 2, "epochs": 2, "n_seed": 2,
                   "constraints": ["soft"], "families": ["central2"],
                   "unaries": ["square"], "weight_ops": ["unitize"]},
        "stage2": {"strategy": "rl", "budget": 2, "epochs": 2},
        "train": {"epochs": 2, "eval_every": 1},
    }
    for key, val in patch.items():
        if isinstance(val, dict) and key != "problem_kwargs":
            data[key] = {**data[key], **val}
        else:
            data[key] = val
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    return path


class TestGenerateData:
    def test_writes_loadable_splits(self, tmp_path):
        cfg = write_cfg(tmp_path)
        assert main(["generate-data", "--config", str(cfg),
                     "--out", str(tmp_path / "data")]) == 0
        meta = json.loads((tmp_path / "data" / "meta.json").read_text())
        assert meta["problem"] == "heat_annulus"
        assert meta["splits"] == {"train": 2, "val": 2, "test": 5}
        arr = load_tensor(tmp_path / "data" / "train_inputs.ptns")
        assert arr.shape == (2, 1, 8, 16)


class TestSearchCommands:
    def test_search_loss_with_overrides(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path)
        assert main(["search-loss", "--config", str(cfg),
                     "--budget", "1", "--workers", "1"]) == 0
        assert (tmp_path / "run" / "best_genome.json").exists()
        assert (tmp_path / "run" / "stage1_trials.csv").exists()
        assert "best genome" in capsys.readouterr().out

    def test_search_arch_space_alias_and_loss_file(self, tmp_path):
        cfg = write_cfg(tmp_path, stage2={"budget": 1, "epochs": 1})
        genome = tmp_path / "genome.json"
        genome.write_text(json.dumps({"constraint": "soft"}))
        assert main(["search-arch", "--config", str(cfg),
                     "--strategy", "darts", "--space", "cell",
                     "--loss", str(genome)]) == 0
        with open(tmp_path / "run" / "best_arch.json") as fh:
            choices = json.load(fh)
        search_space("unet_cell").validate(choices)
        assert (tmp_path / "run" / "stage2_darts.csv").exists()

    def test_search_arch_bad_genome_is_config_error(self, tmp_path):
        cfg = write_cfg(tmp_path)
        genome = tmp_path / "genome.json"
        genome.write_text(json.dumps({"constraint": "wishful"}))
        assert main(["search-arch", "--config", str(cfg),
                     "--loss", str(genome)]) == 2


class TestTrainEvaluate:
    def test_train_then_evaluate_reproduces_metric(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path)
        assert main(["train", "--config", str(cfg)]) == 0
        out = tmp_path / "run"
        assert (out / "weights").is_dir()
        assert (out / "curves.csv").exists()
        summary = json.loads((out / "train_report.json").read_text())
        assert summary["status"] == "ok"
        capsys.readouterr()

        assert main(["evaluate", "--config", str(cfg),
                     "--weights", str(out / "weights"),
                     "--split", "val"]) == 0
        result = json.loads(capsys.readouterr().out)
        assert result["split"] == "val"
        assert result["value"] == pytest.approx(summary["val_metric"],
                                                rel=1e-12)

    def test_diverged_training_exits_3(self, tmp_path):
        cfg = write_cfg(tmp_path, train={"lr": float("nan")})
        assert main(["train", "--config", str(cfg)]) == 3
        summary = json.loads(
            (tmp_path / "run" / "train_report.json").read_text())
        assert summary["status"] == "diverged"

    def test_missing_weights_exits_4(self, tmp_path):
        cfg = write_cfg(tmp_path)
        assert main(["evaluate", "--config", str(cfg),
                     "--weights", str(tmp_path / "nowhere")]) == 4

    def test_bad_arch_file_is_config_error(self, tmp_path):
        cfg = write_cfg(tmp_path)
        arch = tmp_path / "arch.json"
        arch.write_text(json.dumps({"layer1": "conv99"}))
        assert main(["train", "--config", str(cfg),
                     "--arch", str(arch)]) == 2


class TestPipelineCommand:
    def test_full_run_then_report(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path)
        assert main(["pipeline", "--config", str(cfg)]) == 0
        capsys.readouterr()
        assert main(["report", "--run", str(tmp_path / "run")]) == 0
        out = capsys.readouterr().out
        assert "heat_annulus" in out
        assert "test relative_l2" in out

    def test_diverged_pipeline_exits_3(self, tmp_path):
        cfg = write_cfg(tmp_path, train={"lr": float("nan")})
        assert main(["pipeline", "--config", str(cfg)]) == 3


class TestExitCodes:
    def test_config_errors_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"problem": "wave_equation"}))
        assert main(["pipeline", "--config", str(bad)]) == 2
        assert main(["train", "--config",
                     str(tmp_path / "missing.json")]) == 2

    def test_missing_report_exits_4(self, tmp_path):
        assert main(["report", "--run", str(tmp_path / "empty")]) == 4
