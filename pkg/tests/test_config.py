import json

import pytest

from picnn.config import (
    ConfigError, ExperimentConfig, Stage1Config, Stage2Config, config_from_dict,
    config_hash, config_to_dict, load_config, read_genome, save_config,
    write_genome,
)
from picnn.losses import LossGenome, vanilla_genome


def minimal():
    return {
        "problem": "heat_annulus",
        "seed": 3,
        "out_dir": "run",
    }


class TestFromDict:
    def test_defaults_fill_in(self):
        cfg = config_from_dict(minimal())
        assert cfg.space == "cnn_stack"
        assert cfg.stage1 == Stage1Config()
        assert cfg.stage2 == Stage2Config()
        assert cfg.metric == "relative_l2"

    def test_sections_built_from_dicts(self):
        data = minimal()
        data["stage1"] = {"budget": 2, "families": ["central2", "central4"]}
        data["stage2"] = {"strategy": "darts", "budget": 5}
        cfg = config_from_dict(data)
        assert cfg.stage1.budget == 2
        # lists from JSON come back as tuples
        assert cfg.stage1.families == ("central2", "central4")
        assert cfg.stage2.strategy == "darts"

    def test_round_trip(self):
        data = minimal()
        data["stage1"] = {"budget": 2, "n_seed": 1}
        cfg = config_from_dict(data)
        assert config_from_dict(config_to_dict(cfg)) == cfg

    @pytest.mark.parametrize("patch", [
        {"problem": "wave_equation"},
        {"space": "resnet"},
        {"metric": "rmse"},
        {"seed": "zero"},
        {"bogus_key": 1},
        {"stage1": {"budget": 0}},
        {"stage1": {"bogus": 1}},
        {"stage2": {"strategy": "evolution"}},
        {"train": {"metric": "rmse"}},
        {"train": {"epochs": -1}},
    ])
    def test_rejects(self, patch):
        data = {**minimal(), **patch}
        with pytest.raises(ConfigError):
            config_from_dict(data)

    def test_root_must_be_object(self):
        with pytest.raises(ConfigError):
            config_from_dict(["not", "a", "dict"])
        with pytest.raises(ConfigError):
            config_from_dict({"stage1": [1, 2]})


class TestFiles:
    def test_load_save_round_trip(self, tmp_path):
        cfg = config_from_dict({**minimal(), "stage2": {"strategy": "enas"}})
        path = tmp_path / "cfg.json"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")

    def test_load_bad_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{broken")
        with pytest.raises(ConfigError):
            load_config(path)


class TestHash:
    def test_equal_configs_equal_hash(self):
        a = config_from_dict(minimal())
        b = config_from_dict(minimal())
        assert config_hash(a) == config_hash(b)
        assert len(config_hash(a)) == 64

    def test_any_knob_changes_hash(self):
        base = config_from_dict(minimal())
        for patch in ({"seed": 4}, {"metric": "mae"},
                      {"stage1": {"budget": 9}}):
            other = config_from_dict({**minimal(), **patch})
            assert config_hash(other) != config_hash(base)


class TestGenomeFiles:
    def test_round_trip(self, tmp_path):
        g = LossGenome(constraint="hard", unary="abs", weight_op="normalize",
                       eta1=20.0)
        path = tmp_path / "g.json"
        write_genome(g, path)
        assert read_genome(path) == g

    def test_vanilla_round_trip(self, tmp_path):
        path = tmp_path / "g.json"
        write_genome(vanilla_genome(), path)
        assert read_genome(path) == vanilla_genome()

    def test_rejects_unknown_field(self, tmp_path):
        path = tmp_path / "g.json"
        path.write_text(json.dumps({"flavor": "spicy"}))
        with pytest.raises(ConfigError):
            read_genome(path)

    def test_rejects_bad_value(self, tmp_path):
        path = tmp_path / "g.json"
        path.write_text(json.dumps({"constraint": "wishful"}))
        with pytest.raises(ConfigError):
            read_genome(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            read_genome(tmp_path / "absent.json")


class TestValidate:
    def test_validate_returns_self(self):
        cfg = ExperimentConfig()
        assert cfg.validate() is cfg

    def test_negative_panel_rejected(self):
        data = {**minimal(), "stage1": {"panel": -1}}
        with pytest.raises(ConfigError):
            config_from_dict(data)
