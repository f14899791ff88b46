import json

import pytest

from relkit.config import load_run_config, reliability_from_dict, run_config_from_dict
from relkit.density import Manual, MaxOfTraining, PercentileOfValidation
from relkit.errors import ConfigError


class TestReliabilityFromDict:
    def test_defaults(self):
        cfg = reliability_from_dict({})
        assert cfg.policy == PercentileOfValidation(98.0)
        assert (cfg.k, cfg.accuracy_threshold, cfg.decision_cutoff) == (5, 0.85, 0.5)
        assert cfg.noise.sigmas == (0.05, 0.1, 0.2)
        assert cfg.density_train.epochs == 2000

    def test_max_of_training_epochs(self):
        cfg = reliability_from_dict({"density": {"policy": {"kind": "max_of_training"}}})
        assert cfg.policy == MaxOfTraining()
        assert cfg.density_train.epochs == 10000

    def test_seed_override(self):
        cfg = reliability_from_dict({"seeds": {"density": 1, "noise": 2, "proxy": 3}}, seed_override=9)
        assert (cfg.density_train.seed, cfg.noise.seed, cfg.proxy_train.seed) == (9, 9, 9)

    @pytest.mark.parametrize("raw", [
        {"density": {"train": {"epochz": 3}}},
        {"density": {"train": {"epochs": 0}}},
        {"density": {"policy": {"kind": "median"}}},
        {"localfit": {"accuracy_threshold": 2.0}},
        {"localfit": {"sigmas": []}},
        {"localfit": {"k": 0}},
        {"localfit": {"proxy": "svm"}},
    ])
    def test_invalid(self, raw):
        with pytest.raises(ConfigError):
            reliability_from_dict(raw)


class TestRunConfig:
    def test_relative_paths(self, tmp_path):
        p = tmp_path / "run.json"
        p.write_text(json.dumps({"data": {"train": "t.csv", "validation": "v.csv"}, "output": "b.json"}))
        cfg = load_run_config(p)
        assert cfg.data.train == tmp_path / "t.csv"
        assert cfg.output == tmp_path / "b.json"

    def test_manual_policy_needs_no_validation(self):
        cfg = run_config_from_dict({"data": {"train": "t.csv"}, "density": {"policy": {"kind": "manual", "value": 0.1}}})
        assert cfg.reliability.policy == Manual(0.1)

    @pytest.mark.parametrize("raw, match", [
        ({"data": {"train": "t.csv"}}, "data.validation"),
        ({"data": {}}, "data.train"),
        ({"data": {"train": "t.csv"}, "bogus": {}}, "bogus"),
        ([], "object"),
    ])
    def test_errors(self, raw, match):
        with pytest.raises(ConfigError, match=match):
            run_config_from_dict(raw)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "none.json")
