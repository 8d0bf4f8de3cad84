"""Config resolution: defaults, file keys, environment, explicit overrides."""
import json

import pytest

from pulselabel.config import Config, load_config
from pulselabel.errors import ConfigError


class TestDefaults:
    def test_paper_defaults(self):
        cfg = Config()
        assert cfg.window_s == 120.0
        assert cfg.period_s == 900.0
        assert cfg.fs == 20.0
        assert cfg.n_initial == 100
        assert cfg.k_regions == 10
        assert cfg.quota == 15
        assert cfg.coverage_d == 1.5
        assert cfg.p_floor == 0.1
        assert cfg.window_samples == 2400


class TestFile:
    def test_file_keys(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({
            "window_s": 60, "period_s": 600, "N_initial": 20,
            "K_regions": 4, "quota": 5, "D": 2.0, "p_floor": 0.2, "seed": 99,
        }))
        cfg = load_config(path, env={})
        assert cfg.window_s == 60.0
        assert cfg.n_initial == 20
        assert cfg.k_regions == 4
        assert cfg.coverage_d == 2.0
        assert cfg.p_floor == 0.2
        assert cfg.seed == 99

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"bogus": 1}')
        with pytest.raises(ConfigError, match="bogus"):
            load_config(path, env={})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.json", env={})

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{broken")
        with pytest.raises(ConfigError, match="JSON"):
            load_config(path, env={})


class TestEnvAndOverrides:
    def test_env_overrides_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"seed": 1, "quota": 5}')
        cfg = load_config(path, env={"PULSELABEL_SEED": "42",
                                     "PULSELABEL_STORE_RAW": "false"})
        assert cfg.seed == 42
        assert cfg.quota == 5
        assert cfg.store_raw is False

    def test_explicit_override_wins(self, tmp_path):
        cfg = load_config(None, env={"PULSELABEL_SEED": "42"}, seed=7)
        assert cfg.seed == 7

    def test_none_override_ignored(self):
        cfg = load_config(None, env={}, seed=None)
        assert cfg.seed == Config().seed

    def test_bad_boolean(self):
        with pytest.raises(ConfigError):
            load_config(None, env={"PULSELABEL_STORE_RAW": "perhaps"})

    def test_validation(self):
        with pytest.raises(ConfigError):
            load_config(None, env={"PULSELABEL_P_FLOOR": "1.5"})
        with pytest.raises(ConfigError):
            load_config(None, env={"PULSELABEL_K_REGIONS": "500"})
