"""Config resolution: defaults < JSON file < environment < flags"""

import json
import logging

import pytest

from src.config import ConfigError, RunConfig, env_overrides, load_config_file, resolve_config


def test_defaults():
    config = RunConfig()
    assert config.tol == 1e-8
    assert config.primes == [101, 103]
    assert config.workers == 1
    assert config.output_format == "json"


def test_precedence(tmp_path):
    path = tmp_path / "henon_config.json"
    path.write_text(json.dumps({"tol": 1e-6, "workers": 2, "seed": 7}))
    config = resolve_config(str(path), flags={"seed": 11, "tol": None},
                            environ={"HENON_WORKERS": "3", "HENON_CACHE_PATH": "/tmp/h.jsonl"})
    assert config.tol == 1e-6          # file
    assert config.workers == 3         # env beats file
    assert config.cache_path == "/tmp/h.jsonl"
    assert config.seed == 11           # flag beats file


def test_missing_file_gives_defaults(tmp_path, caplog):
    with caplog.at_level(logging.INFO):
        config = resolve_config(str(tmp_path / "absent.json"), environ={})
    assert config == RunConfig()


def test_invalid_json_logs_error(tmp_path, caplog):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with caplog.at_level(logging.ERROR):
        assert load_config_file(str(path)) == {}
    assert any("not valid JSON" in r.message for r in caplog.records)


def test_unknown_keys_ignored(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"tol": 1e-5, "colour": "blue"}))
    assert load_config_file(str(path)) == {"tol": 1e-5}


@pytest.mark.parametrize("overrides, field_name", [
    ({"tol": 0}, "tol"),
    ({"primes": [101, 100]}, "primes"),
    ({"workers": 0}, "workers"),
    ({"output_format": "xml"}, "output_format"),
    ({"seed": -1}, "seed"),
])
def test_validation_names_field(overrides, field_name):
    with pytest.raises(ConfigError) as err:
        RunConfig(**overrides)
    assert err.value.field == field_name


def test_bad_env_value():
    with pytest.raises(ConfigError):
        env_overrides({"HENON_WORKERS": "many"})


def test_only_documented_env_vars():
    assert env_overrides({"HENON_TOL": "1"}) == {}
