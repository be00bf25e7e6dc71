import json

import pytest

from near_perfect.settings import DEFAULT_CONFIG, create_config_file, load_config


def test_defaults_without_file():
    config = load_config(None)
    assert config == DEFAULT_CONFIG
    config["ga"]["population_size"] = 2
    assert DEFAULT_CONFIG["ga"]["population_size"] == 32


def test_missing_file_falls_back(tmp_path, caplog):
    assert load_config(tmp_path / "absent.json") == DEFAULT_CONFIG
    assert "not found" in caplog.text


def test_file_overrides_and_unknown_keys(tmp_path, caplog):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "ga": {"population_size": 16, "colour": "blue"},
        "fitness": {"alpha": 0.8},
        "extra": {},
    }))
    config = load_config(path)
    assert config["ga"]["population_size"] == 16
    assert config["ga"]["elite_size"] == 4
    assert config["fitness"] == {"lambda": 0.5, "alpha": 0.8}
    assert "ga.colour" in caplog.text
    assert "extra" in caplog.text


@pytest.mark.parametrize("content", ["{not json", "[1, 2]", '{"ga": 3}'])
def test_invalid_files(tmp_path, content):
    path = tmp_path / "config.json"
    path.write_text(content)
    with pytest.raises(ValueError):
        load_config(path)


def test_create_config_file(tmp_path):
    path = tmp_path / "config.json"
    create_config_file(path)
    assert json.loads(path.read_text()) == DEFAULT_CONFIG
    assert load_config(path) == DEFAULT_CONFIG


@pytest.mark.parametrize("section, values", [
    ("ga", {"population_size": "32"}),
    ("ga", {"workers": True}),
    ("fitness", {"alpha": "0.5"}),
    ("experiment", {"sizes": [1000, "2000"]}),
    ("experiment", {"fill_factors": 0.5}),
])
def test_wrongly_typed_values(tmp_path, section, values):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({section: values}))
    key = next(iter(values))
    with pytest.raises(ValueError, match=f"{section}.{key}"):
        load_config(path)


def test_numbers_accept_integers_and_lists_accept_null(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "fitness": {"lambda": 1},
        "experiment": {"trials": 3, "sizes": [100, 1000], "fill_factors": None},
    }))
    config = load_config(path)
    assert config["fitness"]["lambda"] == 1
    assert config["experiment"]["sizes"] == [100, 1000]
