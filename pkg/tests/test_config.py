from dataclasses import replace

import pytest

from deaiml.config import config_from_mapping, config_to_toml, load_config
from deaiml.errors import ConfigError
from deaiml.synth import quick_config, synthetic_panel


@pytest.fixture(scope="module")
def cfg():
    return quick_config("panel.csv", synthetic_panel(50, seed=0))


def test_toml_roundtrip(tmp_path, cfg):
    path = tmp_path / "c.toml"
    path.write_text(config_to_toml(cfg, data_path="panel.csv"))
    back = load_config(path)
    assert back.data_path == str(tmp_path / "panel.csv")
    assert replace(back, data_path=cfg.data_path) == cfg
    assert back.config_hash() == cfg.config_hash()


def test_hash_ignores_jobs_and_out_but_not_seed(cfg):
    assert cfg.with_overrides(jobs=4, out="elsewhere").config_hash() == cfg.config_hash()
    assert cfg.with_overrides(seed=1).config_hash() != cfg.config_hash()
    assert cfg.with_overrides(reps=800).bootstrap_reps == 800


def _raw(**over):
    raw = {"data": {"path": "p.csv", "id": "id", "group": "g", "inputs": ["x"], "outputs": ["y"],
                    "covariates": ["c"]},
           "groups": {"a": "A", "b": "B"},
           "frontiers": {"main": {"inputs": ["x"], "outputs": ["y"]}}}
    for k, v in over.items():
        raw[k] = v
    return raw


def test_minimal_mapping_uses_defaults():
    cfg = config_from_mapping(_raw())
    assert cfg.bootstrap_reps == 2000 and cfg.sd_reps == 1000 and cfg.alpha_grid[0] == 100.0
    assert len(cfg.gbt_configs()) == 144
    g = config_from_mapping(_raw(outliers={"start": 100, "stop": 90, "step": 1}))
    assert g.alpha_grid == tuple(float(a) for a in range(100, 89, -1))


@pytest.mark.parametrize("over", [
    {"bootstrap": {"reps": 10}},
    {"bootstrap": {"level": 1.5}},
    {"bootstrap": {"ci_method": "bca"}},
    {"sdtest": {"reps": 50}},
    {"groups": {"a": "A", "b": "A"}},
    {"groups": {"a": "A"}},
    {"frontiers": {"main": {"inputs": ["nope"], "outputs": ["y"]}}},
    {"frontiers": {"main": {"inputs": ["x"], "outputs": ["y"], "rts": "NIRS"}}},
    {"frontiers": {"main": {"inputs": ["x"]}}},
    {"outliers": {"alpha_grid": [100, 99]}},
    {"gbt": {"max_depth": [0]}},
    {"gbt": {"bogus": [1]}},
    {"logit": {"penalties": ["l3"]}},
    {"logit": {"C": [0]}},
    {"explain": {"k_folds": 1}},
    {"seed": -1},
    {"surprise": 1},
])
def test_invalid_settings_raise(over):
    with pytest.raises(ConfigError):
        config_from_mapping(_raw(**over))


def test_missing_sections_and_bad_files(tmp_path):
    raw = _raw()
    del raw["groups"]
    with pytest.raises(ConfigError):
        config_from_mapping(raw)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = = 1")
    with pytest.raises(ConfigError):
        load_config(bad)
