import json
import os

import pytest

from src.errors import ConfigError
from src.simulation.config import RunConfig

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config")


def test_defaults_validate():
    config = RunConfig().validate()
    assert config.model == "ou"
    assert config.engine == "mc"
    assert config.constraints == []
    assert config.tol is None
    assert str(config).startswith("Run Config:")


def test_dict_round_trip():
    config = RunConfig(model="brownian", model_params={"sigma": 2.0}, engine="pde",
                       constraints=["mean(target=1)"], n_paths=5000, tol=1e-6, theta=1.0,
                       out_dir="results/test")
    data = config.to_dict()
    assert set(data) == {"model", "engine", "simulation", "solver", "grid", "report"}
    assert data["solver"]["constraints"] == ["mean(target=1)"]
    assert RunConfig.from_dict(data).to_dict() == data


def test_missing_sections_use_defaults():
    config = RunConfig.from_dict({"engine": {"name": "pde"}})
    assert config.engine == "pde"
    assert config.n_paths == RunConfig().n_paths
    assert config.grid_n_x == 401


def test_unknown_section_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"modle": {}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict(["model"])


@pytest.mark.parametrize("overrides", [
    {"model": "heston"},
    {"engine": "quantum"},
    {"model": "fitted"},
    {"n_paths": 0},
    {"histogram_bins": 0},
    {"theta": 0.3},
    {"horizon": 0.0},
])
def test_validation_errors(overrides):
    with pytest.raises(ConfigError) as excinfo:
        RunConfig(**overrides).validate()
    assert excinfo.value.exit_code == 4


def test_save_and_load(tmp_path):
    config = RunConfig(constraints=["var(level=0.9,shift=+10%)"], seed=7)
    path = config.save(str(tmp_path / "run.json"))
    with open(path) as f:
        text = f.read()
    assert text.endswith("}\n")
    assert json.loads(text) == config.to_dict()
    assert RunConfig.from_file(path).seed == 7


def test_from_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_file(str(tmp_path / "missing.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigError):
        RunConfig.from_file(str(broken))


@pytest.mark.parametrize("name", ["example_run.json", "example_pde.json"])
def test_shipped_configs_are_valid(name):
    config = RunConfig.from_file(os.path.join(CONFIG_DIR, name)).validate()
    assert len(config.constraints) == 2
