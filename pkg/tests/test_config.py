import json

import pytest

from actiongroup.config import PipelineConfig, load_config
from actiongroup.errors import ConfigurationError


def test_defaults():
    cfg = load_config()
    doc = cfg.resolved()
    assert doc["features"]["eta"] == 0.08 and doc["solver"]["lam"] == 0.15
    assert doc["grouping"]["r"] == 0.9 and doc["dictionary_size"] == 32
    assert doc["interval_seconds"] == {"space": 1.0, "time": 2.0, "cluster": 1.0}
    assert doc["clustering"]["K"] == 7 and doc["clustering"]["C_max"] == 10
    json.dumps(doc)


def test_file_overrides_and_seed_propagation(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"grouping": {"r": 0.5}, "input": {"frames": "fr", "masks": "/abs.csv"},
                             "interval_seconds": {"time": 3}}))
    cfg = load_config(p, seed=11, threads=2, mode="change")
    assert cfg.grouping.r == 0.5 and cfg.threads == 2 and cfg.mode == "change"
    assert cfg.solver.seed == cfg.features.seed == 11
    assert cfg.interval_seconds["time"] == 3.0 and cfg.interval_seconds["space"] == 1.0
    assert cfg.input.frames == str(tmp_path / "fr") and cfg.input.masks == "/abs.csv"


@pytest.mark.parametrize("doc", [
    {"bogus": 1},
    {"solver": {"lam": -1}},
    {"solver": {"what": 1}},
    {"mode": "explode"},
    {"interval_seconds": {"space": 0}},
    {"interval_seconds": {"week": 1}},
    {"grouping": {"r": 2}},
    {"features": {"spatial_extent": 4}},
    {"seed": -1},
])
def test_invalid_configs(tmp_path, doc):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(ConfigurationError):
        load_config(p)


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "none.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "bad.json")


def test_u64_seed():
    assert PipelineConfig(seed=2**64 - 1).solver.seed == 2**64 - 1
