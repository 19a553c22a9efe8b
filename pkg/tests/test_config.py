import json

import pytest

from bdmec.config import ConfigError, config_from_dict, config_to_dict, load_config, merge
from bdmec.harness import preset_spec
from bdmec.model import ColdStart, DelayInjector, Invalid, Mode

TOML = """
name = "desk"
iterations = 2
mode = "BdMEC"

[delegator]
device_id = "d"
processing_rate = 4.0

[[workers]]
device_id = "w1"
processing_rate = 2.0
behavior = { kind = "delay", delay_s = 12.5 }

[[workers]]
device_id = "w2"
processing_rate = 3.0

[workload]
n_jobs = 50
payload_bytes = [100, 200]
compute_cost = [0.1, 0.2]
chunk = 5

[selection]
cold_start = "Strict"
"""


def test_load_toml(tmp_path):
    p = tmp_path / "s.toml"
    p.write_text(TOML)
    cfg = load_config(p)
    assert cfg.name == "desk" and cfg.iterations == 2 and cfg.mode is Mode.BDMEC
    assert cfg.workers[0].behavior == DelayInjector(12.5)
    assert cfg.selection_policy.cold_start is ColdStart.STRICT
    assert cfg.task_for(0, 0).n_jobs == 50


def test_json_matches_toml(tmp_path):
    p = tmp_path / "s.toml"
    p.write_text(TOML)
    q = tmp_path / "s.json"
    q.write_text(json.dumps(config_to_dict(load_config(p))))
    assert load_config(q) == load_config(p)


def test_round_trip_presets():
    for name in ("speed-gain", "malicious", "small-jobs"):
        d = preset_spec(name)["config"]
        assert config_to_dict(config_from_dict(d)) == d


def test_unknown_keys_rejected():
    base = preset_spec("speed-gain")["config"]
    with pytest.raises(ConfigError, match="colour"):
        config_from_dict(dict(base, colour="red"))
    bad = merge(base, {"delegator": {"speed": 3}})
    with pytest.raises(ConfigError, match="speed"):
        config_from_dict(bad)


def test_bad_behavior_kind():
    base = preset_spec("speed-gain")["config"]
    bad = merge(base, {"workers": [dict(base["workers"][0], behavior={"kind": "lazy"})]})
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_invalid_values_reported():
    base = preset_spec("speed-gain")["config"]
    bad = merge(base, {"workload": {"chunk": 0}, "iterations": 0})
    with pytest.raises(Invalid) as exc:
        config_from_dict(bad)
    fields = {f for f, _ in exc.value.problems}
    assert {"iterations", "steal_chunk_size"} <= fields


def test_merge_replaces_lists_and_behavior():
    a = {"x": {"y": 1, "z": 2}, "l": [1, 2], "behavior": {"kind": "delay", "delay_s": 1}}
    m = merge(a, {"x": {"y": 5}, "l": [9], "behavior": {"kind": "honest"}})
    assert m == {"x": {"y": 5, "z": 2}, "l": [9], "behavior": {"kind": "honest"}}
    assert a["x"]["y"] == 1


def test_bad_toml(tmp_path):
    p = tmp_path / "broken.toml"
    p.write_text("iterations = = 3")
    with pytest.raises(ConfigError):
        load_config(p)
