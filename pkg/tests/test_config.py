"""Config schema validation and JSON round trips."""

import json

import pytest

from fabsim.config import (
    ConfigError, ExperimentConfig, config_from_dict, load_config, save_config,
)


def test_empty_object_yields_defaults():
    cfg = config_from_dict({})
    assert cfg.seed == 1
    assert cfg.topology.preset == "single_bus"
    assert cfg.workload.pattern == "uniform"
    assert cfg.devices.port_delay == 25


def test_unknown_top_level_key_names_the_path():
    with pytest.raises(ConfigError, match=r"config\.velocity"):
        config_from_dict({"velocity": 3})


def test_unknown_section_key_names_the_path():
    with pytest.raises(ConfigError, match=r"config\.workload\.patern"):
        config_from_dict({"workload": {"patern": "uniform"}})


def test_bad_victim_policy_names_the_key():
    with pytest.raises(ConfigError, match="victim_policy"):
        config_from_dict({"coherence": {"enabled": True,
                                        "victim_policy": "RANDOM"}})


@pytest.mark.parametrize("data,frag", [
    ({"routing": "magic"}, "routing"),
    ({"repeat": 0}, "repeat"),
    ({"topology": {"preset": "torus"}}, "preset"),
    ({"topology": {"n_requesters": 0}}, "n_requesters"),
    ({"topology": {"link_bandwidth": -1}}, "link_bandwidth"),
    ({"topology": {"duplex": "both"}}, "duplex"),
    ({"workload": {"pattern": "zipf"}}, "pattern"),
    ({"workload": {"read_ratio": 2.0}}, "read_ratio"),
    ({"workload": {"issue_interval": -5}}, "issue_interval"),
    ({"workload": {"queue_capacity": 0}}, "queue_capacity"),
    ({"workload": {"footprint_bytes": 8}}, "footprint_bytes"),
    ({"workload": {"pattern": "trace"}}, "trace_files"),
    ({"coherence": {"invblk_max_len": 9}}, "invblk_max_len"),
    ({"coherence": {"enabled": True, "sf_capacity": 0}}, "sf_capacity"),
])
def test_invalid_values_name_their_field(data, frag):
    with pytest.raises(ConfigError, match=frag):
        config_from_dict(data)


def test_bad_topology_build_is_wrapped():
    data = {"topology": {"links": [{"a": 0, "b": 0}]}}
    with pytest.raises(ConfigError, match=r"config\.topology"):
        config_from_dict(data)


def test_explicit_links_and_roles_build():
    data = {"topology": {
        "links": [{"a": 0, "b": 1}, {"a": 1, "b": 2}],
        "roles": {"0": "requester", "1": "switch", "2": "endpoint"},
    }}
    cfg = config_from_dict(data)
    roles, links = cfg.topology.build()
    assert roles == {0: "requester", 1: "switch", 2: "endpoint"}
    assert len(links) == 2


def test_round_trip_through_disk(tmp_path):
    cfg = config_from_dict({
        "seed": 42,
        "routing": "adaptive",
        "topology": {"preset": "ring", "n_requesters": 3, "n_endpoints": 3},
        "coherence": {"enabled": True, "victim_policy": "BLOCK",
                      "invblk_max_len": 3},
        "requester_overrides": {"2": {"issue_interval": 9}},
    })
    p = tmp_path / "cfg.json"
    save_config(cfg, p)
    again = load_config(p)
    assert again == cfg
    assert again.requester_overrides == {2: {"issue_interval": 9}}


def test_load_rejects_missing_and_invalid_files(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(bad)


def test_to_json_is_sorted_and_parseable():
    cfg = ExperimentConfig()
    data = json.loads(cfg.to_json())
    assert list(data) == sorted(data)
    assert config_from_dict(data) == cfg
