import json

import pytest

from sdwnsim.config import config_to_dict, load_config, parse_config
from sdwnsim.errors import ConfigError


def minimal_wlan():
    return {
        "scenario_kind": "wlan",
        "region": {"width": 100.0, "height": 100.0},
        "nodes": [{"id": 0, "position": [50.0, 50.0], "channel_id": 0, "tx_power": 0.25}],
        "channel": {"pathloss_exponent": 3.5, "reference_distance": 1.0,
                    "reference_gain": 1.0, "noise_power": 1e-11, "fading": "off"},
        "deployment": {"lambda_mean": 2.0},
        "load_split": {"rho1": 0.5},
        "slices": [{"slice_id": 1, "reservation": 0.2},
                   {"slice_id": 2, "reservation": 0.2}],
    }


def test_parse_minimal():
    cfg = parse_config(minimal_wlan())
    assert cfg.scenario_kind == "wlan"
    assert cfg.replications == 50
    assert cfg.scenario_id == "wlan"
    assert len(cfg.rate_table) == 8


def test_unknown_top_level_field():
    data = minimal_wlan()
    data["lamda_mean"] = 3
    with pytest.raises(ConfigError, match="lamda_mean"):
        parse_config(data)


def test_unknown_nested_field():
    data = minimal_wlan()
    data["slices"][0]["reservattion"] = 0.5
    with pytest.raises(ConfigError, match="reservattion"):
        parse_config(data)


def test_missing_required():
    data = minimal_wlan()
    del data["region"]
    with pytest.raises(ConfigError, match="region"):
        parse_config(data)


def test_node_outside_region():
    data = minimal_wlan()
    data["nodes"][0]["position"] = [150.0, 50.0]
    with pytest.raises(ConfigError, match="outside"):
        parse_config(data)


def test_wlan_duplicate_channels_rejected():
    data = minimal_wlan()
    data["nodes"].append({"id": 1, "position": [10.0, 10.0], "channel_id": 0,
                          "tx_power": 0.25})
    with pytest.raises(ConfigError, match="distinct channels"):
        parse_config(data)


def test_total_airtime_reservation_cap():
    data = minimal_wlan()
    data["slices"][0]["reservation"] = 0.7
    data["slices"][1]["reservation"] = 0.7
    with pytest.raises(ConfigError, match="exceed 1"):
        parse_config(data)


def test_bad_policy_and_rho():
    data = minimal_wlan()
    data["policy"] = "oracle"
    with pytest.raises(ConfigError):
        parse_config(data)
    data = minimal_wlan()
    data["load_split"]["rho1"] = 1.5
    with pytest.raises(ConfigError):
        parse_config(data)


def test_validation_reports_every_violation():
    data = minimal_wlan()
    data["policy"] = "oracle"
    data["load_split"]["rho1"] = 1.5
    data["deployment"]["lambda_mean"] = -1
    with pytest.raises(ConfigError) as err:
        parse_config(data)
    message = str(err.value)
    assert "policy" in message and "rho1" in message and "lambda_mean" in message


def test_solver_option_typo():
    data = minimal_wlan()
    data["wlan_solver"] = {"max_iters": 10}
    with pytest.raises(ConfigError, match="max_iters"):
        parse_config(data)


def test_round_trip_identity(tmp_path):
    data = minimal_wlan()
    data["edge_fraction"] = 0.6
    data["master_seed"] = 99
    cfg = parse_config(data)
    path = tmp_path / "cfg.json"
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh)
    again = load_config(path)
    assert again == cfg
    # and a second serialize/parse is also stable
    assert parse_config(config_to_dict(again)) == cfg


def test_shipped_configs_parse():
    from importlib import resources
    for name in ("wlan-4ap.cfg", "cellular-4bs.cfg"):
        with resources.as_file(resources.files("sdwnsim") / "configs" / name) as path:
            cfg = load_config(path)
        assert cfg.replications == 50
        assert len(cfg.nodes) == 4
        assert len(cfg.slices) == 2
        assert parse_config(config_to_dict(cfg)) == cfg
