"""Scenario parsing: defaults, validation messages, round trips."""

import json

import pytest

from backhaul.config import (
    AttackSpec,
    ConfigError,
    LinkSpec,
    load_scenario,
    parse_scenario,
    scenario_to_dict,
)

MINIMAL = {
    "protocol": {"theta_claimed_bps": 250e6, "n": 10},
    "topology": {"backhaul_rate_bps": 250e6},
}


def minimal(**over):
    obj = json.loads(json.dumps(MINIMAL))
    for key, patch in over.items():
        if isinstance(patch, dict) and isinstance(obj.get(key), dict):
            obj[key].update(patch)
        else:
            obj[key] = patch
    return obj


class TestDefaults:
    def test_minimal_scenario(self):
        cfg = parse_scenario(MINIMAL)
        assert cfg.protocol.n == 10
        assert cfg.protocol.f == 0
        assert cfg.protocol.rate_policy == "per_n_minus_f"
        assert cfg.protocol.duration_ns == 100_000_000
        assert cfg.topology.uplink == LinkSpec()
        assert cfg.topology.side_channel_delay_ns == 100_000
        assert cfg.attack == AttackSpec()
        assert cfg.ladder is None
        assert cfg.name == ""

    def test_theta0_uplink_sentinel(self):
        cfg = parse_scenario(
            minimal(topology={"uplink": {"rate_bps": "theta0"}})
        )
        assert cfg.topology.uplink.rate_bps == "theta0"

    def test_null_side_channel(self):
        cfg = parse_scenario(minimal(topology={"side_channel_delay_ns": None}))
        assert cfg.topology.side_channel_delay_ns is None

    def test_auto_overhead(self):
        cfg = parse_scenario(minimal(topology={"response_overhead_ns": "auto"}))
        assert cfg.topology.response_overhead_ns == "auto"


class TestRejections:
    def assert_path(self, obj, fragment):
        with pytest.raises(ConfigError, match=fragment):
            parse_scenario(obj)

    def test_unknown_top_level_key(self):
        self.assert_path(minimal(extra=1), r"scenario: unknown field\(s\): extra")

    def test_unknown_protocol_key(self):
        self.assert_path(
            minimal(protocol={"theta": 1}), r"scenario\.protocol: unknown"
        )

    def test_missing_required(self):
        self.assert_path(
            {"protocol": {"n": 3}, "topology": {"backhaul_rate_bps": 1e6}},
            r"protocol\.theta_claimed_bps: required",
        )

    def test_bool_is_not_a_number(self):
        self.assert_path(
            minimal(protocol={"theta_claimed_bps": True}),
            r"theta_claimed_bps: expected a number",
        )

    def test_bad_rate_policy(self):
        self.assert_path(
            minimal(protocol={"rate_policy": "per_f"}), r"rate_policy"
        )

    def test_uplinks_length_must_match_n(self):
        self.assert_path(
            minimal(topology={"uplinks": [{}, {}]}), r"uplinks: 2 entries for n=10"
        )

    def test_propagation_range_ordering(self):
        self.assert_path(
            minimal(topology={"uplink_propagation_range_ns": [5, 2]}),
            r"hi < lo",
        )

    def test_cross_flow_empty_interval(self):
        self.assert_path(
            minimal(
                topology={
                    "cross_flows": [{"start_ns": 5, "end_ns": 5, "rate_bps": 1e6}]
                }
            ),
            r"cross_flows\[0\]\.end_ns",
        )

    def test_attack_id_out_of_range(self):
        self.assert_path(
            minimal(attack={"challengers": {"11": {"name": "rush"}}}),
            r"challengers\.11: id outside 1\.\.10",
        )

    def test_unknown_strategy(self):
        self.assert_path(
            minimal(attack={"challengers": {"3": {"name": "teleport"}}}),
            r"unknown strategy 'teleport'",
        )

    def test_strategy_needs_its_parameter(self):
        self.assert_path(
            minimal(attack={"challengers": {"3": {"name": "delay"}}}),
            r"delay needs a positive delay_ns",
        )
        self.assert_path(
            minimal(
                attack={
                    "challengers": {
                        "3": {"name": "withhold_fraction", "fraction": 0.0}
                    }
                }
            ),
            r"0 < fraction <= 1",
        )

    def test_ladder_bounds(self):
        self.assert_path(
            minimal(
                ladder={"theta_start_bps": 9e6, "step_bps": 1e6, "max_bps": 2e6}
            ),
            r"ladder\.max_bps",
        )

    def test_invalid_json_file(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{nope")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_scenario(str(p))


class TestRoundTrip:
    def full_scenario(self):
        return parse_scenario(
            {
                "name": "round-trip",
                "protocol": {
                    "theta_claimed_bps": 500e6,
                    "n": 8,
                    "f": 2,
                    "duration_ns": 50_000_000,
                    "rate_policy": "per_n",
                    "timer_mode": True,
                },
                "topology": {
                    "backhaul_rate_bps": 500e6,
                    "queue_capacity_bytes": 64_000,
                    "uplink": {"rate_bps": "theta0", "propagation_ns": 3_000_000},
                    "uplink_propagation_range_ns": None,
                    "clock_offset_range_ns": 2_000_000,
                    "response_overhead_ns": "auto",
                    "cross_flows": [
                        {
                            "start_ns": 0,
                            "end_ns": 10_000_000,
                            "rate_bps": 30e6,
                            "yield_fraction": 0.5,
                        }
                    ],
                },
                "attack": {
                    "challengers": {
                        "2": {"name": "delay", "delay_ns": 5_000_000},
                        "7": {"name": "withhold_all"},
                    },
                    "prover": {"name": "colluding_early"},
                },
                "ladder": {
                    "theta_start_bps": 40e6,
                    "step_bps": 20e6,
                    "max_bps": 250e6,
                },
            }
        )

    def test_dict_form_parses_back_identically(self):
        cfg = self.full_scenario()
        again = parse_scenario(scenario_to_dict(cfg))
        assert again == cfg

    def test_dict_form_is_json_serializable(self):
        blob = json.dumps(scenario_to_dict(self.full_scenario()), indent=2)
        assert parse_scenario(json.loads(blob)) == self.full_scenario()

    def test_load_scenario_from_file(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text(json.dumps(scenario_to_dict(self.full_scenario())))
        assert load_scenario(str(p)) == self.full_scenario()

    def test_minimal_round_trip_keeps_defaults_implicit(self):
        cfg = parse_scenario(MINIMAL)
        d = scenario_to_dict(cfg)
        assert "attack" not in d
        assert "ladder" not in d
        assert "f" not in d["protocol"]
        assert parse_scenario(d) == cfg
