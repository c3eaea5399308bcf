import csv
import json

import numpy as np
import pytest

from aoisched import cli
from aoisched.channel import reference_channel, steady_state
from aoisched.config import POLICIES, ExperimentConfig, load_config, rho_values, rr_power
from aoisched.errors import ConfigError


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# ")
    return lines[0], list(csv.DictReader(lines[1:]))


EIGHT_SENSORS = {"sensors": {"rho_min": 0.2, "rho_max": 1.6}, "N": 8, "M": 2, "T": 5000, "seeds": [1]}


def test_rho_rule_expansion():
    cfg = ExperimentConfig.from_dict(EIGHT_SENSORS)
    np.testing.assert_allclose(cfg.rhos(), 0.2 * np.arange(1, 9))
    ch = reference_channel()
    err = 2 / 8 * float(steady_state(ch) @ ch.power)
    assert rr_power(ch, 8, 2) == pytest.approx(err)
    np.testing.assert_allclose(cfg.power_budgets(), cfg.rhos() * err)


def test_rho_values_single_sensor():
    np.testing.assert_array_equal(rho_values(0.7, 1.2, 1), [0.7])


def test_config_defaults_and_round_trip():
    cfg = ExperimentConfig.from_dict({"sensors": [1.0, 2.0], "M": 1})
    assert cfg.N == 2 and cfg.channel == reference_channel()
    assert cfg.policies == POLICIES and cfg.seeds == (0,) and cfg.sweep is None
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("data", [
    {"sensors": [], "M": 1},
    {"sensors": [1.0, 1.0], "M": 1, "N": 3},
    {"sensors": [1.0, 1.0]},
    {"sensors": {"rho_min": 0.5}, "M": 1},
    {"sensors": [1.0, -1.0], "M": 1},
    {"sensors": [1.0, 1.0], "M": 1, "seeds": []},
    {"sensors": [1.0, 1.0], "M": 1, "policies": ["oracle"]},
    {"sensors": [1.0, 1.0], "M": 1, "bogus": 1},
    {"sensors": [1.0, 1.0], "M": 1, "T": 0},
    {"sensors": [1.0, 1.0], "M": 1.5},
    {"sensors": [1.0, 1.0], "M": 1, "sweep": {"axis": "Q", "values": [1]}},
])
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(data)


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_parse_seeds():
    assert cli.parse_seeds("3") == (3,)
    assert cli.parse_seeds("1,4,2") == (1, 4, 2)
    assert cli.parse_seeds("0-3,7") == (0, 1, 2, 3, 7)
    with pytest.raises(ConfigError):
        cli.parse_seeds("a")


def test_lower_bound_two_sensors(tmp_path, capsys):
    data = {"channel": {"transition": [[1.0]], "power": [1.0]}, "sensors": [10.0, 10.0], "M": 1}
    rc = cli.main(["lower-bound", "--config", write_config(tmp_path, data), "--out", str(tmp_path)])
    assert rc == 0
    prov, rows = read_csv(tmp_path / "lower_bound.csv")
    assert list(rows[0]) == cli.LOWER_BOUND_COLUMNS
    assert float(rows[0]["aoi_lb"]) == pytest.approx(1.5, abs=1e-6)
    assert "omega=1.0" in prov and "seeds=0" in prov and "git=" in prov


def test_lower_bound_saturated(tmp_path):
    data = {"channel": {"transition": [[1.0]], "power": [1.0]}, "sensors": [1.0, 0.5], "M": 2}
    assert cli.main(["lower-bound", "--config", write_config(tmp_path, data), "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "lower_bound.csv")
    assert float(rows[0]["aoi_lb"]) == pytest.approx((1.0 + 1.5) / 2, abs=1e-9)
    assert rows[0]["iterations"] == "0"


def test_malformed_matrix_exits_2(tmp_path, capsys):
    data = {"channel": {"transition": [[0.5, 0.4], [0.5, 0.5]]}, "sensors": [1, 1], "M": 1}
    rc = cli.main(["lower-bound", "--config", write_config(tmp_path, data), "--out", str(tmp_path)])
    assert rc == 2
    assert "NotStochastic" in capsys.readouterr().err


def test_infeasible_budget_exits_1(tmp_path, capsys):
    data = {"sensors": [0.0, 1.0, 1.0], "M": 1}
    rc = cli.main(["lower-bound", "--config", write_config(tmp_path, data), "--out", str(tmp_path)])
    assert rc == 1
    assert "InfeasiblePower" in capsys.readouterr().err


def test_missing_config_exits_2(tmp_path):
    assert cli.main(["solve", "--config", str(tmp_path / "none.json")]) == 2


def test_solve_writes_trace_and_policy(tmp_path):
    rc = cli.main(["solve", "--config", write_config(tmp_path, EIGHT_SENSORS), "--out", str(tmp_path)])
    assert rc == 0
    _, trace = read_csv(tmp_path / "w_trace.csv")
    assert list(trace[0]) == ["k", "W", "sum_activation", "g"]
    assert trace[0]["k"] == "0" and float(trace[0]["W"]) == 0.0
    _, policy = read_csv(tmp_path / "policy.csv")
    assert {int(r["sensor"]) for r in policy} == set(range(8))


def test_simulate_eight_sensor_layout(tmp_path):
    rc = cli.main(["simulate", "--config", write_config(tmp_path, EIGHT_SENSORS), "--out", str(tmp_path)])
    assert rc == 0
    _, sensors = read_csv(tmp_path / "simulate_sensors.csv")
    for p in ("truncated", "greedy", "round_robin"):
        assert sum(r["policy"] == p for r in sensors) == 8
    _, summary = read_csv(tmp_path / "simulate_summary.csv")
    assert all(int(r["max_scheduled"]) <= 2 for r in summary)


def test_simulate_is_byte_reproducible(tmp_path):
    cfg = write_config(tmp_path, EIGHT_SENSORS)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["simulate", "--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["simulate", "--config", cfg, "--out", str(b), "--threads", "3"]) == 0
    for name in ("simulate_summary.csv", "simulate_sensors.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_simulate_round_robin(tmp_path):
    data = {"sensors": [10.0] * 4, "M": 1, "T": 10000, "policies": ["round_robin"]}
    assert cli.main(["simulate", "--config", write_config(tmp_path, data), "--out", str(tmp_path)]) == 0
    _, summary = read_csv(tmp_path / "simulate_summary.csv")
    assert float(summary[0]["J"]) == 2.5


def test_overrides(tmp_path):
    data = {"sensors": [10.0] * 4, "M": 1, "policies": ["round_robin"]}
    rc = cli.main(["simulate", "--config", write_config(tmp_path, data), "--out", str(tmp_path),
                   "--seeds", "4-6", "--horizon", "400"])
    assert rc == 0
    prov, summary = read_csv(tmp_path / "simulate_summary.csv")
    assert [r["seed"] for r in summary] == ["4", "5", "6"]
    assert all(r["horizon"] == "400" for r in summary)
    assert "seeds=4,5,6" in prov


def test_sweep_rejects_saturated_M(tmp_path, capsys):
    rc = cli.main(["sweep", "--config", write_config(tmp_path, EIGHT_SENSORS), "--out", str(tmp_path),
                   "--axis", "M", "--values", "2,8"])
    assert rc == 2
    assert "M < N" in capsys.readouterr().err


def test_sweep_N_needs_rho_rule(tmp_path):
    data = {"sensors": [1.0] * 4, "M": 1, "sweep": {"axis": "N", "values": [4, 8]}}
    assert cli.main(["sweep", "--config", write_config(tmp_path, data), "--out", str(tmp_path)]) == 2


def test_sweep_rho_columns(tmp_path):
    data = {"sensors": {"rho_min": 1.0, "rho_max": 1.0}, "N": 4, "M": 1, "T": 2000,
            "sweep": {"axis": "rho", "values": [0.4, 1.6]}}
    assert cli.main(["sweep", "--config", write_config(tmp_path, data), "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "sweep_rho.csv")
    assert list(rows[0]) == cli.sweep_columns(("truncated", "greedy", "round_robin"))
    lb = [float(r["aoi_lb_identical"]) for r in rows]
    assert lb[0] > lb[1]
    assert lb[1] == pytest.approx(2.5, abs=1e-9)
    for r in rows:
        assert float(r["aoi_lb"]) == pytest.approx(float(r["aoi_lb_identical"]), abs=1e-6)


def test_sweep_N_bandwidth_ratio(tmp_path):
    data = dict(EIGHT_SENSORS, sweep={"axis": "N", "values": [10, 20], "bandwidth_ratio": 0.2},
                policies=["truncated"])
    assert cli.main(["sweep", "--config", write_config(tmp_path, data), "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "sweep_N.csv")
    assert [(r["N"], r["M"]) for r in rows] == [("10", "2"), ("20", "4")]
    assert all(float(r["J_truncated"]) >= float(r["aoi_lb"]) for r in rows)


def test_oracle_check_reference_channel(tmp_path, capsys):
    data = {"sensors": {"rho_min": 0.3, "rho_max": 1.5}, "N": 3, "M": 1,
            "oracle": {"W_grid": [0, 0.5, 1, 2, 5]}}
    rc = cli.main(["oracle-check", "--config", write_config(tmp_path, data), "--out", str(tmp_path)])
    assert rc == 0
    _, rows = read_csv(tmp_path / "oracle_check.csv")
    assert len(rows) == 15
    assert max(float(r["deviation"]) for r in rows) <= 1e-3
    assert "max deviation" in capsys.readouterr().out


def test_oracle_check_single_state_exact(tmp_path):
    data = {"channel": {"transition": [[1.0]], "power": [1.0]}, "sensors": [0.5, 0.25, 0.2], "M": 1,
            "oracle": {"W_grid": [0.0]}}
    assert cli.main(["oracle-check", "--config", write_config(tmp_path, data), "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "oracle_check.csv")
    # period-k schedules: AoI (k+1)/2 at activation 1/k
    expected = {0.5: 1.5, 0.25: 2.5, 0.2: 3.0}
    for r in rows:
        assert float(r["lp_objective"]) == pytest.approx(expected[float(r["budget"])], abs=1e-9)
        assert float(r["oracle_cost"]) == pytest.approx(expected[float(r["budget"])], abs=1e-6)


def test_oracle_check_empty_sensor_list(tmp_path):
    data = {"sensors": [], "M": 1}
    assert cli.main(["oracle-check", "--config", write_config(tmp_path, data), "--out", str(tmp_path)]) == 2
