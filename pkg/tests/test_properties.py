"""Randomised structural checks on the single-sensor solvers and the config."""
import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from aoisched.channel import ChannelModel, steady_state
from aoisched.cmdp import (
    SensorSpec, extract_policy, policy_metrics, solve_decoupled, stationary_occupancy,
)
from aoisched.config import ExperimentConfig
from aoisched.errors import ConfigError
from aoisched.oracle import relative_value_iteration

SETTINGS = settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def channels(draw, max_states=4):
    Q = draw(st.integers(1, max_states))
    seed = draw(st.integers(0, 2**32 - 1))
    sparse = draw(st.booleans())
    rng = np.random.default_rng(seed)
    while True:
        P = rng.random((Q, Q))
        if sparse and Q > 1:
            P *= rng.random((Q, Q)) < 0.6
            P[np.arange(Q), (np.arange(Q) + 1) % Q] += 0.1  # keep a cycle through all states
        P /= P.sum(axis=1, keepdims=True)
        try:
            return ChannelModel(P, np.sort(rng.uniform(0.5, 4.0, Q)))
        except ConfigError:
            continue


@st.composite
def sensors(draw):
    ch = draw(channels())
    mean_power = float(steady_state(ch) @ ch.power)
    frac = draw(st.floats(0.08, 1.2))
    return SensorSpec(ch, frac * mean_power)


@SETTINGS
@given(sensors(), st.floats(0.0, 20.0))
def test_lp_policy_is_monotone_in_age(sensor, W):
    xi = extract_policy(solve_decoupled(sensor, W)).xi
    assert np.all(np.diff(xi, axis=0) >= -1e-9)


@SETTINGS
@given(sensors(), st.floats(0.0, 20.0))
def test_recovered_policy_reproduces_occupancy(sensor, W):
    occ = solve_decoupled(sensor, W)
    rebuilt = stationary_occupancy(sensor.channel, extract_policy(occ))
    mask = occ.mu > 1e-6
    np.testing.assert_allclose(rebuilt.mu[mask], occ.mu[mask], atol=1e-6)
    m = policy_metrics(occ, sensor, W)
    assert m.avg_power <= sensor.power_budget + 1e-7


@SETTINGS
@given(channels(), st.floats(0.0, 20.0), st.floats(0.0, 5.0))
def test_value_iteration_is_threshold(channel, W, lam):
    vf = relative_value_iteration(channel, W, lam, 24)
    assert np.all(np.diff(vf.policy.astype(int), axis=0) >= 0)
    assert np.all(np.diff(vf.values, axis=0) >= -1e-6)


budgets = st.lists(st.floats(0.01, 5.0, allow_nan=False), min_size=2, max_size=6)


@settings(max_examples=100, deadline=None)
@given(
    st.one_of(budgets.map(lambda b: {"budgets": b}),
              st.tuples(st.floats(0.05, 2.0), st.floats(0.05, 2.0))
              .map(lambda r: {"rho_min": r[0], "rho_max": r[1]})),
    st.integers(2, 6),
    st.lists(st.integers(0, 2**31), min_size=1, max_size=4),
    st.integers(1, 10**6),
)
def test_config_round_trip(sensors_field, N, seeds, T):
    if "budgets" in sensors_field:
        N = len(sensors_field["budgets"])
    data = {"sensors": sensors_field, "N": N, "M": 1, "seeds": seeds, "T": T}
    cfg = ExperimentConfig.from_dict(data)
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg
    assert again.to_dict() == cfg.to_dict()


def test_config_equality_sees_channel():
    a = ExperimentConfig.from_dict({"sensors": [1.0, 1.0], "M": 1})
    b = ExperimentConfig.from_dict(
        {"sensors": [1.0, 1.0], "M": 1, "channel": {"transition": [[1.0]], "power": [1.0]}}
    )
    assert a != b
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"sensors": [], "M": 1})
