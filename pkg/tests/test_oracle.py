import numpy as np
import pytest

from aoisched import oracle
from aoisched.cmdp import SensorSpec, policy_metrics, solve_decoupled
from aoisched.errors import InfeasiblePower
from aoisched.oracle import (
    discounted_value_iteration, evaluate, relative_value_iteration, solve_cmdp_by_bisection,
)

from conftest import reference_sensor, random_channel, single_state_sensor


def test_always_schedule_single_state():
    ch = single_state_sensor(1.0).channel
    vf = relative_value_iteration(ch, 0.0, 0.0, 10)
    assert vf.avg_cost == pytest.approx(1.0, abs=1e-8)
    assert np.all(vf.policy == 1)


def test_single_state_threshold_matches_cost_tradeoff():
    # cost x + W*s: waiting until age k costs (k+1)/2 + W/k per slot
    ch = single_state_sensor(1.0).channel
    W = 6.0
    best = min((k + 1) / 2 + W / k for k in range(1, 30))
    vf = relative_value_iteration(ch, W, 0.0, 30)
    assert vf.avg_cost == pytest.approx(best, abs=1e-7)


def test_gain_matches_policy_evaluation(channel):
    vf = relative_value_iteration(channel, 2.0, 0.3, 40)
    ev = evaluate(channel, vf.policy)
    assert vf.avg_cost == pytest.approx(ev.cost(2.0) + 0.3 * ev.avg_power, abs=1e-7)


@pytest.mark.parametrize("seed", range(10))
def test_threshold_structure_and_monotone_values(seed):
    rng = np.random.default_rng(seed)
    ch = random_channel(rng, int(rng.integers(1, 5)))
    vf = relative_value_iteration(ch, float(rng.uniform(0, 8)), float(rng.uniform(0, 3)), 30)
    assert np.all(np.diff(vf.policy.astype(int), axis=0) >= 0)
    assert np.all(np.diff(vf.values, axis=0) >= -1e-7)


def test_discounted_policy_is_threshold(channel):
    vf = discounted_value_iteration(channel, 3.0, 0.5, 0.95, 40)
    assert np.all(np.diff(vf.policy.astype(int), axis=0) >= 0)
    assert np.all(np.diff(vf.values, axis=0) >= -1e-9)


def test_discounted_approaches_average_cost(channel):
    avg = relative_value_iteration(channel, 3.0, 0.5, 40)
    disc = discounted_value_iteration(channel, 3.0, 0.5, 0.999, 40)
    assert disc.avg_cost == pytest.approx(avg.avg_cost, rel=1e-2)


def test_discount_factor_checked(channel):
    with pytest.raises(ValueError):
        discounted_value_iteration(channel, 0.0, 0.0, 1.0, 10)


def test_negative_multiplier_rejected(channel):
    with pytest.raises(ValueError):
        relative_value_iteration(channel, -1.0, 0.0, 10)


@pytest.mark.parametrize("rho", [0.15, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("W", [0.0, 3.0])
def test_bisection_matches_lp(rho, W):
    s = reference_sensor(rho)
    occ = solve_decoupled(s, W, x_max=40)
    lp_cost = policy_metrics(occ, s, W).g_value
    res = solve_cmdp_by_bisection(s, W, occ.x_max)
    assert res.mixed_cost == pytest.approx(lp_cost, abs=1e-3)
    assert res.mixed_power <= s.power_budget + 1e-6


def test_bisection_infeasible():
    s = SensorSpec(single_state_sensor(1.0).channel, 1e-6)
    with pytest.raises(InfeasiblePower):
        solve_cmdp_by_bisection(s, 0.0, 10)


def test_unconstrained_budget_returns_lambda_zero(channel):
    s = SensorSpec(channel, 100.0)
    res = solve_cmdp_by_bisection(s, 1.0, 20)
    assert res.lam == 0.0 and res.rho == 1.0


def test_aperiodicity_weight_in_range():
    assert 0.0 < oracle.APERIODIC < 1.0
