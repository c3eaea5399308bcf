import numpy as np
import pytest

from aoisched import cmdp, lp_core
from aoisched.cmdp import (
    SensorSpec, build_lp, build_reduced_lp, extract_policy, occupancy_from_solution,
    policy_metrics, solve_decoupled, solve_decoupled_ranged, stationary_occupancy,
)
from aoisched.errors import InfeasiblePower, InvalidTruncation

from conftest import reference_sensor, random_channel, single_state_sensor


def enumerated_aoi(activation):
    """Best average AoI at a given activation for a single-state channel.

    Deterministic period-k schedules give AoI (k+1)/2 at activation 1/k;
    randomised schedules reach the chords between neighbouring periods.
    """
    if activation >= 1:
        return 1.0
    k = int(np.floor(1.0 / activation))
    a_hi, a_lo = 1.0 / k, 1.0 / (k + 1)
    w = (activation - a_lo) / (a_hi - a_lo)
    return w * (k + 1) / 2 + (1 - w) * (k + 2) / 2


def test_ample_budget_transmits_every_slot(backend):
    occ = solve_decoupled(single_state_sensor(1.0), 0.0, backend=backend)
    m = policy_metrics(occ, single_state_sensor(1.0))
    assert m.avg_aoi == pytest.approx(1.0, abs=1e-12)


def test_half_budget_alternates(backend):
    s = single_state_sensor(0.5)
    occ = solve_decoupled(s, 0.0, backend=backend)
    assert policy_metrics(occ, s).avg_aoi == pytest.approx(1.5, abs=1e-12)
    np.testing.assert_allclose(occ.mu[:2, 0], [0.5, 0.5], atol=1e-12)
    assert occ.y[1, 0] == pytest.approx(0.5, abs=1e-12)
    xi = extract_policy(occ).xi[:, 0]
    assert xi[0] == pytest.approx(0.0, abs=1e-12)
    assert np.all(xi[1:] == 1.0)


def test_zero_budget_is_infeasible():
    with pytest.raises(InfeasiblePower):
        solve_decoupled(single_state_sensor(0.0))


def test_zero_budget_lp_is_infeasible():
    lp = build_reduced_lp(single_state_sensor(0.0), 0.0, 16)
    assert lp_core.solve(lp).status is lp_core.LpStatus.INFEASIBLE


@pytest.mark.parametrize("budget", [1.0, 0.8, 0.5, 0.37, 0.25, 0.1, 0.05])
def test_single_state_matches_enumeration(budget):
    occ = solve_decoupled(single_state_sensor(budget), 0.0)
    assert policy_metrics(occ, single_state_sensor(budget)).avg_aoi == pytest.approx(
        enumerated_aoi(budget), abs=1e-9
    )


@pytest.mark.parametrize("rho", [0.2, 0.6, 1.0, 1.6])
@pytest.mark.parametrize("W", [0.0, 1.5, 10.0])
def test_full_and_reduced_lp_agree(rho, W):
    s = reference_sensor(rho)
    full = lp_core.solve(build_lp(s, W, 48))
    red = lp_core.solve(build_reduced_lp(s, W, 48))
    assert full.optimal and red.optimal
    assert full.objective_value == pytest.approx(red.objective_value, abs=1e-10)
    occ = occupancy_from_solution(full.values, 48, 4)
    m = policy_metrics(occ, s, W)
    assert m.g_value == pytest.approx(full.objective_value, abs=1e-9)


@pytest.mark.parametrize("rho", [0.1, 0.3, 0.7, 1.2])
def test_occupancy_consistency(rho):
    s = reference_sensor(rho)
    occ = solve_decoupled(s, 2.0)
    rebuilt = stationary_occupancy(s.channel, extract_policy(occ))
    mask = occ.mu > 1e-6
    np.testing.assert_allclose(rebuilt.mu[mask], occ.mu[mask], atol=1e-6)


@pytest.mark.parametrize("rho", [0.1, 0.5, 1.0])
def test_budget_respected(rho):
    s = reference_sensor(rho)
    m = policy_metrics(solve_decoupled(s, 0.0), s)
    assert m.avg_power <= s.power_budget + 1e-9


def test_policy_monotone_in_age():
    s = reference_sensor(0.4)
    xi = extract_policy(solve_decoupled(s, 3.0)).xi
    assert np.all(np.diff(xi, axis=0) >= -1e-9)


def test_tight_budget_grows_truncation():
    s = reference_sensor(0.02)
    occ = solve_decoupled(s, 0.0, x_max=8)
    assert occ.x_max > 8
    assert occ.mu[-1].sum() <= cmdp.BOUNDARY_MASS_TOL


def test_activation_cap_binds():
    s = reference_sensor(5.0)
    occ = solve_decoupled(s, 0.0, activation_cap=0.25)
    assert occ.y.sum() <= 0.25 + 1e-9
    # equal activation for all ages: the best is a period-4 schedule
    assert policy_metrics(occ, s).avg_aoi == pytest.approx(2.5, abs=1e-9)


def test_ranged_interval_contains_W():
    s = reference_sensor(0.8)
    occ, (lo, hi) = solve_decoupled_ranged(s, 4.0)
    assert lo <= 4.0 <= hi
    mid = 0.5 * (lo + min(hi, lo + 10))
    other = solve_decoupled(s, mid)
    expected = policy_metrics(other, s, mid).g_value
    assert policy_metrics(occ, s, mid).g_value == pytest.approx(expected, abs=1e-8)


def test_argument_checks():
    s = reference_sensor(1.0)
    with pytest.raises(InvalidTruncation):
        build_lp(s, 0.0, 1)
    with pytest.raises(ValueError):
        build_reduced_lp(s, -1.0, 8)
    with pytest.raises(ValueError):
        SensorSpec(s.channel, -0.5)


def test_occupancy_mix_pads():
    a = solve_decoupled(reference_sensor(0.5), 0.0, x_max=32)
    b = solve_decoupled(reference_sensor(0.05), 0.0, x_max=64)
    m = a.mix(b, 0.25)
    assert m.x_max == max(a.x_max, b.x_max)
    assert m.mu.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_random_channels_consistent(seed):
    rng = np.random.default_rng(seed)
    ch = random_channel(rng, int(rng.integers(1, 5)))
    cheapest = float(ch.power.min())
    s = SensorSpec(ch, cheapest * rng.uniform(0.2, 1.5))
    occ = solve_decoupled(s, float(rng.uniform(0, 5)))
    assert occ.mu.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(occ.y <= occ.mu + 1e-12)
    rebuilt = stationary_occupancy(ch, extract_policy(occ))
    mask = occ.mu > 1e-6
    np.testing.assert_allclose(rebuilt.mu[mask], occ.mu[mask], atol=1e-6)
