"""The compiled kernels and the NumPy fallback must agree bit for bit."""
import numpy as np
import pytest

from aoisched import _backend, _fallback, lp_core
from aoisched.cmdp import build_reduced_lp, extract_policy, solve_decoupled
from aoisched.dual import NetworkSpec
from aoisched.sim import GreedyPowerAware, RoundRobin, SimConfig, Truncated, run

from conftest import reference_sensor

pytestmark = pytest.mark.skipif(_backend.compiled is None, reason="compiled kernels not built")


def test_fallback_is_importable():
    assert _backend.get("python") is _fallback
    with pytest.raises(ValueError):
        _backend.get("fortran")


@pytest.mark.parametrize("rho", [0.2, 0.7, 1.5])
@pytest.mark.parametrize("W", [0.0, 4.0, 12.0])
def test_lp_parity(rho, W):
    lp = build_reduced_lp(reference_sensor(rho), W, 32)
    a = lp_core.solve(lp, backend="python")
    b = lp_core.solve(lp, backend="compiled")
    assert a.status is b.status
    assert a.iterations == b.iterations
    np.testing.assert_array_equal(a.values, b.values)


def _network():
    sensors = [reference_sensor(r, N=6, M=2) for r in (0.2, 0.5, 0.8, 1.1, 1.4, 1.7)]
    return NetworkSpec(sensors, 2)


@pytest.mark.parametrize("kind", ["truncated", "greedy", "round_robin"])
def test_simulation_parity(kind):
    net = _network()
    if kind == "truncated":
        policy = Truncated([extract_policy(solve_decoupled(s, 3.0)) for s in net.sensors])
    elif kind == "greedy":
        policy = GreedyPowerAware()
    else:
        policy = RoundRobin()
    # horizon spans several kernel chunks
    a = run(SimConfig(net, 20_000, 9, policy, warmup=500, backend="python"))
    b = run(SimConfig(net, 20_000, 9, policy, warmup=500, backend="compiled"))
    np.testing.assert_array_equal(a.per_sensor_avg_aoi, b.per_sensor_avg_aoi)
    np.testing.assert_array_equal(a.per_sensor_avg_power, b.per_sensor_avg_power)
    np.testing.assert_array_equal(a.per_sensor_activation, b.per_sensor_activation)
    assert a.max_scheduled_per_slot == b.max_scheduled_per_slot
