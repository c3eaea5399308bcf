import sys

import numpy as np
import pytest

from aoisched import _backend
from aoisched.channel import ChannelModel, reference_channel, steady_state
from aoisched.cmdp import SensorSpec

BACKENDS = ["python"] + (["compiled"] if _backend.compiled is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def channel():
    return reference_channel()


def rr_power(channel, N, M):
    return M / N * float(steady_state(channel) @ channel.power)


def reference_sensor(rho, N=5, M=1, power=None):
    ch = reference_channel(power)
    return SensorSpec(ch, rho * rr_power(ch, N, M))


def random_channel(rng, Q):
    """Random ergodic channel with a positive diagonal and increasing power."""
    P = rng.random((Q, Q)) + 0.05
    P /= P.sum(axis=1, keepdims=True)
    w = np.sort(rng.uniform(0.5, 4.0, Q))
    return ChannelModel(P, w)


def single_state_sensor(budget, power=1.0):
    return SensorSpec(ChannelModel([[1.0]], [power]), budget)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
