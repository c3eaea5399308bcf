"""Slotted-time Monte-Carlo simulation of the sensor network.

Each slot: candidate decisions are drawn from the active policy, the hard
bandwidth rule picks at most ``M`` of them, transmitting sensors pay
``omega(q)`` and restart at AoI 1 in the next slot, everyone else ages by
one, and every channel takes one Markov step.

Random streams are spawned from one seed: one channel stream and one
policy stream per sensor plus a shared truncation stream. Channel paths
therefore do not depend on the policy being simulated.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from ._fallback import GREEDY, ROUND_ROBIN, TRUNCATED
from .channel import steady_state
from .cmdp import StationaryPolicy
from .dual import NetworkSpec
from .errors import ConfigError

CHUNK = 8192
DEFAULT_WARMUP = 1000


@dataclass(frozen=True)
class Truncated:
    """Relaxed per-sensor policies made bandwidth-feasible by random truncation."""

    policies: tuple

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        for p in self.policies:
            if not isinstance(p, StationaryPolicy):
                raise ConfigError(f"expected StationaryPolicy, got {type(p).__name__}")
            if p.x_max < 2:
                raise ConfigError("policy x_max must be >= 2")

    name = "truncated"


@dataclass(frozen=True)
class GreedyPowerAware:
    """Largest AoI first among sensors whose cumulative spend is within budget."""

    name = "greedy"


@dataclass(frozen=True)
class RoundRobin:
    """``M`` consecutive sensors per slot in index order; ignores power."""

    name = "round_robin"


@dataclass(frozen=True)
class SimConfig:
    network: NetworkSpec
    horizon: int
    seed: int
    policy: object
    warmup: int = DEFAULT_WARMUP  # slots simulated before measurement starts
    trace_every: int = 0  # keep every k-th measured slot's network AoI; 0 = off
    backend: str | None = None

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigError(f"horizon must be a positive integer, got {self.horizon}")
        if self.warmup < 0 or self.trace_every < 0:
            raise ConfigError("warmup and trace_every must be >= 0")
        if not isinstance(self.policy, (Truncated, GreedyPowerAware, RoundRobin)):
            raise ConfigError(f"unknown policy {self.policy!r}")
        if isinstance(self.policy, Truncated) and len(self.policy.policies) != self.network.num_sensors:
            raise ConfigError(
                f"{len(self.policy.policies)} policies for {self.network.num_sensors} sensors"
            )
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 bits")


@dataclass
class SimulationResult:
    network_avg_aoi: float
    per_sensor_avg_aoi: np.ndarray
    per_sensor_avg_power: np.ndarray
    per_sensor_activation: np.ndarray
    max_scheduled_per_slot: int
    per_slot_aoi_trace: np.ndarray | None = None
    horizon: int = 0
    seed: int = 0
    policy: str = ""
    extra: dict = field(default_factory=dict)


def truncate_decisions(candidates, M: int, rng: np.random.Generator) -> list:
    """At most ``M`` of ``candidates``; a uniform ``M``-subset when oversubscribed.

    Partial Fisher-Yates driven by ``M`` uniforms, the same draw the
    simulation kernels make each slot.
    """
    cand = list(candidates)
    k = len(cand)
    if k <= M:
        return cand
    u = rng.random(M)
    for i in range(M):
        pick = min(i + int(np.floor(u[i] * (k - i))), k - 1)
        cand[i], cand[pick] = cand[pick], cand[i]
    return cand[:M]


def _pack(network: NetworkSpec, policy):
    sensors = network.sensors
    N = len(sensors)
    Qmax = max(s.channel.num_states for s in sensors)
    cum = np.ones((N, Qmax, Qmax))
    omega = np.zeros((N, Qmax))
    budget = np.array([s.power_budget for s in sensors], dtype=float)
    for n, s in enumerate(sensors):
        Q = s.channel.num_states
        cum[n, :Q, :Q] = s.channel.cumulative
        omega[n, :Q] = s.channel.power
    if isinstance(policy, Truncated):
        X = max(p.x_max for p in policy.policies)
        xi = np.ones((N, X, Qmax))
        xcap = np.empty(N, dtype=np.int64)
        for n, p in enumerate(policy.policies):
            if p.xi.shape[1] != sensors[n].channel.num_states:
                raise ConfigError(f"policy {n} has {p.xi.shape[1]} channel states")
            xi[n, :p.x_max, :p.xi.shape[1]] = p.xi
            xcap[n] = p.x_max
    else:
        xi = np.ones((N, 1, Qmax))
        xcap = np.ones(N, dtype=np.int64)
    return cum, omega, np.ascontiguousarray(xi), xcap, budget


def run(config: SimConfig) -> SimulationResult:
    """Simulate ``warmup + horizon`` slots from ``x = 1`` and average over the last ``horizon``."""
    net, pol = config.network, config.policy
    N, M = net.num_sensors, net.bandwidth
    K = _backend.get(config.backend)
    code = {Truncated: TRUNCATED, GreedyPowerAware: GREEDY, RoundRobin: ROUND_ROBIN}[type(pol)]
    cum, omega, xi, xcap, budget = _pack(net, pol)

    seeds = np.random.SeedSequence(int(config.seed)).spawn(2 * N + 1)
    ch_rng = [np.random.default_rng(s) for s in seeds[:N]]
    pol_rng = [np.random.default_rng(s) for s in seeds[N:2 * N]]
    tr_rng = np.random.default_rng(seeds[2 * N])

    # initial channel states from the stationary law
    q = np.empty(N, dtype=np.int64)
    for n, s in enumerate(net.sensors):
        eta_cum = np.cumsum(steady_state(s.channel))
        q[n] = min(int(np.searchsorted(eta_cum, ch_rng[n].random(), side="right")), s.channel.num_states - 1)
    x = np.ones(N, dtype=np.int64)
    spent = np.zeros(N)
    aoi_sum = np.zeros(N, dtype=np.int64)
    power_sum = np.zeros(N)
    act = np.zeros(N, dtype=np.int64)
    cand = np.zeros(N, dtype=np.int64)

    total = int(config.warmup) + int(config.horizon)
    trace = [] if config.trace_every else None
    max_sched = 0
    t0 = 0
    while t0 < total:
        L = min(CHUNK, total - t0)
        u_ch = np.stack([r.random(L) for r in ch_rng])
        if code == TRUNCATED:
            u_pol = np.stack([r.random(L) for r in pol_rng])
            u_tr = tr_rng.random((L, M))
        else:
            u_pol = np.zeros((N, L))
            u_tr = np.zeros((L, M))
        slot_aoi = np.zeros(L, dtype=np.int64)
        ms = K.simulate_chunk(
            code, M, t0, int(config.warmup), cum, omega, xi, xcap, budget,
            u_ch, u_pol, u_tr, x, q, spent, aoi_sum, power_sum, act, slot_aoi, cand,
        )
        max_sched = max(max_sched, int(ms))
        if trace is not None:
            t = np.arange(t0, t0 + L)
            keep = (t >= config.warmup) & ((t - config.warmup) % config.trace_every == 0)
            trace.append(slot_aoi[keep] / N)
        t0 += L

    T = float(config.horizon)
    per_aoi = aoi_sum / T
    return SimulationResult(
        network_avg_aoi=float(per_aoi.mean()),
        per_sensor_avg_aoi=per_aoi,
        per_sensor_avg_power=power_sum / T,
        per_sensor_activation=act / T,
        max_scheduled_per_slot=max_sched,
        per_slot_aoi_trace=np.concatenate(trace) if trace is not None else None,
        horizon=int(config.horizon),
        seed=int(config.seed),
        policy=pol.name,
    )


def run_greedy(config: SimConfig) -> SimulationResult:
    """:func:`run` for a config whose policy is :class:`GreedyPowerAware`."""
    if not isinstance(config.policy, GreedyPowerAware):
        raise ConfigError("run_greedy needs a GreedyPowerAware policy")
    return run(config)
