"""Value-iteration oracle for the single-sensor problem.

Works on the same truncated state space as the LP (AoI ``1..x_max``,
scheduling forced at ``x_max``) but shares no code path with it: the
Lagrangian MDP with per-step cost ``x + (W + lam * omega(q)) * s`` is solved
by relative value iteration, and the power constraint is handled by
bisection on ``lam`` followed by mixing two deterministic threshold
policies.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelModel
from .cmdp import SensorSpec, StationaryPolicy, stationary_occupancy
from .errors import InfeasiblePower, NoConvergence

SPAN_TOL = 1e-9
SPAN_FAIL = 1e-6
MAX_SWEEPS = 100_000
DISCOUNT_TOL = 1e-10
TIE_TOL = 1e-9
# self-loop weight of the aperiodicity transform; leaves the optimal policy
# unchanged and scales the gain by (1 - APERIODIC)
APERIODIC = 0.5


@dataclass
class ValueFunction:
    values: np.ndarray  # (x_max, Q)
    avg_cost: float
    policy: np.ndarray  # (x_max, Q) of {0, 1}
    thresholds: np.ndarray  # (Q,) smallest AoI (1-based) that schedules
    sweeps: int = 0

    @property
    def x_max(self) -> int:
        return self.values.shape[0]

    def as_stationary(self) -> StationaryPolicy:
        return StationaryPolicy(self.policy.astype(float))


def _q_values(V, channel, W, lam):
    """Idle and schedule action values (without the gain term)."""
    P = channel.transition
    X, Q = V.shape
    x = np.arange(1, X + 1, dtype=float)[:, None]
    EV = V @ P.T  # EV[x, q] = sum_q' p[q, q'] V[x, q']
    idle = np.empty_like(V)
    idle[:-1] = x[:-1] + EV[1:]
    idle[-1] = np.inf  # forced schedule at the boundary
    sched = x + W + lam * channel.power[None, :] + EV[0][None, :]
    return idle, sched


def _greedy(idle, sched):
    scale = np.maximum(1.0, np.abs(sched))
    act = (sched <= idle + TIE_TOL * scale).astype(np.int8)
    act[-1] = 1
    return act


def _thresholds(policy):
    X, Q = policy.shape
    th = np.empty(Q, dtype=np.int64)
    for q in range(Q):
        hits = np.flatnonzero(policy[:, q])
        th[q] = hits[0] + 1 if hits.size else X
    return th


def relative_value_iteration(
    channel: ChannelModel, W: float, lam: float, x_max: int,
    tol: float = SPAN_TOL, max_sweeps: int = MAX_SWEEPS,
) -> ValueFunction:
    """Average-cost optimal threshold policy by relative value iteration.

    The reference state is ``(1, 1)`` (index ``[0, 0]``). Iteration stops
    once the span of successive differences falls below ``tol`` times the
    largest per-step cost.
    """
    if lam < 0 or W < 0:
        raise ValueError("W and lam must be >= 0")
    X, Q = x_max, channel.num_states
    scale = max(1.0, X + W + lam * float(channel.power.max()))
    V = np.zeros((X, Q))
    span = np.inf
    for sweep in range(1, max_sweeps + 1):
        idle, sched = _q_values(V, channel, W, lam)
        TV = APERIODIC * V + (1.0 - APERIODIC) * np.minimum(idle, sched)
        diff = TV - V
        span = diff.max() - diff.min()
        V = TV - TV[0, 0]
        if span < tol * scale:
            break
    else:
        if span > SPAN_FAIL * scale:
            raise NoConvergence(f"span {span:.3g} after {max_sweeps} sweeps (W={W}, lam={lam})")
    gain = float(diff[0, 0]) / (1.0 - APERIODIC)
    # the transform keeps the bias of the original chain, only the gain scales
    idle, sched = _q_values(V, channel, W, lam)
    policy = _greedy(idle, sched)
    return ValueFunction(V, gain, policy, _thresholds(policy), sweep)


def discounted_value_iteration(
    channel: ChannelModel, W: float, lam: float, alpha: float, x_max: int,
    tol: float = DISCOUNT_TOL, max_sweeps: int = 10_000_000,
) -> ValueFunction:
    """Discounted-cost value iteration to a sup-norm change below ``tol``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    X, Q = x_max, channel.num_states
    P = channel.transition
    x = np.arange(1, X + 1, dtype=float)[:, None]
    sched_cost = x + W + lam * channel.power[None, :]
    V = np.zeros((X, Q))
    for sweep in range(1, max_sweeps + 1):
        EV = V @ P.T
        idle = np.empty_like(V)
        idle[:-1] = x[:-1] + alpha * EV[1:]
        idle[-1] = np.inf
        sched = sched_cost + alpha * EV[0][None, :]
        TV = np.minimum(idle, sched)
        delta = np.abs(TV - V).max()
        V = TV
        # stop on the residual bound of the fixed point, not the raw step
        if delta * alpha / (1.0 - alpha) < tol or delta < tol * 1e-3:
            break
    EV = V @ P.T
    idle = np.empty_like(V)
    idle[:-1] = x[:-1] + alpha * EV[1:]
    idle[-1] = np.inf
    sched = sched_cost + alpha * EV[0][None, :]
    policy = _greedy(idle, sched)
    return ValueFunction(V, float((1.0 - alpha) * V[0, 0]), policy, _thresholds(policy), sweep)


@dataclass
class PolicyEvaluation:
    avg_aoi: float
    avg_activation: float
    avg_power: float

    def cost(self, W: float) -> float:
        return self.avg_aoi + W * self.avg_activation


def evaluate(channel: ChannelModel, policy: np.ndarray) -> PolicyEvaluation:
    """Exact long-run averages of a (possibly randomised) policy table."""
    occ = stationary_occupancy(channel, StationaryPolicy(np.asarray(policy, dtype=float)))
    X = occ.x_max
    return PolicyEvaluation(
        float(np.arange(1, X + 1) @ occ.mu.sum(axis=1)),
        float(occ.y.sum()),
        float(occ.y.sum(axis=0) @ channel.power),
    )


@dataclass
class BisectionResult:
    lam: float
    mixed_cost: float
    rho: float
    first: ValueFunction  # lower-lambda policy (more power)
    second: ValueFunction  # higher-lambda policy (less power)
    first_eval: PolicyEvaluation
    second_eval: PolicyEvaluation

    @property
    def mixed_power(self) -> float:
        return self.rho * self.first_eval.avg_power + (1 - self.rho) * self.second_eval.avg_power


def solve_cmdp_by_bisection(
    sensor: SensorSpec, W: float, x_max: int,
    lam_tol: float = 1e-8, lam_cap: float = 1e12,
) -> BisectionResult:
    """Constrained optimum as a mixture of two Lagrangian-optimal policies.

    Bisects the power multiplier until the deterministic policies at the
    two ends of the bracket straddle the budget, then picks the weight
    ``rho`` that spends the budget exactly.
    """
    ch, E = sensor.channel, sensor.power_budget

    def at(lam):
        vf = relative_value_iteration(ch, W, lam, x_max)
        return vf, evaluate(ch, vf.policy)

    lo_vf, lo_ev = at(0.0)
    if lo_ev.avg_power <= E + 1e-12:
        return BisectionResult(0.0, lo_ev.cost(W), 1.0, lo_vf, lo_vf, lo_ev, lo_ev)

    lam_hi = 1.0
    hi_vf, hi_ev = at(lam_hi)
    while hi_ev.avg_power > E:
        if hi_ev.avg_power > lo_ev.avg_power + 1e-9:
            raise ValueError("power is not monotone in the multiplier")
        lam_hi *= 4.0
        if lam_hi > lam_cap:
            raise InfeasiblePower(
                f"budget {E} is below the minimum achievable power {hi_ev.avg_power:.6g}"
            )
        hi_vf, hi_ev = at(lam_hi)

    lam_lo = 0.0
    while lam_hi - lam_lo > lam_tol * max(1.0, lam_hi):
        mid = 0.5 * (lam_lo + lam_hi)
        vf, ev = at(mid)
        if ev.avg_power > lo_ev.avg_power + 1e-9 or ev.avg_power < hi_ev.avg_power - 1e-9:
            raise ValueError("power is not monotone in the multiplier")
        if ev.avg_power > E:
            lam_lo, lo_vf, lo_ev = mid, vf, ev
        else:
            lam_hi, hi_vf, hi_ev = mid, vf, ev

    p1, p2 = lo_ev.avg_power, hi_ev.avg_power
    rho = 0.0 if p1 == p2 else (E - p2) / (p1 - p2)
    rho = min(max(rho, 0.0), 1.0)
    cost = rho * lo_ev.cost(W) + (1 - rho) * hi_ev.cost(W)
    return BisectionResult(0.5 * (lam_lo + lam_hi), cost, rho, lo_vf, hi_vf, lo_ev, hi_ev)
