"""Single-sensor power-constrained scheduling as an occupancy-measure LP.

State ``(x, q)``: AoI ``x`` in ``1..x_max`` and channel state ``q``. The LP
variables are ``mu[x, q]`` (stationary probability of the state) and
``y[x, q] = mu[x, q] * xi[x, q]`` (stationary probability of being in the
state *and* scheduling). Arrays are 0-indexed: row ``i`` holds AoI ``i+1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp_core
from .channel import ChannelModel
from .errors import InfeasiblePower, InvalidTruncation, SingularSystem, TruncationTooTight

# starting truncation; grown by doubling until the boundary carries no mass
DEFAULT_X_MAX = 32
MAX_DOUBLINGS = 5
BOUNDARY_MASS_TOL = 1e-6
MU_ZERO_TOL = 1e-9
RATIO_ONE_TOL = 1e-9


@dataclass(frozen=True)
class SensorSpec:
    channel: ChannelModel
    power_budget: float

    def __post_init__(self):
        if not np.isfinite(self.power_budget) or self.power_budget < 0:
            raise ValueError(f"power budget must be finite and >= 0, got {self.power_budget}")


@dataclass
class OccupancyMeasure:
    mu: np.ndarray  # (x_max, Q)
    y: np.ndarray  # (x_max, Q)

    @property
    def x_max(self) -> int:
        return self.mu.shape[0]

    def mix(self, other: "OccupancyMeasure", weight: float) -> "OccupancyMeasure":
        """``weight * self + (1 - weight) * other``, padding to the larger x_max."""
        X = max(self.x_max, other.x_max)
        a, b = self.padded(X), other.padded(X)
        return OccupancyMeasure(weight * a.mu + (1 - weight) * b.mu, weight * a.y + (1 - weight) * b.y)

    def padded(self, x_max: int) -> "OccupancyMeasure":
        if x_max == self.x_max:
            return self
        extra = np.zeros((x_max - self.x_max, self.mu.shape[1]))
        return OccupancyMeasure(np.vstack([self.mu, extra]), np.vstack([self.y, extra]))


@dataclass
class StationaryPolicy:
    xi: np.ndarray  # (x_max, Q); AoI above x_max uses the last row

    @property
    def x_max(self) -> int:
        return self.xi.shape[0]

    def prob(self, x: int, q: int) -> float:
        return float(self.xi[min(x, self.x_max) - 1, q])


@dataclass
class PolicyMetrics:
    avg_aoi: float
    avg_activation: float
    avg_power: float
    g_value: float


def build_lp(sensor: SensorSpec, W: float, x_max: int, activation_cap: float | None = None) -> lp_core.LinearProgram:
    """Occupancy-measure LP for multiplier ``W``.

    Column ``x*Q + q`` holds ``mu[x, q]`` and column ``X*Q + x*Q + q`` holds
    ``y[x, q]``. Objective ``sum W*y + x*mu``; equality rows are the balance
    equations of the AoI/channel chain plus normalisation; inequality rows
    are ``y <= mu``, the power budget and the optional activation cap.
    """
    _check(x_max, W)
    P = sensor.channel.transition
    Q = P.shape[0]
    nh = x_max * Q
    n = 2 * nh

    c = np.empty(n)
    c[:nh] = np.repeat(np.arange(1, x_max + 1, dtype=float), Q)
    c[nh:] = W

    A_eq = np.zeros((nh + 1, n))
    A_eq[:Q, :Q] = np.eye(Q)
    A_eq[:Q, nh:] = -np.tile(P.T, x_max)
    for x in range(1, x_max):
        r = slice(x * Q, (x + 1) * Q)
        A_eq[r, x * Q:(x + 1) * Q] = np.eye(Q)
        A_eq[r, (x - 1) * Q:x * Q] = -P.T
        A_eq[r, nh + (x - 1) * Q:nh + x * Q] = P.T
    A_eq[nh, :nh] = 1.0
    b_eq = np.zeros(nh + 1)
    b_eq[nh] = 1.0

    n_ub = nh + 1 + (activation_cap is not None)
    A_ub = np.zeros((n_ub, n))
    idx = np.arange(nh)
    A_ub[idx, nh + idx] = 1.0
    A_ub[idx, idx] = -1.0
    A_ub[nh, nh:] = np.tile(sensor.channel.power, x_max)
    b_ub = np.zeros(n_ub)
    b_ub[nh] = sensor.power_budget
    if activation_cap is not None:
        A_ub[nh + 1, nh:] = 1.0
        b_ub[nh + 1] = activation_cap
    return lp_core.LinearProgram(c, A_eq, b_eq, A_ub, b_ub)


def build_reduced_lp(
    sensor: SensorSpec, W: float, x_max: int, activation_cap: float | None = None
) -> lp_core.LinearProgram:
    """Same LP written in schedule mass ``y`` and idle mass ``v = mu - y``.

    ``y <= mu`` becomes the sign constraint on ``v``, which removes one
    inequality row per state and halves the tableau. Columns: ``y[x, q]``
    at ``x*Q + q``, then ``v[x, q]`` for ``x < x_max - 1`` (idling at the
    boundary is not allowed).
    """
    _check(x_max, W)
    P = sensor.channel.transition
    Q = P.shape[0]
    nh = x_max * Q
    nv = nh - Q
    n = nh + nv

    c = np.empty(n)
    aoi = np.repeat(np.arange(1, x_max + 1, dtype=float), Q)
    c[:nh] = aoi + W
    c[nh:] = aoi[:nv]

    A_eq = np.zeros((nh + 1, n))
    A_eq[:nh, :nh] = np.eye(nh)
    A_eq[:nv, nh:] = np.eye(nv)
    A_eq[:Q, :nh] -= np.tile(P.T, x_max)
    for x in range(1, x_max):
        A_eq[x * Q:(x + 1) * Q, nh + (x - 1) * Q:nh + x * Q] = -P.T
    A_eq[nh, :] = 1.0
    b_eq = np.zeros(nh + 1)
    b_eq[nh] = 1.0

    rows = [np.concatenate([np.tile(sensor.channel.power, x_max), np.zeros(nv)])]
    rhs = [sensor.power_budget]
    if activation_cap is not None:
        rows.append(np.concatenate([np.ones(nh), np.zeros(nv)]))
        rhs.append(activation_cap)
    return lp_core.LinearProgram(c, A_eq, b_eq, np.array(rows), np.array(rhs))


def _check(x_max, W):
    if x_max < 2:
        raise InvalidTruncation(f"x_max must be >= 2, got {x_max}")
    if W < 0:
        raise ValueError("W must be >= 0")


def solve_decoupled(
    sensor: SensorSpec,
    W: float = 0.0,
    x_max: int = DEFAULT_X_MAX,
    activation_cap: float | None = None,
    backend: str | None = None,
) -> OccupancyMeasure:
    """Optimal occupancy measure, growing ``x_max`` while mass piles up at the boundary.

    An infeasible budget also triggers growth, since a larger truncation
    lowers the power spent on forced boundary transmissions.
    """
    return solve_decoupled_ranged(sensor, W, x_max, activation_cap, backend)[0]


def solve_decoupled_ranged(
    sensor: SensorSpec,
    W: float = 0.0,
    x_max: int = DEFAULT_X_MAX,
    activation_cap: float | None = None,
    backend: str | None = None,
) -> tuple[OccupancyMeasure, tuple[float, float]]:
    """As :func:`solve_decoupled`, also returning the interval of multipliers
    ``[W_lo, W_hi]`` over which the same occupancy measure stays optimal."""
    _check(x_max, W)
    if sensor.power_budget <= 0.0:
        raise InfeasiblePower(f"power budget {sensor.power_budget} cannot pay for boundary transmissions")
    Q = sensor.channel.num_states
    X = x_max
    occ = None
    for _ in range(MAX_DOUBLINGS + 1):
        nh = X * Q
        direction = np.zeros(2 * nh - Q)
        direction[:nh] = 1.0
        sol = lp_core.solve(
            build_reduced_lp(sensor, W, X, activation_cap), backend=backend, cost_direction=direction
        )
        if sol.optimal:
            occ = _from_reduced(sol.values, X, Q)
            if occ.mu[-1].sum() <= BOUNDARY_MASS_TOL:
                t_lo, t_hi = sol.cost_range
                return occ, (max(0.0, W + t_lo), W + t_hi)
        X *= 2
    if occ is None:
        raise InfeasiblePower(
            f"power budget {sensor.power_budget} (cap={activation_cap}) is infeasible "
            f"up to x_max={X // 2}"
        )
    raise TruncationTooTight(
        f"boundary mass {occ.mu[-1].sum():.3g} persists at x_max={X // 2} after {MAX_DOUBLINGS} doublings"
    )


def _from_reduced(z, x_max, Q):
    nh = x_max * Q
    y = np.clip(z[:nh].reshape(x_max, Q), 0.0, 1.0)
    v = np.zeros((x_max, Q))
    v[:-1] = np.clip(z[nh:].reshape(x_max - 1, Q), 0.0, 1.0)
    return OccupancyMeasure(y + v, y)


def occupancy_from_solution(z: np.ndarray, x_max: int, Q: int) -> OccupancyMeasure:
    """Reshape a solution vector of :func:`build_lp` into (mu, y)."""
    nh = x_max * Q
    mu = np.clip(z[:nh].reshape(x_max, Q), 0.0, 1.0)
    y = np.clip(z[nh:].reshape(x_max, Q), 0.0, None)
    return OccupancyMeasure(mu, np.minimum(y, mu))


def extract_policy(occ: OccupancyMeasure) -> StationaryPolicy:
    """Scheduling probabilities from an occupancy measure.

    ``xi = y / mu`` on states that carry mass. A state without mass is
    never reached in steady state and inherits the value of the previous
    age in its channel column (0 at age 1), which keeps ``xi``
    nondecreasing in age. Scheduling is forced at ``x_max``.
    """
    mu, y = occ.mu, occ.y
    X, Q = mu.shape
    xi = np.empty((X, Q))
    for q in range(Q):
        prev = 0.0
        for x in range(X - 1):
            if mu[x, q] > MU_ZERO_TOL:
                v = min(max(y[x, q] / mu[x, q], 0.0), 1.0)
                prev = 1.0 if v > 1.0 - RATIO_ONE_TOL else v
            xi[x, q] = prev
        xi[X - 1, q] = 1.0
    return StationaryPolicy(xi)


def policy_metrics(occ: OccupancyMeasure, sensor: SensorSpec, W: float = 0.0) -> PolicyMetrics:
    X = occ.x_max
    aoi = float(np.arange(1, X + 1) @ occ.mu.sum(axis=1))
    act = float(occ.y.sum())
    power = float(occ.y.sum(axis=0) @ sensor.channel.power)
    return PolicyMetrics(aoi, act, power, aoi + W * act)


def transition_matrix(channel: ChannelModel, policy: StationaryPolicy) -> np.ndarray:
    """Row-stochastic chain over (x, q) induced by ``policy``.

    Index ``x*Q + q``. Forward moves ``(x,q) -> (x+1,q')`` carry
    ``(1 - xi) p``, resets ``(x,q) -> (1,q')`` carry ``xi p``.
    """
    P = channel.transition
    xi = policy.xi
    X, Q = xi.shape
    K = np.zeros((X * Q, X * Q))
    for x in range(X):
        for q in range(Q):
            i = x * Q + q
            K[i, 0:Q] += xi[x, q] * P[q]
            if x + 1 < X:
                K[i, (x + 1) * Q:(x + 2) * Q] += (1.0 - xi[x, q]) * P[q]
            else:
                K[i, 0:Q] += (1.0 - xi[x, q]) * P[q]
    return K


def stationary_occupancy(channel: ChannelModel, policy: StationaryPolicy) -> OccupancyMeasure:
    """Occupancy measure of ``policy`` from the balance equations of its chain."""
    K = transition_matrix(channel, policy)
    n = K.shape[0]
    A = K.T - np.eye(n)
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"policy chain is not unichain: {exc}") from exc
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    X, Q = policy.xi.shape
    mu = pi.reshape(X, Q)
    return OccupancyMeasure(mu, mu * policy.xi)
