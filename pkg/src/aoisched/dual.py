"""Network-level search over the bandwidth multiplier ``W``.

Relaxing the per-slot bandwidth limit to a time average decouples the
network into independent single-sensor problems tied together by one
multiplier. A projected subgradient search on ``W`` brackets the point
where the average bandwidth use crosses ``M``; mixing the occupancy
measures at the two ends of the bracket gives the relaxed optimum, whose
average AoI bounds every hard-bandwidth policy from below.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import cmdp
from .cmdp import OccupancyMeasure, SensorSpec
from .errors import ConfigError, InfeasiblePower, NoBracket

EXACT_TOL = 1e-6
DEFAULT_EPS = 1e-3
DEFAULT_MAX_ITER = 500
DEFAULT_REFINE = 8


@dataclass(frozen=True)
class NetworkSpec:
    """``N`` sensors sharing ``M`` channels.

    ``1 <= M < N`` is enforced unless ``allow_saturated`` is set, in which
    case ``M >= N`` is accepted and the bandwidth limit never binds.
    """

    sensors: tuple
    bandwidth: int
    allow_saturated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        if not self.sensors:
            raise ConfigError("network needs at least one sensor")
        for s in self.sensors:
            if not isinstance(s, SensorSpec):
                raise ConfigError(f"expected SensorSpec, got {type(s).__name__}")
        M = self.bandwidth
        if isinstance(M, bool) or int(M) != M or M < 1:
            raise ConfigError(f"bandwidth M must be a positive integer, got {M}")
        object.__setattr__(self, "bandwidth", int(M))
        if not self.allow_saturated and self.bandwidth >= len(self.sensors):
            raise ConfigError(f"need M < N, got M={self.bandwidth}, N={len(self.sensors)}")

    @property
    def num_sensors(self) -> int:
        return len(self.sensors)


@dataclass
class DualEvaluation:
    """Per-sensor optima at one multiplier value."""

    W: float
    g: float
    avg_aoi: np.ndarray  # (N,)
    activation: np.ndarray  # (N,)
    occupancies: list

    @property
    def total_activation(self) -> float:
        return float(self.activation.sum())


@dataclass(frozen=True)
class TraceRow:
    k: int
    W: float
    sum_activation: float
    g: float


@dataclass
class DualResult:
    w_trace: list
    mixed_occupancy: list
    policies: list
    aoi_lower_bound: float
    nu: float
    W_l: float | None = None
    W_u: float | None = None
    M_l: float | None = None
    M_u: float | None = None
    iterations: int = 0
    mixed: bool = False
    evaluations: list = field(default_factory=list, repr=False)

    @property
    def W_star(self) -> float:
        """Multiplier reported for the solution (``W_l`` when a bracket exists)."""
        return self.W_l if self.W_l is not None else 0.0

    @property
    def total_activation(self) -> float:
        return float(sum(o.y.sum() for o in self.mixed_occupancy))


class SolutionCache:
    """Per-sensor occupancy measures keyed by the multiplier interval on
    which each stays optimal, so nearby ``W`` values skip the LP."""

    def __init__(self):
        self._entries: dict = {}
        self.hits = 0
        self.misses = 0

    def lookup(self, key, W):
        for lo, hi, occ in self._entries.get(key, ()):
            if lo <= W <= hi:
                self.hits += 1
                return occ
        self.misses += 1
        return None

    def store(self, key, lo, hi, occ):
        self._entries.setdefault(key, []).append((lo, hi, occ))


def dual_value(
    network: NetworkSpec,
    W: float,
    x_max: int = cmdp.DEFAULT_X_MAX,
    threads: int = 1,
    backend: str | None = None,
    cache: SolutionCache | None = None,
) -> DualEvaluation:
    """Solve every sensor's problem at ``W`` and aggregate.

    ``g(W) = (1/N) sum_n g_n(W) - W*M/N``; identical sensors are solved once.
    Raises :class:`InfeasiblePower` naming the first infeasible sensor.
    """
    if W < 0:
        raise ValueError("W must be >= 0")
    unique = list(dict.fromkeys(network.sensors))

    def solve(s):
        if cache is not None:
            hit = cache.lookup((s, x_max), W)
            if hit is not None:
                return hit
        try:
            occ, (lo, hi) = cmdp.solve_decoupled_ranged(s, W, x_max, backend=backend)
        except InfeasiblePower as exc:
            return exc
        if cache is not None:
            cache.store((s, x_max), lo, hi, occ)
        return occ

    if threads > 1 and len(unique) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve, unique))
    else:
        results = [solve(s) for s in unique]
    by_sensor = dict(zip(unique, results))

    occs = []
    for n, s in enumerate(network.sensors):
        r = by_sensor[s]
        if isinstance(r, InfeasiblePower):
            raise InfeasiblePower(f"sensor {n}: {r}", sensor=n) from r
        occs.append(r)
    N, M = network.num_sensors, network.bandwidth
    aoi = np.array([_avg_aoi(o) for o in occs])
    act = np.array([float(o.y.sum()) for o in occs])
    g = float((aoi + W * act).sum() / N - W * M / N)
    return DualEvaluation(float(W), g, aoi, act, occs)


def _avg_aoi(occ: OccupancyMeasure) -> float:
    return float(np.arange(1, occ.x_max + 1) @ occ.mu.sum(axis=1))


def mixing_weight(M_l: float, M_u: float, M: float) -> float:
    """Weight on the lower bracket so the mixture uses bandwidth ``M`` on average."""
    if not M_l <= M <= M_u or M_u == M_l:
        raise ValueError(f"need M_l <= M <= M_u with M_l < M_u, got {M_l}, {M}, {M_u}")
    return (M_u - M) / (M_u - M_l)


def default_step0(N: int, M: int, d0: float) -> float:
    """Step scale that makes the first update land near the expected multiplier.

    With average AoI close to ``1/(2A)`` at activation ``A``, the price of
    activation at ``A = M/N`` is about ``N^2 / (2 M^2)``.
    """
    return N * N / (2.0 * M * M) / d0


def run_algorithm1(
    network: NetworkSpec,
    step0: float | None = None,
    eps: float = DEFAULT_EPS,
    max_iter: int = DEFAULT_MAX_ITER,
    refine_rounds: int = DEFAULT_REFINE,
    x_max: int = cmdp.DEFAULT_X_MAX,
    threads: int = 1,
    backend: str | None = None,
) -> DualResult:
    """Subgradient search for the bandwidth multiplier and the relaxed optimum.

    Starts at ``W = 0``. If the unconstrained optima already fit in ``M``
    channels on average they are returned unmixed. Otherwise ``W`` follows
    ``max(0, W + step0/k * (sum A_n - M))`` (``step0`` defaults to
    :func:`default_step0`) until a step is shorter than
    ``eps`` at a point that fits, keeping the best iterate on each side of
    ``M``. ``refine_rounds`` bisection steps then tighten that bracket
    before the two sides are mixed.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if step0 is not None and step0 <= 0:
        raise ValueError("step0 must be > 0")
    N, M = network.num_sensors, network.bandwidth

    cache = SolutionCache()

    def evaluate(W):
        return dual_value(network, W, x_max, threads, backend, cache)

    ev = evaluate(0.0)
    trace = [TraceRow(0, 0.0, ev.total_activation, ev.g)]
    if ev.total_activation <= M + EXACT_TOL:
        return _finish(trace, ev.occupancies, 1.0, [ev], N, iterations=0,
                       W_l=0.0, M_l=ev.total_activation)

    if step0 is None:
        step0 = default_step0(N, M, ev.total_activation - M)
    lower = None  # best evaluation with sum A <= M (largest such sum)
    upper = ev  # best evaluation with sum A > M (smallest such sum)
    evals = [ev]
    W_prev = 0.0
    d = ev.total_activation - M
    k = 0
    for k in range(1, max_iter + 1):
        W = max(0.0, W_prev + step0 / k * d)
        ev = evaluate(W)
        evals.append(ev)
        trace.append(TraceRow(k, W, ev.total_activation, ev.g))
        lower, upper = _update(lower, upper, ev, M)
        d = ev.total_activation - M
        if abs(W - W_prev) < eps and d <= EXACT_TOL:
            break
        W_prev = W
    if lower is None:
        raise NoBracket(
            f"no multiplier in {k} iterations brought the bandwidth use down to M={M}", trace=trace
        )

    for r in range(refine_rounds):
        if abs(lower.total_activation - M) <= EXACT_TOL:
            break
        ev = evaluate(0.5 * (lower.W + upper.W))
        evals.append(ev)
        trace.append(TraceRow(k + r + 1, ev.W, ev.total_activation, ev.g))
        lower, upper = _update(lower, upper, ev, M)

    M_l, M_u = lower.total_activation, upper.total_activation
    if abs(M_l - M) <= EXACT_TOL:
        return _finish(trace, lower.occupancies, 1.0, evals, N, iterations=k,
                       W_l=lower.W, W_u=upper.W, M_l=M_l, M_u=M_u)
    nu = mixing_weight(M_l, M_u, M)
    mixed = [a.mix(b, nu) for a, b in zip(lower.occupancies, upper.occupancies)]
    return _finish(trace, mixed, nu, evals, N, iterations=k, mixed_flag=True,
                   W_l=lower.W, W_u=upper.W, M_l=M_l, M_u=M_u)


def _update(lower, upper, ev, M):
    s = ev.total_activation
    if s <= M + EXACT_TOL:
        if lower is None or s > lower.total_activation:
            lower = ev
    elif s < upper.total_activation or (s == upper.total_activation and ev.W > upper.W):
        upper = ev
    return lower, upper


def _finish(trace, occs, nu, evals, N, iterations, mixed_flag=False, **brackets):
    policies = [cmdp.extract_policy(o) for o in occs]
    lb = float(sum(_avg_aoi(o) for o in occs) / N)
    return DualResult(trace, occs, policies, lb, float(nu), iterations=iterations,
                      mixed=mixed_flag, evaluations=evals, **brackets)


def lower_bound(result: DualResult) -> float:
    """Network average AoI of the relaxed optimum."""
    N = len(result.mixed_occupancy)
    return float(sum(_avg_aoi(o) for o in result.mixed_occupancy) / N)



def identical_sensor_bound(sensor: SensorSpec, N: int, M: int,
                           x_max: int = cmdp.DEFAULT_X_MAX, backend: str | None = None) -> float:
    """Relaxed optimum for ``N`` copies of ``sensor``.

    By symmetry every sensor gets activation ``M/N``, so one LP with that
    activation cap and no multiplier gives the bound directly.
    """
    occ = cmdp.solve_decoupled(sensor, 0.0, x_max, activation_cap=M / N, backend=backend)
    return _avg_aoi(occ)
