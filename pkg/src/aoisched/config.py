"""JSON experiment configuration.

A config names the channel, the sensors' power budgets (explicit or by a
linear rule on the normalised budget ``rho``), the network size, and the
run parameters. :meth:`ExperimentConfig.to_dict` emits the fully
normalised form, so ``from_dict(to_dict(c)) == c``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelModel, reference_channel, steady_state
from .cmdp import DEFAULT_X_MAX, SensorSpec
from .dual import DEFAULT_EPS, DEFAULT_MAX_ITER, NetworkSpec
from .errors import ConfigError
from .sim import DEFAULT_WARMUP

POLICIES = ("truncated", "greedy", "round_robin")
AXES = ("N", "rho", "M")
DEFAULT_HORIZON = 100_000
DEFAULT_W_GRID = (0.0, 0.5, 1.0, 2.0, 5.0)
DEFAULT_ORACLE_X_MAX = 40
DEFAULT_ORACLE_TOL = 1e-3

_TOP_KEYS = {
    "channel", "sensors", "N", "M", "T", "seeds", "x_max", "gamma0", "eps",
    "max_iter", "warmup", "policies", "outputs", "sweep", "oracle",
}


def _int(value, name, low=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if low is not None and value < low:
        raise ConfigError(f"{name} must be >= {low}, got {value}")
    return int(value)


def _float(value, name, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ConfigError(f"{name} must be a finite number, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(f"{name} must be > 0, got {value}")
    return float(value)


def _keys(data, allowed, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    extra = set(data) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def rr_power(channel: ChannelModel, N: int, M: int) -> float:
    """Per-sensor average power of round robin, ``(M/N) * sum_q eta_q omega(q)``."""
    return M / N * float(steady_state(channel) @ channel.power)


def rho_values(rho_min: float, rho_max: float, N: int) -> np.ndarray:
    """``rho_n`` spaced linearly from ``rho_min`` (n = 1) to ``rho_max`` (n = N)."""
    if N == 1:
        return np.array([rho_min])
    return rho_min + (rho_max - rho_min) * np.arange(N) / (N - 1)


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    bandwidth_ratio: float | None = None  # axis N: M = round(ratio * N)

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"sweep axis must be one of {AXES}, got {self.axis!r}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if self.axis == "rho":
            vals = tuple(_float(v, "sweep value") for v in self.values)
            if min(vals) < 0:
                raise ConfigError("rho values must be >= 0")
        else:
            vals = tuple(_int(v, "sweep value", 1) for v in self.values)
        object.__setattr__(self, "values", vals)
        if self.bandwidth_ratio is not None:
            r = _float(self.bandwidth_ratio, "bandwidth_ratio", positive=True)
            object.__setattr__(self, "bandwidth_ratio", r)

    def to_dict(self) -> dict:
        return {"axis": self.axis, "values": list(self.values), "bandwidth_ratio": self.bandwidth_ratio}

    @classmethod
    def from_dict(cls, data) -> "SweepSpec":
        _keys(data, {"axis", "values", "bandwidth_ratio"}, "sweep")
        if "axis" not in data or "values" not in data:
            raise ConfigError("sweep needs 'axis' and 'values'")
        return cls(data["axis"], tuple(data["values"]), data.get("bandwidth_ratio"))


@dataclass(frozen=True)
class OracleSpec:
    W_grid: tuple = DEFAULT_W_GRID
    x_max: int = DEFAULT_ORACLE_X_MAX
    tol: float = DEFAULT_ORACLE_TOL

    def __post_init__(self):
        grid = tuple(_float(w, "oracle W") for w in self.W_grid)
        if not grid or min(grid) < 0:
            raise ConfigError("oracle W_grid must be a nonempty list of values >= 0")
        object.__setattr__(self, "W_grid", grid)
        object.__setattr__(self, "x_max", _int(self.x_max, "oracle x_max", 2))
        object.__setattr__(self, "tol", _float(self.tol, "oracle tol", positive=True))

    def to_dict(self) -> dict:
        return {"W_grid": list(self.W_grid), "x_max": self.x_max, "tol": self.tol}

    @classmethod
    def from_dict(cls, data) -> "OracleSpec":
        _keys(data, {"W_grid", "x_max", "tol"}, "oracle")
        return cls(
            tuple(data.get("W_grid", DEFAULT_W_GRID)),
            data.get("x_max", DEFAULT_ORACLE_X_MAX),
            data.get("tol", DEFAULT_ORACLE_TOL),
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment.

    Exactly one of ``budgets`` (explicit per-sensor power budgets) and the
    pair ``rho_min``/``rho_max`` (budgets ``rho_n * E_rr``) is set.
    """

    N: int
    M: int
    channel: ChannelModel = field(default_factory=reference_channel)
    budgets: tuple | None = None
    rho_min: float | None = None
    rho_max: float | None = None
    T: int = DEFAULT_HORIZON
    seeds: tuple = (0,)
    x_max: int = DEFAULT_X_MAX
    gamma0: float | None = None
    eps: float = DEFAULT_EPS
    max_iter: int = DEFAULT_MAX_ITER
    warmup: int = DEFAULT_WARMUP
    policies: tuple = POLICIES
    outputs: str = "."
    sweep: SweepSpec | None = None
    oracle: OracleSpec = field(default_factory=OracleSpec)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "N", _int(self.N, "N", 1))
        set_(self, "M", _int(self.M, "M", 1))
        if not isinstance(self.channel, ChannelModel):
            raise ConfigError("channel must be a ChannelModel")
        if (self.budgets is None) == (self.rho_min is None):
            raise ConfigError("give either sensor budgets or a rho rule, not both or neither")
        if self.budgets is not None:
            b = tuple(_float(v, "budget") for v in self.budgets)
            if not b:
                raise ConfigError("sensor list is empty")
            if len(b) != self.N:
                raise ConfigError(f"{len(b)} budgets for N={self.N} sensors")
            if min(b) < 0:
                raise ConfigError("budgets must be >= 0")
            set_(self, "budgets", b)
        else:
            lo = _float(self.rho_min, "rho_min")
            hi = _float(self.rho_max if self.rho_max is not None else lo, "rho_max")
            if lo < 0 or hi < 0:
                raise ConfigError("rho_min and rho_max must be >= 0")
            set_(self, "rho_min", lo)
            set_(self, "rho_max", hi)
        set_(self, "T", _int(self.T, "T", 1))
        seeds = tuple(_int(s, "seed", 0) for s in self.seeds)
        if not seeds:
            raise ConfigError("seeds must be a nonempty list")
        set_(self, "seeds", seeds)
        set_(self, "x_max", _int(self.x_max, "x_max", 2))
        if self.gamma0 is not None:
            set_(self, "gamma0", _float(self.gamma0, "gamma0", positive=True))
        set_(self, "eps", _float(self.eps, "eps", positive=True))
        set_(self, "max_iter", _int(self.max_iter, "max_iter", 1))
        set_(self, "warmup", _int(self.warmup, "warmup", 0))
        pols = tuple(self.policies)
        if not pols or any(p not in POLICIES for p in pols):
            raise ConfigError(f"policies must be a nonempty subset of {POLICIES}, got {list(pols)}")
        set_(self, "policies", pols)
        if not isinstance(self.outputs, str) or not self.outputs:
            raise ConfigError("outputs must be a directory path")

    # sensors

    def rhos(self) -> np.ndarray:
        """Normalised budgets ``E_n / E_rr``."""
        if self.budgets is not None:
            return np.array(self.budgets) / rr_power(self.channel, self.N, self.M)
        return rho_values(self.rho_min, self.rho_max, self.N)

    def power_budgets(self) -> np.ndarray:
        if self.budgets is not None:
            return np.array(self.budgets)
        return self.rhos() * rr_power(self.channel, self.N, self.M)

    def network(self, allow_saturated: bool = False) -> NetworkSpec:
        sensors = [SensorSpec(self.channel, float(e)) for e in self.power_budgets()]
        return NetworkSpec(sensors, self.M, allow_saturated=allow_saturated)

    def at(self, axis: str, value) -> "ExperimentConfig":
        """This config moved to one sweep point.

        Explicit budgets stay fixed, so axes that change ``N`` need a rho rule.
        ``rho`` makes the sensors identical at that normalised budget.
        """
        if axis == "rho":
            return replace(self, budgets=None, rho_min=float(value), rho_max=float(value))
        if axis == "N":
            if self.budgets is not None:
                raise ConfigError("sweeping N needs a rho rule for the sensor budgets")
            ratio = self.sweep.bandwidth_ratio if self.sweep is not None else None
            M = max(1, int(round(ratio * value))) if ratio is not None else self.M
            return replace(self, N=int(value), M=M)
        if axis == "M":
            if value >= self.N:
                raise ConfigError(f"need M < N, got M={value}, N={self.N}")
            return replace(self, M=int(value))
        raise ConfigError(f"unknown sweep axis {axis!r}")

    # serialisation

    def to_dict(self) -> dict:
        if self.budgets is not None:
            sensors = {"budgets": list(self.budgets)}
        else:
            sensors = {"rho_min": self.rho_min, "rho_max": self.rho_max}
        return {
            "channel": self.channel.to_dict(),
            "sensors": sensors,
            "N": self.N,
            "M": self.M,
            "T": self.T,
            "seeds": list(self.seeds),
            "x_max": self.x_max,
            "gamma0": self.gamma0,
            "eps": self.eps,
            "max_iter": self.max_iter,
            "warmup": self.warmup,
            "policies": list(self.policies),
            "outputs": self.outputs,
            "sweep": self.sweep.to_dict() if self.sweep is not None else None,
            "oracle": self.oracle.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data) -> "ExperimentConfig":
        _keys(data, _TOP_KEYS, "config")
        if "channel" in data and data["channel"] is not None:
            ch = data["channel"]
            _keys(ch, {"transition", "power"}, "channel")
            if "transition" not in ch:
                raise ConfigError("channel needs a 'transition' matrix")
            channel = ChannelModel.from_dict(ch)
        else:
            channel = reference_channel()
        sensors = data.get("sensors")
        if sensors is None:
            raise ConfigError("config needs 'sensors'")
        if isinstance(sensors, list):
            sensors = {"budgets": sensors}
        _keys(sensors, {"budgets", "rho_min", "rho_max"}, "sensors")
        budgets = sensors.get("budgets")
        if budgets is not None and not isinstance(budgets, list):
            raise ConfigError("sensor budgets must be a list")
        N = data.get("N", len(budgets) if budgets is not None else None)
        if N is None:
            raise ConfigError("config needs 'N' when sensors are given by a rho rule")
        if "M" not in data:
            raise ConfigError("config needs 'M'")
        kwargs = {}
        for key in ("T", "x_max", "gamma0", "eps", "max_iter", "warmup", "outputs"):
            if key in data:
                kwargs[key] = data[key]
        for key in ("seeds", "policies"):
            if key in data:
                if not isinstance(data[key], list):
                    raise ConfigError(f"{key} must be a list")
                kwargs[key] = tuple(data[key])
        sweep = data.get("sweep")
        oracle = data.get("oracle")
        return cls(
            N=N,
            M=data["M"],
            channel=channel,
            budgets=tuple(budgets) if budgets is not None else None,
            rho_min=sensors.get("rho_min"),
            rho_max=sensors.get("rho_max"),
            sweep=SweepSpec.from_dict(sweep) if sweep is not None else None,
            oracle=OracleSpec.from_dict(oracle) if oracle is not None else OracleSpec(),
            **kwargs,
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_json(text)
