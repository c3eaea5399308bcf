"""Finite-state Markov fading channels.

Channel states are indexed from 0 in the Python API; state 0 is the
"best" state in the sense that it usually carries the lowest transmission
power ``power[0]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    IndexOutOfRange,
    NegativeEntry,
    NotErgodic,
    NotStochastic,
    SingularSystem,
)

ROW_SUM_TOL = 1e-9

# Reference 4-state channel. With no power vector given, omega(q) = q for q = 1..Q.
REFERENCE_TRANSITION = (
    (0.4, 0.3, 0.2, 0.1),
    (0.25, 0.3, 0.25, 0.2),
    (0.2, 0.25, 0.3, 0.25),
    (0.1, 0.2, 0.3, 0.4),
)


@dataclass(frozen=True, eq=False)
class ChannelModel:
    """Q-state Markov channel with per-state transmission power.

    Parameters
    ----------
    transition : array_like, shape (Q, Q)
        Row-stochastic matrix, ``transition[i, j] = Pr(q' = j | q = i)``.
    power : array_like, shape (Q,), optional
        Power units spent by one transmission in each state. Defaults to
        ``1, 2, ..., Q``.
    validate_model : bool
        Run :func:`validate` on construction (default).
    """

    transition: np.ndarray
    power: np.ndarray
    _cum: np.ndarray

    def __init__(self, transition, power=None, validate_model: bool = True):
        P = np.array(transition, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
            raise NotStochastic(f"transition must be a square matrix, got shape {P.shape}")
        Q = P.shape[0]
        if power is None:
            w = np.arange(1, Q + 1, dtype=float)
        else:
            w = np.array(power, dtype=float).reshape(-1)
        if w.shape != (Q,):
            raise NotStochastic(f"power vector has length {w.size}, expected {Q}")
        P.setflags(write=False)
        w.setflags(write=False)
        cum = np.cumsum(P, axis=1)
        cum[:, -1] = 1.0
        cum.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "power", w)
        object.__setattr__(self, "_cum", cum)
        if validate_model:
            validate(self)

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def cumulative(self) -> np.ndarray:
        return self._cum

    def __eq__(self, other):
        if not isinstance(other, ChannelModel):
            return NotImplemented
        return np.array_equal(self.transition, other.transition) and np.array_equal(
            self.power, other.power
        )

    def __hash__(self):
        return hash((self.transition.tobytes(), self.power.tobytes()))

    def __repr__(self):
        return f"ChannelModel(Q={self.num_states}, power={self.power.tolist()})"

    def to_dict(self) -> dict:
        return {"transition": self.transition.tolist(), "power": self.power.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelModel":
        return cls(data["transition"], data.get("power"))


def reference_channel(power=None) -> ChannelModel:
    return ChannelModel(REFERENCE_TRANSITION, power)


def _reachable(adj: np.ndarray, start: int = 0) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    stack = [start]
    seen[start] = True
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i]):
            if not seen[j]:
                seen[j] = True
                stack.append(j)
    return seen


def validate(model: ChannelModel) -> None:
    """Raise if the model is not a valid irreducible stochastic chain.

    Aperiodicity is not required: only the stationary distribution is used,
    and it is unique for any irreducible chain.
    """
    P = model.transition
    w = model.power
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(w))):
        raise NotStochastic("transition and power entries must be finite")
    if np.any(P < 0):
        raise NegativeEntry("transition matrix has negative entries")
    if np.any(P > 1):
        raise NotStochastic("transition matrix has entries above 1")
    if np.any(w < 0):
        raise NegativeEntry("power vector has negative entries")
    sums = P.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        i = int(bad[0])
        raise NotStochastic(f"row {i} sums to {float(sums[i]):.12g}, expected 1")
    adj = P > 0
    if not (_reachable(adj).all() and _reachable(adj.T).all()):
        raise NotErgodic("transition matrix is reducible (more than one communicating class)")


def steady_state(model: ChannelModel) -> np.ndarray:
    """Stationary distribution eta with eta P = eta, sum(eta) = 1.

    Solved directly: the last balance equation is replaced by the
    normalisation row and the system is factorised with LU.
    """
    P = model.transition
    Q = P.shape[0]
    A = P.T - np.eye(Q)
    A[-1, :] = 1.0
    rhs = np.zeros(Q)
    rhs[-1] = 1.0
    try:
        eta = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"steady-state system is singular: {exc}") from exc
    if not np.all(np.isfinite(eta)) or np.any(eta <= 0):
        raise SingularSystem(f"steady-state solve produced a non-positive vector {eta}")
    return eta / eta.sum()


def sample_next(model: ChannelModel, q: int, rng: np.random.Generator) -> int:
    """Draw the next channel state from row ``q`` using one uniform of ``rng``."""
    if not 0 <= q < model.num_states:
        raise IndexOutOfRange(f"state {q} outside 0..{model.num_states - 1}")
    u = rng.random()
    nxt = int(np.searchsorted(model.cumulative[q], u, side="right"))
    return min(nxt, model.num_states - 1)


def sample_path(model: ChannelModel, q0: int, length: int, rng: np.random.Generator) -> np.ndarray:
    """Trajectory of ``length`` states starting at ``q0`` (inclusive)."""
    if not 0 <= q0 < model.num_states:
        raise IndexOutOfRange(f"state {q0} outside 0..{model.num_states - 1}")
    u = rng.random(max(length - 1, 0))
    out = np.empty(length, dtype=np.int64)
    if length == 0:
        return out
    cum = model.cumulative
    Q = model.num_states
    q = q0
    out[0] = q
    for t in range(1, length):
        q = min(int(np.searchsorted(cum[q], u[t - 1], side="right")), Q - 1)
        out[t] = q
    return out
