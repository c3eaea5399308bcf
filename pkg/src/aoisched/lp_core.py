"""Dense two-phase simplex for small, well-scaled probability LPs.

Solves::

    min  c^T z
    s.t. A_eq z  = b_eq
         A_ub z <= b_ub
         lo <= z <= hi

Variable bounds are handled by the bounded-variable simplex (nonbasic
variables rest at either bound), so they never become tableau rows.
Bland's smallest-index rule is used for both the entering and the leaving
choice, which makes the method cycle-free on these highly degenerate
problems and the pivot sequence fully deterministic.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import DimensionMismatch, IterationLimit, NumericalFailure

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-7
RESIDUAL_TOL = 1e-7
MAX_PIVOTS = 1_000_000
# pivots between reinversions of the tableau from the original data
REFACTOR_EVERY = 500


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    objective: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    bounds: np.ndarray | None = None  # shape (n, 2); default [0, 1] box

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).reshape(-1)
        n = c.size
        self.objective = c
        self.A_eq, self.b_eq = _pair(self.A_eq, self.b_eq, n, "eq")
        self.A_ub, self.b_ub = _pair(self.A_ub, self.b_ub, n, "ub")
        if self.bounds is None:
            bnd = np.tile([0.0, 1.0], (n, 1))
        else:
            bnd = np.asarray(self.bounds, dtype=float)
            if bnd.shape != (n, 2):
                raise DimensionMismatch(f"bounds must have shape ({n}, 2), got {bnd.shape}")
            if np.any(bnd[:, 0] < 0) or np.any(bnd[:, 1] > 1) or np.any(bnd[:, 0] > bnd[:, 1]):
                raise DimensionMismatch("variable bounds must satisfy 0 <= lo <= hi <= 1")
        self.bounds = bnd
        for name in ("objective", "A_eq", "b_eq", "A_ub", "b_ub"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DimensionMismatch(f"{name} has non-finite coefficients")

    @property
    def num_vars(self) -> int:
        return self.objective.size


def _pair(A, b, n, tag):
    if A is None:
        if b is not None and np.size(b):
            raise DimensionMismatch(f"b_{tag} given without A_{tag}")
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape[1] != n:
        raise DimensionMismatch(f"A_{tag} has {A.shape[1]} columns, objective has {n}")
    if A.shape[0] != b.size:
        raise DimensionMismatch(f"A_{tag} has {A.shape[0]} rows, b_{tag} has {b.size}")
    return A, b


@dataclass
class LpSolution:
    status: LpStatus
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective_value: float = float("nan")
    iterations: int = 0
    # (t_lo, t_hi): the returned point stays optimal for objective c + t*direction
    cost_range: tuple | None = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def residuals(lp: LinearProgram, z: np.ndarray) -> dict:
    """Constraint violations of ``z`` (all zero for an exactly feasible point)."""
    lo, hi = lp.bounds[:, 0], lp.bounds[:, 1]
    eq = np.abs(lp.A_eq @ z - lp.b_eq).max(initial=0.0)
    ub = np.maximum(lp.A_ub @ z - lp.b_ub, 0.0).max(initial=0.0)
    bnd = max(np.maximum(lo - z, 0.0).max(initial=0.0), np.maximum(z - hi, 0.0).max(initial=0.0))
    return {"eq": float(eq), "ub": float(ub), "bounds": float(bnd)}


def solve(
    lp: LinearProgram,
    max_pivots: int = MAX_PIVOTS,
    backend: str | None = None,
    cost_direction: np.ndarray | None = None,
) -> LpSolution:
    """Two-phase bounded simplex. Raises :class:`IterationLimit` on runaway pivoting.

    An optimum whose constraint residuals exceed ``RESIDUAL_TOL`` is
    recomputed with a stricter pivot threshold before giving up. With
    ``cost_direction`` set, the optimal basis is ranged: ``cost_range``
    holds the interval of ``t`` over which it stays optimal for the
    objective ``c + t * cost_direction``.
    """
    if cost_direction is not None:
        cost_direction = np.asarray(cost_direction, dtype=float).reshape(-1)
        if cost_direction.size != lp.num_vars:
            raise DimensionMismatch("cost_direction must match the number of variables")
    for piv_tol in (PIVOT_TOL, 1e-6, 1e-5):
        sol = _solve(lp, max_pivots, _backend.get(backend), piv_tol, cost_direction)
        if not sol.optimal or max(residuals(lp, sol.values).values()) <= RESIDUAL_TOL:
            return sol
    raise NumericalFailure(f"simplex lost feasibility: residuals {residuals(lp, sol.values)}")


def _solve(lp, max_pivots, K, piv_tol, cost_direction=None):
    n = lp.num_vars
    lo, hi = lp.bounds[:, 0], lp.bounds[:, 1]
    m_eq, m_ub = lp.A_eq.shape[0], lp.A_ub.shape[0]
    m = m_eq + m_ub

    # shift to 0 <= z' <= hi - lo
    b_eq = lp.b_eq - lp.A_eq @ lo
    b_ub = lp.b_ub - lp.A_ub @ lo

    # columns: structural | ub slacks | artificials
    flip_ub = b_ub < 0
    n_art = m_eq + int(flip_ub.sum())
    n_base = n + m_ub
    ntot = n_base + n_art
    T = np.zeros((m, ntot))
    beta = np.empty(m)
    basis = np.empty(m, dtype=np.int64)
    T[:m_eq, :n] = lp.A_eq
    T[m_eq:, :n] = lp.A_ub
    T[m_eq + np.arange(m_ub), n + np.arange(m_ub)] = 1.0
    rhs = np.concatenate([b_eq, b_ub])
    neg = np.concatenate([b_eq < 0, flip_ub])
    T[neg] *= -1.0
    rhs[neg] *= -1.0
    a = n_base
    for i in range(m):
        if i < m_eq or flip_ub[i - m_eq]:
            T[i, a] = 1.0
            basis[i] = a
            a += 1
        else:
            basis[i] = n + (i - m_eq)
        beta[i] = rhs[i]

    A0 = T.copy()
    upper = np.concatenate([hi - lo, np.full(m_ub + n_art, np.inf)])
    in_basis = np.zeros(ntot, dtype=np.int8)
    in_basis[basis] = 1
    at_upper = np.zeros(ntot, dtype=np.int8)
    total = 0

    if n_art:
        cost1 = np.zeros(ntot)
        cost1[n_base:] = 1.0
        d = cost1 - cost1[basis] @ T
        status, its = _iterate(K, A0, rhs, cost1, T, beta, d, basis, in_basis, at_upper, upper, piv_tol, max_pivots)
        total += its
        if status == _backend._fallback.ITERATION_LIMIT:
            raise IterationLimit(f"phase 1 exceeded {max_pivots} pivots")
        art_rows = basis >= n_base
        infeas = beta[art_rows].sum()
        if infeas > FEAS_TOL * max(1.0, np.abs(rhs).max(initial=0.0)):
            return LpSolution(LpStatus.INFEASIBLE, iterations=total)

        # drive remaining (zero-level) artificials out, dropping redundant rows
        keep = np.ones(m, dtype=bool)
        dummy = np.zeros(ntot)
        for r in np.flatnonzero(art_rows):
            # degenerate pivot, so the largest entry can be taken without
            # affecting termination; it keeps the new basis well conditioned
            row = np.where(in_basis[:n_base] == 0, np.abs(T[r, :n_base]), 0.0)
            j = int(np.argmax(row))
            if row[j] <= piv_tol:
                keep[r] = False
                continue
            in_basis[basis[r]] = 0
            beta[r] = upper[j] if at_upper[j] else 0.0
            basis[r] = j
            in_basis[j] = 1
            at_upper[j] = 0
            K.pivot(T, dummy, r, j)
        if not keep.all():
            T = T[keep]
            beta = beta[keep]
            basis = basis[keep]
        A0 = np.ascontiguousarray(A0[keep][:, :n_base])
        rhs = rhs[keep]
        T = np.ascontiguousarray(T[:, :n_base])
        upper = upper[:n_base].copy()
        in_basis = in_basis[:n_base].copy()
        at_upper = at_upper[:n_base].copy()
        beta = np.ascontiguousarray(beta)
        basis = np.ascontiguousarray(basis)
    else:
        keep = np.ones(m, dtype=bool)

    cost2 = np.zeros(n_base)
    cost2[:n] = lp.objective
    d = cost2 - cost2[basis] @ T
    _refactor(A0, rhs, cost2, T, beta, d, basis, at_upper, upper)
    status, its = _iterate(K, A0, rhs, cost2, T, beta, d, basis, in_basis, at_upper, upper, piv_tol, max_pivots)
    total += its
    if status == _backend._fallback.ITERATION_LIMIT:
        raise IterationLimit(f"phase 2 exceeded {max_pivots} pivots")
    if status == _backend._fallback.UNBOUNDED:
        return LpSolution(LpStatus.UNBOUNDED, iterations=total)

    rng = None
    if cost_direction is not None:
        _refactor(A0, rhs, cost2, T, beta, d, basis, at_upper, upper)
        rng = _cost_range(T, d, basis, in_basis, at_upper, upper, cost_direction, n_base)
    z = np.where(at_upper.astype(bool), upper, 0.0)
    z[basis] = beta
    z = _polish(lp, z, basis, keep, n, m_eq, m_ub, upper, lo)
    x = z[:n] + lo
    x = np.clip(x, lo, hi)
    return LpSolution(LpStatus.OPTIMAL, x, float(lp.objective @ x), total, rng)


def _cost_range(T, d, basis, in_basis, at_upper, upper, direction, n_base):
    """Interval of ``t`` keeping every reduced cost on its optimal side."""
    c1 = np.zeros(n_base)
    c1[:direction.size] = direction
    d1 = c1 - c1[basis] @ T
    t_lo, t_hi = -np.inf, np.inf
    free = (in_basis == 0) & (upper > 0)
    # at lower: d + t*d1 >= -tol ; at upper: d + t*d1 <= tol (sign-flipped)
    sgn = np.where(at_upper.astype(bool), -1.0, 1.0)
    dd = (sgn * d)[free] + OPT_TOL
    d1s = (sgn * d1)[free]
    neg = d1s < 0
    pos = d1s > 0
    if neg.any():
        t_hi = float(np.min(dd[neg] / -d1s[neg]))
    if pos.any():
        t_lo = float(np.max(-dd[pos] / d1s[pos]))
    return (min(t_lo, 0.0), max(t_hi, 0.0))


def _iterate(K, A0, rhs, cost, T, beta, d, basis, in_basis, at_upper, upper, piv_tol, max_pivots):
    """Run the simplex kernel in chunks, reinverting between chunks."""
    total = 0
    degen = np.zeros(1, dtype=np.int64)
    while True:
        chunk = min(REFACTOR_EVERY, max_pivots - total)
        status, its = K.simplex_iterate(
            T, beta, d, basis, in_basis, at_upper, upper, OPT_TOL, piv_tol, chunk, degen
        )
        total += its
        if status != _backend._fallback.ITERATION_LIMIT or total >= max_pivots:
            return status, total
        _refactor(A0, rhs, cost, T, beta, d, basis, at_upper, upper)


def _refactor(A0, rhs, cost, T, beta, d, basis, at_upper, upper):
    """Recompute ``T = B^-1 A0``, basic values and reduced costs in place.

    Gauss-Jordan updates lose accuracy over long degenerate runs; starting
    each chunk from a fresh inverse keeps the tableau bounded.
    """
    B = A0[:, basis]
    nonbasic_up = at_upper.astype(bool)
    z_n = np.where(nonbasic_up, upper, 0.0)
    z_n[basis] = 0.0
    try:
        lu_T = np.linalg.solve(B, np.column_stack([A0, rhs - A0 @ z_n]))
    except np.linalg.LinAlgError:
        return
    if not np.all(np.isfinite(lu_T)):
        return
    T[:] = lu_T[:, :-1]
    T[np.abs(T) < 1e-14] = 0.0
    T[:, basis] = np.eye(len(basis))
    beta[:] = lu_T[:, -1]
    d[:] = cost - cost[basis] @ T
    d[basis] = 0.0


def _polish(lp, z, basis, keep, n, m_eq, m_ub, upper, lo):
    """Recompute basic values from the original data with one LU solve.

    The tableau accumulates rounding over thousands of pivots; re-solving
    ``B z_B = b - N z_N`` restores residuals to machine precision.
    """
    A = np.zeros((m_eq + m_ub, n + m_ub))
    A[:m_eq, :n] = lp.A_eq
    A[m_eq:, :n] = lp.A_ub
    A[m_eq + np.arange(m_ub), n + np.arange(m_ub)] = 1.0
    b = np.concatenate([lp.b_eq - lp.A_eq @ lo, lp.b_ub - lp.A_ub @ lo])
    A = A[keep]
    b = b[keep]
    nonbasic = np.ones(n + m_ub, dtype=bool)
    nonbasic[basis] = False
    B = A[:, basis]
    r = b - A[:, nonbasic] @ z[nonbasic]
    try:
        zb = np.linalg.solve(B, r)
    except np.linalg.LinAlgError:
        return z
    if not np.all(np.isfinite(zb)) or np.abs(zb - z[basis]).max(initial=0.0) > 1e-6:
        return z
    out = z.copy()
    out[basis] = np.clip(zb, 0.0, upper[basis])
    return out
