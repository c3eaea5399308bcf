"""Pure Python / NumPy versions of the hot kernels.

Must stay behaviourally identical to ``_kernels.pyx``: same pivot choices,
same random-number consumption, same tie-breaking.
"""
import math

import numpy as np

OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2

TRUNCATED = 0
GREEDY = 1
ROUND_ROBIN = 2

_TIE = 1e-12
DEGEN_LIMIT = 50
_FEAS = 1e-9


def pivot(T, d, r, j):
    """Gauss-Jordan pivot on ``T[r, j]``; updates reduced costs ``d`` too."""
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    rows = np.flatnonzero(col)
    if rows.size:
        cols = np.flatnonzero(T[r])
        T[np.ix_(rows, cols)] -= np.outer(col[rows], T[r, cols])
        T[rows, j] = 0.0
    T[r, j] = 1.0
    dj = d[j]
    if dj != 0.0:
        d -= dj * T[r]
        d[j] = 0.0


def _blocked_below_tol(alpha, basis, upper):
    """True when some row would block the step but was screened out as tiny."""
    for i in np.flatnonzero(alpha):
        if alpha[i] > 0 or not math.isinf(upper[basis[i]]):
            return True
    return False


def _ratio_bland(alpha, rows, beta, basis, upper, j):
    """Exact minimum ratio, ties to the smallest variable index."""
    best_t = upper[j]
    best_idx = j
    best_row = -1
    to_upper = False
    for i in rows:
        a = alpha[i]
        b = basis[i]
        if a > 0:
            t = max(beta[i], 0.0) / a
            up = False
        else:
            ub = upper[b]
            if math.isinf(ub):
                continue
            t = max(ub - beta[i], 0.0) / (-a)
            up = True
        if t < best_t - _TIE or (t <= best_t + _TIE and b < best_idx):
            best_t, best_idx, best_row, to_upper = t, b, i, up
    return best_t, best_row, to_upper


def _ratio_harris(alpha, rows, beta, basis, upper, j):
    """Two-pass ratio test: bound the step using the feasibility tolerance,
    then take the largest pivot among rows that block within that bound."""
    t_max = upper[j]
    for i in rows:
        a = alpha[i]
        if a > 0:
            t = (max(beta[i], 0.0) + _FEAS) / a
        else:
            ub = upper[basis[i]]
            if math.isinf(ub):
                continue
            t = (max(ub - beta[i], 0.0) + _FEAS) / (-a)
        if t < t_max:
            t_max = t
    if math.isinf(t_max):
        return t_max, -1, False
    if upper[j] <= t_max:
        return upper[j], -1, False  # bound flip, no pivot needed
    best_t = math.inf
    best_abs = 0.0
    best_row = -1
    to_upper = False
    for i in rows:
        a = alpha[i]
        if a > 0:
            t = max(beta[i], 0.0) / a
            up = False
        else:
            ub = upper[basis[i]]
            if math.isinf(ub):
                continue
            t = max(ub - beta[i], 0.0) / (-a)
            up = True
        if t <= t_max and abs(a) > best_abs:
            best_t, best_abs, best_row, to_upper = t, abs(a), i, up
    return best_t, best_row, to_upper


def simplex_iterate(T, beta, d, basis, in_basis, at_upper, upper, tol_opt, tol_piv, max_iter, degen):
    """Bounded-variable primal simplex with Bland's rule.

    Minimises over the tableau ``T`` (rows = basic variables). Nonbasic
    variables sit at 0 or, when ``at_upper`` is set, at ``upper``.
    The entering variable is always the smallest eligible index. The
    leaving row comes from a two-pass (Harris) ratio test that favours large
    pivots; after ``DEGEN_LIMIT`` consecutive degenerate pivots the exact
    smallest-index rule takes over until the objective moves again
    (``degen[0]`` carries the count across calls). Returns
    ``(status, iterations)``.
    """
    m, n = T.shape
    it = 0
    while True:
        elig = (in_basis == 0) & (
            ((at_upper == 0) & (d < -tol_opt)) | ((at_upper != 0) & (d > tol_opt))
        )
        cand = np.flatnonzero(elig)
        if cand.size and it >= max_iter:
            return ITERATION_LIMIT, it
        j = -1
        for c in cand:
            c = int(c)
            sgn = -1.0 if at_upper[c] else 1.0
            alpha = T[:, c] * sgn
            rows = np.flatnonzero(np.abs(alpha) > tol_piv)
            if degen[0] >= DEGEN_LIMIT:
                best_t, best_row, to_upper = _ratio_bland(alpha, rows, beta, basis, upper, c)
            else:
                best_t, best_row, to_upper = _ratio_harris(alpha, rows, beta, basis, upper, c)
            if math.isinf(best_t):
                if _blocked_below_tol(alpha, basis, upper):
                    continue  # improving only through negligible entries
                return UNBOUNDED, it
            j = c
            break
        if j < 0:
            return OPTIMAL, it
        degen[0] = degen[0] + 1 if best_t <= _TIE else 0

        beta -= (sgn * best_t) * T[:, j]
        it += 1
        if best_row < 0:
            at_upper[j] = 0 if at_upper[j] else 1
            continue
        r = best_row
        leaving = basis[r]
        beta[r] = best_t if sgn > 0 else upper[j] - best_t
        in_basis[leaving] = 0
        at_upper[leaving] = 1 if to_upper else 0
        basis[r] = j
        in_basis[j] = 1
        at_upper[j] = 0
        pivot(T, d, r, j)


def simulate_chunk(policy, M, t0, warmup, cum, omega, xi, xcap, budget,
                   u_ch, u_pol, u_tr, x, q, spent, aoi_sum, power_sum, act,
                   slot_aoi, cand):
    """Advance the network by ``u_ch.shape[1]`` slots in place.

    Returns the largest number of sensors scheduled in any slot.
    """
    N = x.shape[0]
    L = u_ch.shape[1]
    Qmax = cum.shape[1]
    max_sched = 0
    sched = [False] * N
    for s in range(L):
        t = t0 + s
        measuring = t >= warmup
        total = 0
        for n in range(N):
            total += int(x[n])
            sched[n] = False
        slot_aoi[s] = total
        if measuring:
            for n in range(N):
                aoi_sum[n] += x[n]

        if policy == TRUNCATED:
            k = 0
            for n in range(N):
                row = min(int(x[n]), int(xcap[n])) - 1
                if u_pol[n, s] < xi[n, row, q[n]]:
                    cand[k] = n
                    k += 1
            if k > M:
                for i in range(M):
                    pick = i + int(math.floor(u_tr[s, i] * (k - i)))
                    if pick > k - 1:
                        pick = k - 1
                    cand[i], cand[pick] = cand[pick], cand[i]
                k = M
            for i in range(k):
                sched[int(cand[i])] = True
            count = k
        elif policy == GREEDY:
            count = 0
            tt = float(t + 1)
            for _ in range(M):
                best = -1
                for n in range(N):
                    if sched[n] or budget[n] * tt - spent[n] < -1e-9:
                        continue
                    if best < 0 or x[n] > x[best]:
                        best = n
                if best < 0:
                    break
                sched[best] = True
                count += 1
        else:
            for i in range(M):
                sched[(t * M + i) % N] = True
            count = M

        if count > max_sched:
            max_sched = count

        for n in range(N):
            if sched[n]:
                w = omega[n, q[n]]
                spent[n] += w
                if measuring:
                    power_sum[n] += w
                    act[n] += 1
                x[n] = 1
            else:
                x[n] += 1
            u = u_ch[n, s]
            qn = int(q[n])
            nxt = Qmax - 1
            for k2 in range(Qmax):
                if u < cum[n, qn, k2]:
                    nxt = k2
                    break
            q[n] = nxt
    return max_sched
