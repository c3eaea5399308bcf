# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Mirrors ``_fallback.py`` exactly."""
from libc.math cimport floor, INFINITY, fabs
from libc.stdlib cimport malloc, free

from libc.stdint cimport int64_t, int8_t

cdef int OPTIMAL = 0
cdef int UNBOUNDED = 1
cdef int ITERATION_LIMIT = 2

cdef double TIE = 1e-12
cdef long long DEGEN_LIMIT = 50
cdef double FEAS = 1e-9


cdef void _pivot(double[:, ::1] T, double[::1] d, Py_ssize_t r, Py_ssize_t j,
                 Py_ssize_t* cols) noexcept nogil:
    cdef Py_ssize_t m = T.shape[0], n = T.shape[1]
    cdef Py_ssize_t i, k, nc = 0
    cdef double p = T[r, j], f
    for k in range(n):
        if T[r, k] != 0.0:
            T[r, k] = T[r, k] / p
            cols[nc] = k
            nc += 1
    for i in range(m):
        if i == r:
            continue
        f = T[i, j]
        if f == 0.0:
            continue
        for k in range(nc):
            T[i, cols[k]] -= f * T[r, cols[k]]
        T[i, j] = 0.0
    T[r, j] = 1.0
    f = d[j]
    if f != 0.0:
        for k in range(nc):
            d[cols[k]] -= f * T[r, cols[k]]
        d[j] = 0.0


def pivot(double[:, ::1] T, double[::1] d, Py_ssize_t r, Py_ssize_t j):
    cdef Py_ssize_t* cols = <Py_ssize_t*> malloc(T.shape[1] * sizeof(Py_ssize_t))
    if cols == NULL:
        raise MemoryError()
    try:
        with nogil:
            _pivot(T, d, r, j, cols)
    finally:
        free(cols)


cdef bint _blocked_below_tol(double[:, ::1] T, int64_t[::1] basis, double[::1] upper,
                            Py_ssize_t j, double sgn) noexcept nogil:
    cdef Py_ssize_t i
    cdef double a
    for i in range(T.shape[0]):
        a = T[i, j] * sgn
        if a > 0.0 or (a < 0.0 and upper[basis[i]] != INFINITY):
            return True
    return False


cdef double _ratio_bland(double[:, ::1] T, double[::1] beta, int64_t[::1] basis,
                         double[::1] upper, Py_ssize_t j, double sgn, double tol_piv,
                         Py_ssize_t* row, bint* to_upper) noexcept nogil:
    cdef Py_ssize_t m = T.shape[0], i, b
    cdef double best_t = upper[j], a, t, ub, bi
    cdef Py_ssize_t best_idx = j
    cdef bint up
    row[0] = -1
    to_upper[0] = False
    for i in range(m):
        a = T[i, j] * sgn
        if fabs(a) <= tol_piv:
            continue
        b = basis[i]
        bi = beta[i]
        if a > 0:
            t = (bi if bi > 0.0 else 0.0) / a
            up = False
        else:
            ub = upper[b]
            if ub == INFINITY:
                continue
            t = ub - bi
            if t < 0.0:
                t = 0.0
            t = t / (-a)
            up = True
        if t < best_t - TIE or (t <= best_t + TIE and b < best_idx):
            best_t = t
            best_idx = b
            row[0] = i
            to_upper[0] = up
    return best_t


cdef double _ratio_harris(double[:, ::1] T, double[::1] beta, int64_t[::1] basis,
                          double[::1] upper, Py_ssize_t j, double sgn, double tol_piv,
                          Py_ssize_t* row, bint* to_upper) noexcept nogil:
    cdef Py_ssize_t m = T.shape[0], i
    cdef double t_max = upper[j], a, t, ub, bi, best_t = INFINITY, best_abs = 0.0
    cdef bint up
    row[0] = -1
    to_upper[0] = False
    for i in range(m):
        a = T[i, j] * sgn
        if fabs(a) <= tol_piv:
            continue
        if a > 0:
            bi = beta[i]
            t = ((bi if bi > 0.0 else 0.0) + FEAS) / a
        else:
            ub = upper[basis[i]]
            if ub == INFINITY:
                continue
            t = ub - beta[i]
            t = ((t if t > 0.0 else 0.0) + FEAS) / (-a)
        if t < t_max:
            t_max = t
    if t_max == INFINITY:
        return INFINITY
    if upper[j] <= t_max:
        return upper[j]
    for i in range(m):
        a = T[i, j] * sgn
        if fabs(a) <= tol_piv:
            continue
        bi = beta[i]
        if a > 0:
            t = (bi if bi > 0.0 else 0.0) / a
            up = False
        else:
            ub = upper[basis[i]]
            if ub == INFINITY:
                continue
            t = ub - bi
            if t < 0.0:
                t = 0.0
            t = t / (-a)
            up = True
        if t <= t_max and fabs(a) > best_abs:
            best_t = t
            best_abs = fabs(a)
            row[0] = i
            to_upper[0] = up
    return best_t


def simplex_iterate(double[:, ::1] T, double[::1] beta, double[::1] d,
                    int64_t[::1] basis, int8_t[::1] in_basis, int8_t[::1] at_upper,
                    double[::1] upper, double tol_opt, double tol_piv, long long max_iter,
                    int64_t[::1] degen):
    cdef Py_ssize_t m = T.shape[0], n = T.shape[1]
    cdef Py_ssize_t i, j, r, leaving, c, start
    cdef long long it = 0
    cdef double sgn, best_t
    cdef bint to_upper
    cdef int status = OPTIMAL
    cdef Py_ssize_t* cols = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    if cols == NULL:
        raise MemoryError()
    with nogil:
        while True:
            j = -1
            start = 0
            while True:
                c = -1
                for i in range(start, n):
                    if in_basis[i]:
                        continue
                    if at_upper[i]:
                        if d[i] > tol_opt:
                            c = i
                            break
                    elif d[i] < -tol_opt:
                        c = i
                        break
                if c < 0:
                    break
                if it >= max_iter:
                    j = -2
                    break
                sgn = -1.0 if at_upper[c] else 1.0
                if degen[0] >= DEGEN_LIMIT:
                    best_t = _ratio_bland(T, beta, basis, upper, c, sgn, tol_piv, &r, &to_upper)
                else:
                    best_t = _ratio_harris(T, beta, basis, upper, c, sgn, tol_piv, &r, &to_upper)
                if best_t == INFINITY:
                    if _blocked_below_tol(T, basis, upper, c, sgn):
                        start = c + 1
                        continue
                    j = -3
                    break
                j = c
                break
            if j == -1:
                status = OPTIMAL
                break
            if j == -2:
                status = ITERATION_LIMIT
                break
            if j == -3:
                status = UNBOUNDED
                break

            if best_t <= TIE:
                degen[0] += 1
            else:
                degen[0] = 0

            for i in range(m):
                beta[i] -= (sgn * best_t) * T[i, j]
            it += 1
            if r < 0:
                at_upper[j] = 0 if at_upper[j] else 1
                continue
            leaving = basis[r]
            beta[r] = best_t if sgn > 0 else upper[j] - best_t
            in_basis[leaving] = 0
            at_upper[leaving] = 1 if to_upper else 0
            basis[r] = j
            in_basis[j] = 1
            at_upper[j] = 0
            _pivot(T, d, r, j, cols)
    free(cols)
    return status, it


def simulate_chunk(int policy, Py_ssize_t M, long long t0, long long warmup,
                   double[:, :, ::1] cum, double[:, ::1] omega, double[:, :, ::1] xi,
                   int64_t[::1] xcap, double[::1] budget,
                   double[:, ::1] u_ch, double[:, ::1] u_pol, double[:, ::1] u_tr,
                   int64_t[::1] x, int64_t[::1] q, double[::1] spent,
                   int64_t[::1] aoi_sum, double[::1] power_sum, int64_t[::1] act,
                   int64_t[::1] slot_aoi, int64_t[::1] cand):
    cdef Py_ssize_t N = x.shape[0], L = u_ch.shape[1], Qmax = cum.shape[1]
    cdef Py_ssize_t s, n, i, k, pick, row, best, qn, nxt, k2, count
    cdef long long t, total, max_sched = 0
    cdef bint measuring
    cdef double tt, w, u
    cdef int64_t tmp
    cdef char* sched = <char*> malloc(N * sizeof(char))
    if sched == NULL:
        raise MemoryError()
    with nogil:
        for s in range(L):
            t = t0 + s
            measuring = t >= warmup
            total = 0
            for n in range(N):
                total += x[n]
                sched[n] = 0
            slot_aoi[s] = total
            if measuring:
                for n in range(N):
                    aoi_sum[n] += x[n]

            if policy == 0:
                k = 0
                for n in range(N):
                    row = x[n] if x[n] < xcap[n] else xcap[n]
                    row -= 1
                    if u_pol[n, s] < xi[n, row, q[n]]:
                        cand[k] = n
                        k += 1
                if k > M:
                    for i in range(M):
                        pick = i + <Py_ssize_t> floor(u_tr[s, i] * (k - i))
                        if pick > k - 1:
                            pick = k - 1
                        tmp = cand[i]
                        cand[i] = cand[pick]
                        cand[pick] = tmp
                    k = M
                for i in range(k):
                    sched[cand[i]] = 1
                count = k
            elif policy == 1:
                count = 0
                tt = <double> (t + 1)
                for i in range(M):
                    best = -1
                    for n in range(N):
                        if sched[n] or budget[n] * tt - spent[n] < -1e-9:
                            continue
                        if best < 0 or x[n] > x[best]:
                            best = n
                    if best < 0:
                        break
                    sched[best] = 1
                    count += 1
            else:
                for i in range(M):
                    sched[(t * M + i) % N] = 1
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
                qn = q[n]
                nxt = Qmax - 1
                for k2 in range(Qmax):
                    if u < cum[n, qn, k2]:
                        nxt = k2
                        break
                q[n] = nxt
    free(sched)
    return max_sched
