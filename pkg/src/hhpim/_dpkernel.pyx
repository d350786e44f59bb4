# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled min-energy placement table builder.

Same contract as ``hhpim._dpkernel_py.build_table``; arrays are laid out
``[i][k][t]`` so the innermost loop walks contiguous time cells.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def build_table(const cnp.int64_t[::1] t_units, const double[::1] energy,
                const cnp.int64_t[::1] caps, Py_ssize_t K, Py_ssize_t steps):
    cdef Py_ssize_t m = t_units.shape[0]
    cdef Py_ssize_t T = steps + 1
    dp_arr = np.empty((m + 1, K + 1, T), dtype=np.float64)
    cnt_arr = np.zeros((m + 1, K + 1, T), dtype=np.int32)
    cdef double[:, :, ::1] dp = dp_arr
    cdef int[:, :, ::1] cnt = cnt_arr
    cdef Py_ssize_t i, k, t, c, ti, cmax, tt
    cdef long long cap
    cdef double e, best, cand
    cdef int bc

    dp[0, 0, :] = 0.0
    for k in range(1, K + 1):
        dp[0, k, :] = INFINITY

    for i in range(1, m + 1):
        ti = t_units[i - 1]
        e = energy[i - 1]
        cap = caps[i - 1]
        dp[i, 0, :] = 0.0
        if cap >= K:
            for k in range(1, K + 1):
                for t in range(T):
                    best = dp[i - 1, k, t]
                    bc = 0
                    if t >= ti:
                        cand = dp[i, k - 1, t - ti] + e
                        if cand < best:
                            best = cand
                            bc = cnt[i, k - 1, t - ti] + 1
                    dp[i, k, t] = best
                    cnt[i, k, t] = bc
        else:
            for k in range(1, K + 1):
                cmax = k if k < cap else cap
                for t in range(T):
                    best = dp[i - 1, k, t]
                    bc = 0
                    for c in range(1, cmax + 1):
                        tt = t - c * ti
                        if tt < 0:
                            break
                        cand = dp[i - 1, k - c, tt] + c * e
                        if cand < best:
                            best = cand
                            bc = <int>c
                    dp[i, k, t] = best
                    cnt[i, k, t] = bc
    return dp_arr, cnt_arr


def combine_trace(const double[:, ::1] best_a, const int[:, :, ::1] cnt_a,
                  const cnp.int64_t[::1] tu_a, best_b, cnt_b, tu_b, Py_ssize_t K):
    """Cheapest split of K items over one or two clusters, traced to counts.

    ``best_*`` are the final ``[k][t]`` rows of each cluster table; ``best_b``
    is None for a single cluster.  Ties keep the fewest items on cluster a.
    """
    cdef Py_ssize_t T = best_a.shape[1]
    cdef Py_ssize_t ma = tu_a.shape[0]
    cdef Py_ssize_t mb = 0 if best_b is None else len(tu_b)
    k_arr = np.zeros(T, dtype=np.int64)
    tot_arr = np.full(T, np.inf)
    x_arr = np.zeros((T, ma + mb), dtype=np.int64)
    cdef cnp.int64_t[::1] kf = k_arr
    cdef double[::1] tot = tot_arr
    cdef cnp.int64_t[:, ::1] x = x_arr
    cdef const double[:, ::1] bb
    cdef const int[:, :, ::1] cb
    cdef const cnp.int64_t[::1] tb
    cdef Py_ssize_t t, k, kbest, i, tt, kk, c
    cdef double v, vbest
    if mb:
        bb = best_b
        cb = cnt_b
        tb = np.ascontiguousarray(tu_b, dtype=np.int64)
    for t in range(T):
        if mb:
            vbest = INFINITY
            kbest = 0
            for k in range(K + 1):
                v = best_a[k, t] + bb[K - k, t]
                if v < vbest:
                    vbest = v
                    kbest = k
        else:
            kbest = K
            vbest = best_a[K, t]
        kf[t] = kbest
        tot[t] = vbest
        if vbest == INFINITY:
            continue
        tt = t
        kk = kbest
        for i in range(ma, 0, -1):
            c = cnt_a[i, kk, tt]
            x[t, i - 1] = c
            tt -= c * tu_a[i - 1]
            kk -= c
        if mb:
            tt = t
            kk = K - kbest
            for i in range(mb, 0, -1):
                c = cb[i, kk, tt]
                x[t, ma + i - 1] = c
                tt -= c * tb[i - 1]
                kk -= c
    return k_arr, tot_arr, x_arr
