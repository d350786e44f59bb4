"""Pure numpy fallback for the placement table builder.

Vectorised over the time axis: row ``k`` of space ``i`` only depends on
row ``k`` of space ``i - 1`` and row ``k - 1`` of space ``i``.
"""

import numpy as np


def build_table(t_units, energy, caps, K, steps):
    """Fill ``dp[i][k][t]`` (min energy for exactly k items in the first i
    item types within t time units) and ``count[i][k][t]`` (how many of
    type i that optimum takes)."""
    m = len(t_units)
    T = steps + 1
    dp = np.empty((m + 1, K + 1, T))
    cnt = np.zeros((m + 1, K + 1, T), dtype=np.int32)
    dp[0] = np.inf
    dp[0, 0] = 0.0
    for i in range(1, m + 1):
        ti = int(t_units[i - 1])
        e = float(energy[i - 1])
        cap = int(caps[i - 1])
        dp[i, 0] = 0.0
        if cap >= K:
            for k in range(1, K + 1):
                prev = dp[i - 1, k]
                cand = np.full(T, np.inf)
                if ti < T:
                    cand[ti:] = dp[i, k - 1, :T - ti] + e
                take = cand < prev
                dp[i, k] = np.where(take, cand, prev)
                c = np.zeros(T, dtype=np.int32)
                if ti < T:
                    c[ti:] = cnt[i, k - 1, :T - ti] + 1
                cnt[i, k] = np.where(take, c, 0)
        else:
            for k in range(1, K + 1):
                best = dp[i - 1, k].copy()
                bc = np.zeros(T, dtype=np.int32)
                for c in range(1, min(cap, k) + 1):
                    shift = c * ti
                    if shift >= T:
                        break
                    cand = np.full(T, np.inf)
                    cand[shift:] = dp[i - 1, k - c, :T - shift] + c * e
                    better = cand < best
                    best[better] = cand[better]
                    bc[better] = c
                dp[i, k] = best
                cnt[i, k] = bc
    return dp, cnt


def _trace(cnt, t_units, k, t):
    x = np.zeros((len(t), len(t_units)), dtype=np.int64)
    k = k.copy()
    t = t.copy()
    for i in range(len(t_units), 0, -1):
        c = cnt[i, k, t].astype(np.int64)
        x[:, i - 1] = c
        t -= c * t_units[i - 1]
        k -= c
    return x


def combine_trace(best_a, cnt_a, tu_a, best_b, cnt_b, tu_b, K):
    T = best_a.shape[1]
    cols = np.arange(T)
    if best_b is None:
        k_first = np.full(T, K, dtype=np.int64)
        total = best_a[K].copy()
    else:
        summed = best_a + best_b[::-1]
        k_first = np.argmin(summed, axis=0).astype(np.int64)
        total = summed[k_first, cols]
    ok = np.flatnonzero(np.isfinite(total))
    x = np.zeros((T, len(tu_a) + (0 if best_b is None else len(tu_b))), dtype=np.int64)
    x[ok, :len(tu_a)] = _trace(cnt_a, tu_a, k_first[ok], ok)
    if best_b is not None:
        x[ok, len(tu_a):] = _trace(cnt_b, tu_b, K - k_first[ok], ok)
    return k_first, total, x
