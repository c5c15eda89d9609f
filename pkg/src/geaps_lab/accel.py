"""Hot numeric kernels: numba-compiled with a pure-numpy fallback.

Backend selection is process-wide at import time. Set ``GEAPS_LAB_NUMBA=0``
(or ``false``/``off``/``no``) to force the numpy path; anything else uses
numba when it imports cleanly. Both backends implement the same apply order
for in-place updates so results agree to float round-off (integer kernels
agree exactly). ``benchmarks/bench_kernels.py`` times one against the other.
"""

from __future__ import annotations

import os

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))

# relabel category codes, in ratio order
CAT_REAL, CAT_FUTURE, CAT_ACTUAL, CAT_ACHIEVED, CAT_BEHAVIORAL = 0, 1, 2, 3, 4


def _flag_enabled() -> bool:
    raw = os.environ.get("GEAPS_LAB_NUMBA", "1").strip().lower()
    return raw not in ("0", "false", "off", "no")


USING_NUMBA = False
if _flag_enabled():
    try:
        import numba

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USING_NUMBA = False


# ---------------------------------------------------------------------------
# pure-numpy reference implementations
# ---------------------------------------------------------------------------

def kde_logpdf_numpy(samples, log_weights, queries, bandwidth):
    """Log density of a weighted Gaussian-kernel mixture at each query.

    ``samples`` (n, d) and ``queries`` (m, d) share a coordinate space;
    ``log_weights`` (n,) are unnormalized log multiplicities. Work is chunked
    so the (chunk, n) distance temporary stays bounded.
    """
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    log_weights = np.ascontiguousarray(log_weights, dtype=np.float64)
    n, d = samples.shape
    m = queries.shape[0]
    inv_two_h2 = 1.0 / (2.0 * bandwidth * bandwidth)
    wmax = log_weights.max()
    log_total_w = wmax + np.log(np.exp(log_weights - wmax).sum())
    log_kernel_norm = d * (0.5 * LOG_2PI + np.log(bandwidth))
    out = np.empty(m, dtype=np.float64)
    chunk = max(1, int(4_000_000 // max(n, 1)))
    for lo in range(0, m, chunk):
        q = queries[lo : lo + chunk]
        d2 = ((q[:, None, :] - samples[None, :, :]) ** 2).sum(axis=2)
        a = log_weights[None, :] - d2 * inv_two_h2
        amax = a.max(axis=1)
        out[lo : lo + chunk] = amax + np.log(np.exp(a - amax[:, None]).sum(axis=1))
    return out - log_total_w - log_kernel_norm


def td_update_numpy(q, s, g, a, reward, s_next, done, lr, gamma, q_hi):
    """One-step Q-learning on a dense (S, G, A) table, in place.

    Targets are gathered from the pre-update table; increments are applied in
    batch order, so duplicate (s, g, a) keys accumulate. Updated entries are
    clipped to [0, q_hi].
    """
    q_sa = q[s, g, a]
    v_next = q[s_next, g].max(axis=1)
    target = reward + gamma * (1.0 - done) * v_next
    np.add.at(q, (s, g, a), lr * (target - q_sa))
    q[s, g, a] = np.clip(q[s, g, a], 0.0, q_hi)


def relabel_goals_numpy(
    idx,
    cat,
    u_future,
    u_pool,
    goal_cell,
    ag_cell,
    traj_end,
    actual_pool,
    n_actual,
    behavioral_pool,
    n_behavioral,
):
    """Map sampled transitions to hindsight goal labels (cell ids).

    ``idx`` indexes the buffer arrays; ``cat`` carries CAT_* codes; the
    uniforms drive the future-index and pool draws. Unlabeled (goal -1)
    transitions drawn as CAT_REAL fall through to an achieved-pool draw;
    empty actual/behavioral pools fall back to the transition's own achieved
    goal.
    """
    b = idx.shape[0]
    n = ag_cell.shape[0]
    out = np.empty(b, dtype=np.int64)
    own = ag_cell[idx]

    is_real = cat == CAT_REAL
    has_goal = goal_cell[idx] >= 0
    take_real = is_real & has_goal
    out[take_real] = goal_cell[idx[take_real]]

    is_future = cat == CAT_FUTURE
    if is_future.any():
        i = idx[is_future]
        span = traj_end[i] - i
        j = i + np.minimum((u_future[is_future] * span).astype(np.int64), span - 1)
        out[is_future] = ag_cell[j]

    # REAL on unlabeled data behaves like an achieved draw
    is_achieved = (cat == CAT_ACHIEVED) | (is_real & ~has_goal)
    if is_achieved.any():
        k = np.minimum((u_pool[is_achieved] * n).astype(np.int64), n - 1)
        out[is_achieved] = ag_cell[k]

    is_actual = cat == CAT_ACTUAL
    if is_actual.any():
        if n_actual > 0:
            k = np.minimum((u_pool[is_actual] * n_actual).astype(np.int64), n_actual - 1)
            out[is_actual] = actual_pool[k]
        else:
            out[is_actual] = own[is_actual]

    is_behavioral = cat == CAT_BEHAVIORAL
    if is_behavioral.any():
        if n_behavioral > 0:
            k = np.minimum(
                (u_pool[is_behavioral] * n_behavioral).astype(np.int64), n_behavioral - 1
            )
            out[is_behavioral] = behavioral_pool[k]
        else:
            out[is_behavioral] = own[is_behavioral]
    return out


# ---------------------------------------------------------------------------
# numba twins
# ---------------------------------------------------------------------------

if USING_NUMBA:

    @numba.njit(cache=True)
    def _kde_logpdf_nb(samples, log_weights, queries, bandwidth):
        n, d = samples.shape
        m = queries.shape[0]
        inv_two_h2 = 1.0 / (2.0 * bandwidth * bandwidth)
        wmax = log_weights[0]
        for i in range(1, n):
            if log_weights[i] > wmax:
                wmax = log_weights[i]
        wsum = 0.0
        for i in range(n):
            wsum += np.exp(log_weights[i] - wmax)
        log_total_w = wmax + np.log(wsum)
        log_kernel_norm = d * (0.5 * LOG_2PI + np.log(bandwidth))
        out = np.empty(m, dtype=np.float64)
        for j in range(m):
            amax = -np.inf
            for i in range(n):
                d2 = 0.0
                for c in range(d):
                    diff = queries[j, c] - samples[i, c]
                    d2 += diff * diff
                a = log_weights[i] - d2 * inv_two_h2
                if a > amax:
                    amax = a
            acc = 0.0
            for i in range(n):
                d2 = 0.0
                for c in range(d):
                    diff = queries[j, c] - samples[i, c]
                    d2 += diff * diff
                acc += np.exp(log_weights[i] - d2 * inv_two_h2 - amax)
            out[j] = amax + np.log(acc) - log_total_w - log_kernel_norm
        return out

    @numba.njit(cache=True)
    def _td_update_nb(q, s, g, a, reward, s_next, done, lr, gamma, q_hi):
        b = s.shape[0]
        n_actions = q.shape[2]
        delta = np.empty(b, dtype=np.float64)
        for k in range(b):
            v_next = q[s_next[k], g[k], 0]
            for j in range(1, n_actions):
                v = q[s_next[k], g[k], j]
                if v > v_next:
                    v_next = v
            target = reward[k] + gamma * (1.0 - done[k]) * v_next
            delta[k] = lr * (target - q[s[k], g[k], a[k]])
        for k in range(b):
            q[s[k], g[k], a[k]] += delta[k]
        for k in range(b):
            v = q[s[k], g[k], a[k]]
            if v < 0.0:
                q[s[k], g[k], a[k]] = 0.0
            elif v > q_hi:
                q[s[k], g[k], a[k]] = q_hi

    @numba.njit(cache=True)
    def _relabel_goals_nb(
        idx,
        cat,
        u_future,
        u_pool,
        goal_cell,
        ag_cell,
        traj_end,
        actual_pool,
        n_actual,
        behavioral_pool,
        n_behavioral,
    ):
        b = idx.shape[0]
        n = ag_cell.shape[0]
        out = np.empty(b, dtype=np.int64)
        for t in range(b):
            i = idx[t]
            c = cat[t]
            if c == CAT_REAL and goal_cell[i] >= 0:
                out[t] = goal_cell[i]
            elif c == CAT_FUTURE:
                span = traj_end[i] - i
                off = int(u_future[t] * span)
                if off > span - 1:
                    off = span - 1
                out[t] = ag_cell[i + off]
            elif c == CAT_ACTUAL:
                if n_actual > 0:
                    k = int(u_pool[t] * n_actual)
                    if k > n_actual - 1:
                        k = n_actual - 1
                    out[t] = actual_pool[k]
                else:
                    out[t] = ag_cell[i]
            elif c == CAT_BEHAVIORAL:
                if n_behavioral > 0:
                    k = int(u_pool[t] * n_behavioral)
                    if k > n_behavioral - 1:
                        k = n_behavioral - 1
                    out[t] = behavioral_pool[k]
                else:
                    out[t] = ag_cell[i]
            else:
                # CAT_ACHIEVED, and CAT_REAL on unlabeled data
                k = int(u_pool[t] * n)
                if k > n - 1:
                    k = n - 1
                out[t] = ag_cell[k]
        return out

    kde_logpdf = _kde_logpdf_nb
    td_update = _td_update_nb
    relabel_goals = _relabel_goals_nb
else:
    kde_logpdf = kde_logpdf_numpy
    td_update = td_update_numpy
    relabel_goals = relabel_goals_numpy
