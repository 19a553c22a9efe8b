"""Hot numeric kernels.

Each kernel has a numba ``@njit`` build and a pure numpy/python fallback.
Set ``BDMEC_DISABLE_NUMBA=1`` before import to force the fallback path
(useful for debugging and for the kernel benchmark). The Laplace transform
runs on numpy in both modes; its compiled loop was slower.
"""

import os

import numpy as np

_DISABLED = os.environ.get("BDMEC_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError("numba disabled by BDMEC_DISABLE_NUMBA")
    import numba

    NUMBA_ENABLED = True
except ImportError:
    numba = None
    NUMBA_ENABLED = False

_TINY = np.finfo(np.float64).tiny


def _maybe_njit(fn):
    if NUMBA_ENABLED:
        return numba.njit(cache=True)(fn)
    return fn


# --------------------------------------------------------------------------
# Laplace inverse CDF


def _laplace_from_uniform_numpy(u, scale):
    # u is uniform on [-0.5, 0.5)
    tail = np.maximum(1.0 - 2.0 * np.abs(u), _TINY)
    return -scale * np.sign(u) * np.log(tail)


def _laplace_from_uniform_loop(u, scale):
    out = np.empty(u.shape[0], dtype=np.float64)
    for i in range(u.shape[0]):
        ui = u[i]
        tail = 1.0 - 2.0 * abs(ui)
        if tail < 2.2250738585072014e-308:
            tail = 2.2250738585072014e-308
        if ui > 0.0:
            out[i] = -scale * np.log(tail)
        elif ui < 0.0:
            out[i] = scale * np.log(tail)
        else:
            out[i] = 0.0
    return out


# --------------------------------------------------------------------------
# Rank outcome counting for the precision experiment


def _rank_outcomes_numpy(noisy, target, true_rank):
    """Count (tp, fn, up) for ``target`` over rows of ``noisy``.

    Columns must already be in tie-break order (lexicographic worker id), so a
    lower column index wins a tie.
    """
    col = noisy[:, target][:, None]
    above = noisy > col
    ties_before = noisy[:, :target] == col
    rank = 1 + above.sum(axis=1) + ties_before.sum(axis=1)
    tp = int(np.count_nonzero(rank == true_rank))
    fn = int(np.count_nonzero(rank > true_rank))
    return tp, fn, noisy.shape[0] - tp - fn


def _rank_outcomes_loop(noisy, target, true_rank):
    tp = 0
    fn = 0
    up = 0
    n_trials, n_workers = noisy.shape
    for t in range(n_trials):
        v = noisy[t, target]
        rank = 1
        for j in range(n_workers):
            if noisy[t, j] > v or (j < target and noisy[t, j] == v):
                rank += 1
        if rank == true_rank:
            tp += 1
        elif rank > true_rank:
            fn += 1
        else:
            up += 1
    return tp, fn, up


# --------------------------------------------------------------------------
# Work-stealing schedule


def _steal_schedule(cost, payload, result, rate, bandwidth, latency, delay,
                    chunk, start, horizon):
    """Greedy shared-queue schedule.

    Consumer 0 is the delegator (one job at a time, no transfers); consumers
    1.. are workers. The consumer with the earliest free time takes next from
    the FIFO queue; ties go to the lowest index. A worker whose previous result
    arrives after ``horizon`` stops stealing and that chunk is lost; lost jobs
    are re-run by the delegator once the queue is drained.

    Returns per-chunk arrays
    (owner, lo, hi, steal_t, in_end, comp_end, result_t, lost, recovery)
    where the chunk covers queue positions ``lo:hi``.
    """
    n = cost.shape[0]
    k = rate.shape[0]
    cap = 2 * n + 1
    owner = np.empty(cap, dtype=np.int64)
    lo_a = np.empty(cap, dtype=np.int64)
    hi_a = np.empty(cap, dtype=np.int64)
    steal_t = np.empty(cap, dtype=np.float64)
    in_end = np.empty(cap, dtype=np.float64)
    comp_end = np.empty(cap, dtype=np.float64)
    result_t = np.empty(cap, dtype=np.float64)
    lost = np.zeros(cap, dtype=np.bool_)
    recovery = np.zeros(cap, dtype=np.bool_)

    free = np.empty(k, dtype=np.float64)
    for c in range(k):
        free[c] = start
    # delegator runs back to back, so its clock is start + running cost / rate
    dcum = 0.0
    nxt = 0
    m = 0
    while nxt < n:
        best = -1
        best_t = 0.0
        for c in range(k):
            if c > 0 and free[c] > horizon:
                continue
            if best < 0 or free[c] < best_t:
                best = c
                best_t = free[c]
        t = best_t
        if best == 0:
            size = 1
        else:
            size = chunk
            if n - nxt < size:
                size = n - nxt
        lo = nxt
        hi = nxt + size
        nxt = hi
        sc = 0.0
        for j in range(lo, hi):
            sc += cost[j]
        owner[m] = best
        lo_a[m] = lo
        hi_a[m] = hi
        steal_t[m] = t
        if best == 0:
            dcum += sc
            done = start + dcum / rate[0]
            in_end[m] = t
            comp_end[m] = done
            result_t[m] = done
            free[0] = done
        else:
            sp = 0.0
            sr = 0.0
            for j in range(lo, hi):
                sp += payload[j]
                sr += result[j]
            a = t + (sp / bandwidth[best] + latency[best])
            b = a + sc / rate[best]
            r = b + (sr / bandwidth[best] + latency[best] + delay[best])
            in_end[m] = a
            comp_end[m] = b
            result_t[m] = r
            free[best] = r
            if r > horizon:
                lost[m] = True
        m += 1

    # re-run lost jobs on the delegator, in queue order
    n_main = m
    t = free[0]
    if t < horizon:
        any_lost = False
        for i in range(n_main):
            if lost[i]:
                any_lost = True
        if any_lost:
            t = horizon
    seg = t
    dcum = 0.0
    for i in range(n_main):
        if lost[i]:
            for j in range(lo_a[i], hi_a[i]):
                dcum += cost[j]
                done = seg + dcum / rate[0]
                owner[m] = 0
                lo_a[m] = j
                hi_a[m] = j + 1
                steal_t[m] = t
                in_end[m] = t
                comp_end[m] = done
                result_t[m] = done
                recovery[m] = True
                t = done
                m += 1

    return (owner[:m], lo_a[:m], hi_a[:m], steal_t[:m], in_end[:m],
            comp_end[:m], result_t[:m], lost[:m], recovery[:m])


# numpy's vectorized log beats the compiled scalar loop here (see the
# kernel benchmark), so the loop build is kept for comparison only
laplace_from_uniform = _laplace_from_uniform_numpy
laplace_from_uniform_jit = _maybe_njit(_laplace_from_uniform_loop)

if NUMBA_ENABLED:
    rank_outcomes = _maybe_njit(_rank_outcomes_loop)
else:
    rank_outcomes = _rank_outcomes_numpy

steal_schedule = _maybe_njit(_steal_schedule)

# pure paths, always importable (benchmarks and cross-checks)
laplace_from_uniform_numpy = _laplace_from_uniform_numpy
rank_outcomes_numpy = _rank_outcomes_numpy
steal_schedule_python = _steal_schedule
