"""Compiled event loop for the stochastic coalescence simulator.

The loop consumes uniforms from a caller-supplied buffer in fixed groups of
four per candidate event (waiting time, first index, second index,
acceptance), so the trajectory depends only on the random stream and not on
how the stream is chunked.
"""

import math

import numpy as np
from numba import njit

STATUS_TARGET = 0
STATUS_BUFFER = 1
STATUS_SINGLE = 2
STATUS_MAX_EVENTS = 3
STATUS_VIOLATION = 4

# slots of the float ``stats`` array
MAX_P, MAX_R, MAX_V, MAX_M = 0, 1, 2, 3
# slots of the int ``counters`` array
SINCE_REFRESH, REFRESH_EVERY, LOG_LEN = 0, 1, 2

UNIFORMS_PER_CANDIDATE = 4
# Relative inflation of the geometric majorants; guards against a kernel value
# rounding one ulp above its bound (thinning stays exact for any upper bound).
SAFETY = 1.0 + 1e-12


@njit(cache=True, nogil=True)
def _mass_rate(form, m1, m2):
    if form == 0:
        return 1.0
    if form == 1:
        return m1 + m2
    return m1 * m2


@njit(cache=True, nogil=True)
def _rate(code, gamma, form, m, p, i, j):
    d = p.shape[1]
    if code == 0:
        return 1.0
    if code == 1:
        s = 0.0
        for k in range(d):
            x = p[i, k] - p[j, k]
            s += x * x
        return math.sqrt(s) ** gamma
    if code == 2:
        s = 0.0
        for k in range(d):
            x = p[i, k] / m[i] - p[j, k] / m[j]
            s += x * x
        r = np.cbrt(m[i]) + np.cbrt(m[j])
        return r * r * math.sqrt(s)
    return _mass_rate(form, m[i], m[j])


@njit(cache=True, nogil=True)
def _majorant(code, gamma, form, bound, stats):
    if code == 0:
        return 1.0
    if code == 1:
        return SAFETY * (2.0 * stats[MAX_P]) ** gamma
    if code == 2:
        r = 2.0 * stats[MAX_R]
        return SAFETY * r * r * (2.0 * stats[MAX_V])
    if bound > 0.0:
        return bound
    return _mass_rate(form, stats[MAX_M], stats[MAX_M])


@njit(cache=True, nogil=True)
def refresh_stats(m, p, n, stats):
    """Recompute max|p| and max|v| exactly over the live particles."""
    d = p.shape[1]
    mp = 0.0
    mv = 0.0
    for i in range(n):
        s = 0.0
        for k in range(d):
            s += p[i, k] * p[i, k]
        a = math.sqrt(s)
        if a > mp:
            mp = a
        if a / m[i] > mv:
            mv = a / m[i]
    stats[MAX_P] = mp
    stats[MAX_V] = mv


@njit(cache=True, nogil=True)
def full_stats(m, p, n, stats):
    refresh_stats(m, p, n, stats)
    mm = 0.0
    for i in range(n):
        if m[i] > mm:
            mm = m[i]
    stats[MAX_M] = mm
    stats[MAX_R] = np.cbrt(mm)


@njit(cache=True, nogil=True)
def advance(m, p, n, n0, t, t_target, code, gamma, form, bound, stats, counters,
            u, pos, max_events, log_t, log_i, log_j):
    """Advance the system until ``t_target``, buffer exhaustion or ``max_events``.

    Returns ``(n, t, pos, events, status)``; the arrays are updated in place.
    """
    d = p.shape[1]
    events = 0
    nu = u.shape[0]
    cap = log_t.shape[0]
    while True:
        if n < 2:
            return n, t_target, pos, events, STATUS_SINGLE
        if events >= max_events:
            return n, t, pos, events, STATUS_MAX_EVENTS
        if pos + UNIFORMS_PER_CANDIDATE > nu:
            return n, t, pos, events, STATUS_BUFFER
        u0 = u[pos]
        u1 = u[pos + 1]
        u2 = u[pos + 2]
        u3 = u[pos + 3]
        pos += UNIFORMS_PER_CANDIDATE

        lam = _majorant(code, gamma, form, bound, stats)
        rtot = 0.5 * n * (n - 1) * lam / n0
        if rtot <= 0.0:
            return n, t_target, pos, events, STATUS_TARGET
        tau = -math.log1p(-u0) / rtot
        if t + tau > t_target:
            return n, t_target, pos, events, STATUS_TARGET
        t += tau

        i = int(u1 * n)
        j = int(u2 * (n - 1))
        if j >= i:
            j += 1
        a = _rate(code, gamma, form, m, p, i, j)
        if a > lam:
            return n, t, pos, events, STATUS_VIOLATION
        if u3 * lam >= a:
            continue

        if counters[LOG_LEN] < cap:
            k = counters[LOG_LEN]
            log_t[k] = t
            log_i[k] = i
            log_j[k] = j
            counters[LOG_LEN] = k + 1

        m[i] = m[i] + m[j]
        s = 0.0
        for k in range(d):
            p[i, k] = p[i, k] + p[j, k]
            s += p[i, k] * p[i, k]
        # max|p| and max m only need upward revision; max|v| never grows
        a = math.sqrt(s)
        if a > stats[MAX_P]:
            stats[MAX_P] = a
        if m[i] > stats[MAX_M]:
            stats[MAX_M] = m[i]
            stats[MAX_R] = np.cbrt(m[i])
        last = n - 1
        if j != last:
            m[j] = m[last]
            for k in range(d):
                p[j, k] = p[last, k]
        n -= 1
        events += 1
        counters[SINCE_REFRESH] += 1
        if counters[SINCE_REFRESH] >= counters[REFRESH_EVERY]:
            refresh_stats(m, p, n, stats)
            counters[SINCE_REFRESH] = 0
