"""Compiled inner loops for the spin-flip process."""
import math

import numpy as np
from numba import njit

DONE, NEED_RANDOMS, LOG_FULL = 0, 1, 2


@njit(cache=True, nogil=True, inline="always")
def _rate(z):
    if z > 0.0:
        e = math.exp(-z)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(z))


@njit(cache=True, nogil=True, inline="always")
def _apply_flip(s, h, w, sup, x, gamma):
    n = s.size
    old = s[x]
    s[x] = -old
    c = -2.0 * old * gamma
    for j in range(sup.size):
        d = sup[j]
        y = x + d
        if y >= n:
            y -= n
        h[y] += c * w[d]


@njit(cache=True, nogil=True)
def _is_flat(w):
    for d in range(1, w.size):
        if w[d] != w[0]:
            return False
    return True


@njit(cache=True, nogil=True)
def advance(s1, s2, h1, h2, w1, sup1, w2, sup2, beta1, beta2, lam,
            clock, t_stop, waits, picks, us, pos,
            log, ev_t, ev_code, n_ev):
    """Process proposals with time <= t_stop.

    ``clock`` is the time of the pending proposal; ``picks[pos]`` encodes
    line 1 site x as x and line 2 site x as N + x. A flat (uniform) kernel
    shifts the whole field by a constant, which is accumulated in a scalar
    offset and written back on return.
    """
    n = s1.size
    gamma = 1.0 / n
    flat1 = _is_flat(w1)
    flat2 = _is_flat(w2)
    off1 = 0.0
    off2 = 0.0
    status = DONE
    while clock <= t_stop:
        if pos >= waits.size:
            status = NEED_RANDOMS
            break
        if log and n_ev >= ev_t.size:
            status = LOG_FULL
            break
        code = picks[pos]
        if code < n:
            x = code
            a = beta1 * (h1[x] + off1 + lam * s2[x])
            if us[pos] < _rate(2.0 * s1[x] * a):
                if flat1:
                    off1 += -2.0 * s1[x] * gamma * w1[0]
                    s1[x] = -s1[x]
                else:
                    _apply_flip(s1, h1, w1, sup1, x, gamma)
                if log:
                    ev_t[n_ev] = clock
                    ev_code[n_ev] = code
                n_ev += 1
        else:
            x = code - n
            b = beta2 * (h2[x] + off2 - lam * s1[x])
            if us[pos] < _rate(2.0 * s2[x] * b):
                if flat2:
                    off2 += -2.0 * s2[x] * gamma * w2[0]
                    s2[x] = -s2[x]
                else:
                    _apply_flip(s2, h2, w2, sup2, x, gamma)
                if log:
                    ev_t[n_ev] = clock
                    ev_code[n_ev] = code
                n_ev += 1
        clock += waits[pos]
        pos += 1
    if off1 != 0.0:
        h1 += off1
    if off2 != 0.0:
        h2 += off2
    return clock, pos, n_ev, status


@njit(cache=True, nogil=True)
def drift(s1, s2, h1, h2, g, beta1, beta2, lam, which):
    n = s1.size
    acc = 0.0
    bl1 = beta1 * lam
    bl2 = beta2 * lam
    for x in range(n):
        if which == 1:
            tp = math.tanh(beta1 * h1[x] + bl1)
            tm = math.tanh(beta1 * h1[x] - bl1)
            acc += (-s1[x] + 0.5 * (tp + tm) + 0.5 * s2[x] * (tp - tm)) * g[x]
        elif which == 2:
            tp = math.tanh(beta2 * h2[x] + bl2)
            tm = math.tanh(beta2 * h2[x] - bl2)
            acc += (-s2[x] + 0.5 * (tp + tm) - 0.5 * s1[x] * (tp - tm)) * g[x]
        else:
            p1 = math.tanh(beta1 * h1[x] + bl1)
            m1 = math.tanh(beta1 * h1[x] - bl1)
            p2 = math.tanh(beta2 * h2[x] + bl2)
            m2 = math.tanh(beta2 * h2[x] - bl2)
            acc += (-2.0 * s1[x] * s2[x] + 0.5 * (p1 - m1) - 0.5 * (p2 - m2)
                    + 0.5 * s1[x] * (p2 + m2) + 0.5 * s2[x] * (p1 + m1)) * g[x]
    return acc / n


@njit(cache=True, nogil=True)
def _pairing(s1, s2, g, which):
    n = s1.size
    acc = 0.0
    for x in range(n):
        if which == 1:
            acc += s1[x] * g[x]
        elif which == 2:
            acc += s2[x] * g[x]
        else:
            acc += s1[x] * s2[x] * g[x]
    return acc / n


@njit(cache=True, nogil=True)
def martingale_replay(s1, s2, h1, h2, w1, sup1, w2, sup2, beta1, beta2, lam,
                      g, which, ev_t, ev_code, sample_times):
    """M(t) at each sample time; state arrays are consumed (mutated)."""
    n = s1.size
    gamma = 1.0 / n
    out = np.empty(sample_times.size)
    obs0 = _pairing(s1, s2, g, which)
    b = drift(s1, s2, h1, h2, g, beta1, beta2, lam, which)
    integral = 0.0
    t_prev = 0.0
    e = 0
    for i in range(sample_times.size):
        ts = sample_times[i]
        while e < ev_t.size and ev_t[e] <= ts:
            integral += b * (ev_t[e] - t_prev)
            t_prev = ev_t[e]
            code = ev_code[e]
            if code < n:
                _apply_flip(s1, h1, w1, sup1, code, gamma)
            else:
                _apply_flip(s2, h2, w2, sup2, code - n, gamma)
            b = drift(s1, s2, h1, h2, g, beta1, beta2, lam, which)
            e += 1
        out[i] = _pairing(s1, s2, g, which) - obs0 - (integral + b * (ts - t_prev))
    return out
