"""LSTM recurrence kernels over packed batches.

A packed batch stacks utterances along axis 0; ``offsets`` (n+1 ints) marks
their boundaries.  Gate layout along the last axis is (input, forget,
output, candidate).  ``xproj`` already holds ``x @ Wx + b`` so only the
recurrent part runs inside the time loop.
"""
import math

import numpy as np

from .._accel import USE_NUMBA, njit


@njit
def _sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@njit
def lstm_forward_loops(xproj, Wh, offsets, reverse, h, c, gates):
    H = Wh.shape[0]
    z = np.empty(4 * H)
    for u in range(offsets.shape[0] - 1):
        start = offsets[u]
        T = offsets[u + 1] - start
        for step in range(T):
            t = start + (T - 1 - step if reverse else step)
            p = t + 1 if reverse else t - 1
            for j in range(4 * H):
                z[j] = xproj[t, j]
            if step > 0:
                for k in range(H):
                    hk = h[p, k]
                    if hk != 0.0:
                        for j in range(4 * H):
                            z[j] += hk * Wh[k, j]
            for k in range(H):
                i_g = _sigmoid(z[k])
                f_g = _sigmoid(z[H + k])
                o_g = _sigmoid(z[2 * H + k])
                g_g = math.tanh(z[3 * H + k])
                c_prev = c[p, k] if step > 0 else 0.0
                ck = f_g * c_prev + i_g * g_g
                c[t, k] = ck
                h[t, k] = o_g * math.tanh(ck)
                gates[t, k] = i_g
                gates[t, H + k] = f_g
                gates[t, 2 * H + k] = o_g
                gates[t, 3 * H + k] = g_g


@njit
def lstm_backward_loops(dh, gates, c, h, Wh, offsets, reverse, dz, dWh):
    H = Wh.shape[0]
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for u in range(offsets.shape[0] - 1):
        start = offsets[u]
        T = offsets[u + 1] - start
        for k in range(H):
            dh_next[k] = 0.0
            dc_next[k] = 0.0
        for step in range(T - 1, -1, -1):
            t = start + (T - 1 - step if reverse else step)
            p = t + 1 if reverse else t - 1
            for k in range(H):
                i_g = gates[t, k]
                f_g = gates[t, H + k]
                o_g = gates[t, 2 * H + k]
                g_g = gates[t, 3 * H + k]
                tc = math.tanh(c[t, k])
                dht = dh[t, k] + dh_next[k]
                dct = dht * o_g * (1.0 - tc * tc) + dc_next[k]
                c_prev = c[p, k] if step > 0 else 0.0
                dz[t, k] = dct * g_g * i_g * (1.0 - i_g)
                dz[t, H + k] = dct * c_prev * f_g * (1.0 - f_g)
                dz[t, 2 * H + k] = dht * tc * o_g * (1.0 - o_g)
                dz[t, 3 * H + k] = dct * i_g * (1.0 - g_g * g_g)
                dc_next[k] = dct * f_g
            for k in range(H):
                acc = 0.0
                for j in range(4 * H):
                    acc += dz[t, j] * Wh[k, j]
                dh_next[k] = acc
            if step > 0:
                for k in range(H):
                    hk = h[p, k]
                    if hk != 0.0:
                        for j in range(4 * H):
                            dWh[k, j] += hk * dz[t, j]


def _sig(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _step_rows(offsets, step, reverse):
    starts = offsets[:-1]
    lengths = np.diff(offsets)
    active = np.flatnonzero(lengths > step)
    if reverse:
        rows = offsets[1:][active] - 1 - step
    else:
        rows = starts[active] + step
    return active, rows


def lstm_forward_numpy(xproj, Wh, offsets, reverse, h, c, gates):
    H = Wh.shape[0]
    n = len(offsets) - 1
    h_state = np.zeros((n, H))
    c_state = np.zeros((n, H))
    max_T = int(np.diff(offsets).max()) if n else 0
    for step in range(max_T):
        active, rows = _step_rows(offsets, step, reverse)
        z = xproj[rows] + h_state[active] @ Wh
        i_g = _sig(z[:, :H])
        f_g = _sig(z[:, H:2 * H])
        o_g = _sig(z[:, 2 * H:3 * H])
        g_g = np.tanh(z[:, 3 * H:])
        ct = f_g * c_state[active] + i_g * g_g
        ht = o_g * np.tanh(ct)
        c[rows] = ct
        h[rows] = ht
        gates[rows] = np.concatenate([i_g, f_g, o_g, g_g], axis=1)
        c_state[active] = ct
        h_state[active] = ht


def lstm_backward_numpy(dh, gates, c, h, Wh, offsets, reverse, dz, dWh):
    H = Wh.shape[0]
    n = len(offsets) - 1
    dh_next = np.zeros((n, H))
    dc_next = np.zeros((n, H))
    max_T = int(np.diff(offsets).max()) if n else 0
    for step in range(max_T - 1, -1, -1):
        active, rows = _step_rows(offsets, step, reverse)
        g4 = gates[rows]
        i_g, f_g, o_g, g_g = g4[:, :H], g4[:, H:2 * H], g4[:, 2 * H:3 * H], g4[:, 3 * H:]
        tc = np.tanh(c[rows])
        dht = dh[rows] + dh_next[active]
        dct = dht * o_g * (1.0 - tc * tc) + dc_next[active]
        if step > 0:
            prev = rows + 1 if reverse else rows - 1
            c_prev, h_prev = c[prev], h[prev]
        else:
            c_prev = h_prev = np.zeros_like(dct)
        d = np.concatenate([
            dct * g_g * i_g * (1.0 - i_g),
            dct * c_prev * f_g * (1.0 - f_g),
            dht * tc * o_g * (1.0 - o_g),
            dct * i_g * (1.0 - g_g * g_g),
        ], axis=1)
        dz[rows] = d
        dc_next[active] = dct * f_g
        dh_next[active] = d @ Wh.T
        dWh += h_prev.T @ d


if USE_NUMBA:
    lstm_forward = lstm_forward_loops
    lstm_backward = lstm_backward_loops
else:
    lstm_forward = lstm_forward_numpy
    lstm_backward = lstm_backward_numpy
