"""Pure-numpy LSTM sequence kernels (fallback backend).

Gate layout in all [*, 4H] arrays is (input, forget, cell, output).
Masked steps emit a zero output and leave the recurrent state untouched,
so padding anywhere in the sequence cannot leak into real positions.
"""

import numpy as np


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_forward(x, mask, W, U, b):
    """Run an LSTM over a sequence.

    x: [T, D] float64, mask: [T] uint8, W: [D, 4H], U: [H, 4H], b: [4H].
    Returns (h_out [T, H], gates [T, 4H] post-activation, h_states [T+1, H],
    c_states [T+1, H]); states index t is the state *before* step t.
    """
    T = x.shape[0]
    H = U.shape[0]
    h_out = np.zeros((T, H))
    gates = np.zeros((T, 4 * H))
    h_states = np.zeros((T + 1, H))
    c_states = np.zeros((T + 1, H))
    for t in range(T):
        if not mask[t]:
            h_states[t + 1] = h_states[t]
            c_states[t + 1] = c_states[t]
            continue
        a = x[t] @ W + h_states[t] @ U + b
        i = _sigmoid(a[:H])
        f = _sigmoid(a[H:2 * H])
        g = np.tanh(a[2 * H:3 * H])
        o = _sigmoid(a[3 * H:])
        c = f * c_states[t] + i * g
        h = o * np.tanh(c)
        gates[t, :H], gates[t, H:2 * H], gates[t, 2 * H:3 * H], gates[t, 3 * H:] = i, f, g, o
        c_states[t + 1] = c
        h_states[t + 1] = h
        h_out[t] = h
    return h_out, gates, h_states, c_states


def lstm_backward(x, mask, W, U, gates, h_states, c_states, dh_out):
    """Backprop through lstm_forward.

    dh_out: [T, H] gradient w.r.t. the per-step outputs.
    Returns (dx [T, D], dW, dU, db).
    """
    T, D = x.shape
    H = U.shape[0]
    dx = np.zeros((T, D))
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(4 * H)
    dh = np.zeros(H)  # gradient flowing into the state after step t
    dc = np.zeros(H)
    for t in range(T - 1, -1, -1):
        if not mask[t]:
            continue
        i = gates[t, :H]
        f = gates[t, H:2 * H]
        g = gates[t, 2 * H:3 * H]
        o = gates[t, 3 * H:]
        c = c_states[t + 1]
        tc = np.tanh(c)
        dh_t = dh + dh_out[t]
        do = dh_t * tc
        dc_t = dh_t * o * (1.0 - tc * tc) + dc
        di = dc_t * g
        df = dc_t * c_states[t]
        dg = dc_t * i
        dc = dc_t * f
        da = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ])
        dx[t] = da @ W.T
        dW += np.outer(x[t], da)
        dU += np.outer(h_states[t], da)
        db += da
        dh = da @ U.T
    return dx, dW, dU, db
