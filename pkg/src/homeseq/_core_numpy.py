"""Pure-numpy LSTM sequence kernels (fallback backend).

All kernels share the layout: gate pre-activations are one (B, 4H) block
per step ordered [input | forget | candidate | output]; ``idx`` holds
token indices with -1 meaning the start/padding token, whose one-hot is
the zero vector.  Initial hidden and cell states are zero.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _gather_rows(weight_pad, idx_t):
    # weight_pad has a zero row prepended, so index -1 maps to row 0
    return weight_pad[idx_t + 1]


def _forward(Wx, Wh, b, idx, keep_cache):
    B, L = idx.shape
    H = Wh.shape[0]
    Wx_pad = np.vstack([np.zeros((1, Wx.shape[1]), dtype=Wx.dtype), Wx])
    h = np.zeros((B, H), dtype=Wx.dtype)
    c = np.zeros((B, H), dtype=Wx.dtype)
    cache = [] if keep_cache else None
    for t in range(L):
        z = _gather_rows(Wx_pad, idx[:, t]) + h @ Wh + b
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c_prev = c
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h_prev = h
        h = o * tc
        if keep_cache:
            cache.append((i, f, g, o, c_prev, tc, h_prev))
    return h, cache


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=1, keepdims=True)


def lstm_probs(Wx, Wh, b, Wy, by, idx):
    """Softmax output probabilities, shape (B, V_out)."""
    h, _ = _forward(Wx, Wh, b, idx, keep_cache=False)
    return _softmax(h @ Wy + by)


def lstm_loss(Wx, Wh, b, Wy, by, idx, targets):
    """Mean categorical cross-entropy of the batch."""
    probs = lstm_probs(Wx, Wh, b, Wy, by, idx)
    picked = probs[np.arange(len(targets)), targets]
    return float(-np.log(picked).mean())


def lstm_loss_grads(Wx, Wh, b, Wy, by, idx, targets):
    """Loss plus full backpropagation-through-time gradients."""
    B, L = idx.shape
    H = Wh.shape[0]
    h_final, cache = _forward(Wx, Wh, b, idx, keep_cache=True)
    probs = _softmax(h_final @ Wy + by)
    picked = probs[np.arange(B), targets]
    loss = float(-np.log(picked).mean())

    dlogits = probs.copy()
    dlogits[np.arange(B), targets] -= 1.0
    dlogits /= B

    dWy = h_final.T @ dlogits
    dby = dlogits.sum(axis=0)
    dh = dlogits @ Wy.T
    dc = np.zeros((B, H), dtype=Wx.dtype)

    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros_like(b)
    dz = np.empty((B, 4 * H), dtype=Wx.dtype)
    for t in range(L - 1, -1, -1):
        i, f, g, o, c_prev, tc, h_prev = cache[t]
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        dz[:, 3 * H:] = do * o * (1.0 - o)
        dc = dc * f
        dWh += h_prev.T @ dz
        db += dz.sum(axis=0)
        idx_t = idx[:, t]
        live = idx_t >= 0
        np.add.at(dWx, idx_t[live], dz[live])
        dh = dz @ Wh.T
    return loss, (dWx, dWh, db, dWy, dby)
