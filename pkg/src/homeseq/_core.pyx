# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled LSTM sequence kernels (float64).

Same contracts as homeseq._core_numpy: fused elementwise gate math with
BLAS matrix products, full-sequence forward/backward in a single call.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, tanh
from scipy.linalg.cython_blas cimport dgemm

ctypedef cnp.int64_t i64


cdef inline double sigmoid(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef inline void mm_nn(double* A, double* B, double* C,
                       int m, int n, int k, double beta) noexcept nogil:
    # row-major C (m,n) = A (m,k) @ B (k,n) + beta * C
    cdef char t = b'N'
    cdef double alpha = 1.0
    dgemm(&t, &t, &n, &m, &k, &alpha, B, &n, A, &k, &beta, C, &n)


cdef inline void mm_nt(double* A, double* B, double* C,
                       int m, int n, int k, double beta) noexcept nogil:
    # row-major C (m,n) = A (m,k) @ B(n,k)^T + beta * C
    cdef char tt = b'T'
    cdef char tn = b'N'
    cdef double alpha = 1.0
    dgemm(&tt, &tn, &n, &m, &k, &alpha, B, &k, A, &k, &beta, C, &n)


cdef inline void mm_tn(double* A, double* B, double* C,
                       int m, int n, int k, double beta) noexcept nogil:
    # row-major C (m,n) = A(k,m)^T @ B (k,n) + beta * C
    cdef char tt = b'T'
    cdef char tn = b'N'
    cdef double alpha = 1.0
    dgemm(&tn, &tt, &n, &m, &k, &alpha, B, &n, A, &m, &beta, C, &n)


cdef void _forward(double[:, ::1] Wx, double[:, ::1] Wh, double[::1] b,
                   i64[:, ::1] idx,
                   double[:, :, ::1] G, double[:, :, ::1] C,
                   double[:, :, ::1] TC, double[:, :, ::1] Hs) noexcept nogil:
    """Run all steps; G ends up holding the *activated* gates per step."""
    cdef Py_ssize_t B = idx.shape[0]
    cdef Py_ssize_t L = idx.shape[1]
    cdef Py_ssize_t H = Wh.shape[0]
    cdef Py_ssize_t G4 = 4 * H
    cdef Py_ssize_t t, bi, u
    cdef i64 j
    cdef double gi, gf, gg, go, cp, cc, tc_
    for bi in range(B):
        for u in range(H):
            Hs[0, bi, u] = 0.0
    for t in range(L):
        for bi in range(B):
            j = idx[bi, t]
            if j >= 0:
                for u in range(G4):
                    G[t, bi, u] = Wx[j, u] + b[u]
            else:
                for u in range(G4):
                    G[t, bi, u] = b[u]
        mm_nn(&Hs[t, 0, 0], &Wh[0, 0], &G[t, 0, 0],
              <int> B, <int> G4, <int> H, 1.0)
        for bi in range(B):
            for u in range(H):
                gi = sigmoid(G[t, bi, u])
                gf = sigmoid(G[t, bi, H + u])
                gg = tanh(G[t, bi, 2 * H + u])
                go = sigmoid(G[t, bi, 3 * H + u])
                cp = C[t - 1, bi, u] if t > 0 else 0.0
                cc = gf * cp + gi * gg
                C[t, bi, u] = cc
                tc_ = tanh(cc)
                TC[t, bi, u] = tc_
                Hs[t + 1, bi, u] = go * tc_
                G[t, bi, u] = gi
                G[t, bi, H + u] = gf
                G[t, bi, 2 * H + u] = gg
                G[t, bi, 3 * H + u] = go


cdef double _output(double[:, :, ::1] Hs, double[:, ::1] Wy, double[::1] by,
                    i64[::1] targets, double[:, ::1] probs,
                    bint with_loss) noexcept nogil:
    """Softmax over the final hidden state; mean NLL when targets given."""
    cdef Py_ssize_t B = probs.shape[0]
    cdef Py_ssize_t V = probs.shape[1]
    cdef Py_ssize_t H = Wy.shape[0]
    cdef Py_ssize_t L = Hs.shape[0] - 1
    cdef Py_ssize_t bi, v
    cdef double mx, s, loss = 0.0
    for bi in range(B):
        for v in range(V):
            probs[bi, v] = by[v]
    mm_nn(&Hs[L, 0, 0], &Wy[0, 0], &probs[0, 0], <int> B, <int> V, <int> H, 1.0)
    for bi in range(B):
        mx = probs[bi, 0]
        for v in range(1, V):
            if probs[bi, v] > mx:
                mx = probs[bi, v]
        s = 0.0
        for v in range(V):
            probs[bi, v] = exp(probs[bi, v] - mx)
            s += probs[bi, v]
        for v in range(V):
            probs[bi, v] /= s
        if with_loss:
            loss -= log(probs[bi, targets[bi]])
    return loss / B if with_loss else 0.0


def lstm_probs(Wx, Wh, b, Wy, by, idx):
    """Softmax output probabilities, shape (B, V_out)."""
    cdef Py_ssize_t B = idx.shape[0]
    cdef Py_ssize_t L = idx.shape[1]
    cdef Py_ssize_t H = Wh.shape[0]
    G = np.empty((L, B, 4 * H))
    C = np.empty((L, B, H))
    TC = np.empty((L, B, H))
    Hs = np.empty((L + 1, B, H))
    probs = np.empty((B, Wy.shape[1]))
    cdef double[:, ::1] Wx_v = Wx, Wh_v = Wh, Wy_v = Wy, probs_v = probs
    cdef double[::1] b_v = b, by_v = by
    cdef i64[:, ::1] idx_v = idx
    cdef double[:, :, ::1] G_v = G, C_v = C, TC_v = TC, Hs_v = Hs
    cdef i64[::1] dummy = np.zeros(1, dtype=np.int64)
    with nogil:
        _forward(Wx_v, Wh_v, b_v, idx_v, G_v, C_v, TC_v, Hs_v)
        _output(Hs_v, Wy_v, by_v, dummy, probs_v, False)
    return probs


def lstm_loss(Wx, Wh, b, Wy, by, idx, targets):
    """Mean categorical cross-entropy of the batch."""
    cdef Py_ssize_t B = idx.shape[0]
    cdef Py_ssize_t L = idx.shape[1]
    cdef Py_ssize_t H = Wh.shape[0]
    G = np.empty((L, B, 4 * H))
    C = np.empty((L, B, H))
    TC = np.empty((L, B, H))
    Hs = np.empty((L + 1, B, H))
    probs = np.empty((B, Wy.shape[1]))
    cdef double[:, ::1] Wx_v = Wx, Wh_v = Wh, Wy_v = Wy, probs_v = probs
    cdef double[::1] b_v = b, by_v = by
    cdef i64[:, ::1] idx_v = idx
    cdef i64[::1] targets_v = targets
    cdef double[:, :, ::1] G_v = G, C_v = C, TC_v = TC, Hs_v = Hs
    cdef double loss
    with nogil:
        _forward(Wx_v, Wh_v, b_v, idx_v, G_v, C_v, TC_v, Hs_v)
        loss = _output(Hs_v, Wy_v, by_v, targets_v, probs_v, True)
    return loss


def lstm_loss_grads(Wx, Wh, b, Wy, by, idx, targets):
    """Loss plus full backpropagation-through-time gradients."""
    cdef Py_ssize_t B = idx.shape[0]
    cdef Py_ssize_t L = idx.shape[1]
    cdef Py_ssize_t H = Wh.shape[0]
    cdef Py_ssize_t V = Wy.shape[1]
    G = np.empty((L, B, 4 * H))
    C = np.empty((L, B, H))
    TC = np.empty((L, B, H))
    Hs = np.empty((L + 1, B, H))
    probs = np.empty((B, V))
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros_like(b)
    dWy = np.empty_like(Wy)
    dby = np.zeros_like(by)
    dh = np.empty((B, H))
    dcell = np.zeros((B, H))

    cdef double[:, ::1] Wx_v = Wx, Wh_v = Wh, Wy_v = Wy, probs_v = probs
    cdef double[::1] b_v = b, by_v = by
    cdef i64[:, ::1] idx_v = idx
    cdef i64[::1] targets_v = targets
    cdef double[:, :, ::1] G_v = G, C_v = C, TC_v = TC, Hs_v = Hs
    cdef double[:, ::1] dWx_v = dWx, dWh_v = dWh, dWy_v = dWy
    cdef double[::1] db_v = db, dby_v = dby
    cdef double[:, ::1] dh_v = dh, dc_v = dcell

    cdef double loss
    cdef Py_ssize_t t, bi, u, v
    cdef i64 j
    cdef double gi, gf, gg, go, tc_, cp, dcell_u, do_
    with nogil:
        _forward(Wx_v, Wh_v, b_v, idx_v, G_v, C_v, TC_v, Hs_v)
        loss = _output(Hs_v, Wy_v, by_v, targets_v, probs_v, True)
        # probs becomes dlogits in place
        for bi in range(B):
            probs_v[bi, targets_v[bi]] -= 1.0
            for v in range(V):
                probs_v[bi, v] /= B
                dby_v[v] += probs_v[bi, v]
        mm_tn(&Hs_v[L, 0, 0], &probs_v[0, 0], &dWy_v[0, 0],
              <int> H, <int> V, <int> B, 0.0)
        mm_nt(&probs_v[0, 0], &Wy_v[0, 0], &dh_v[0, 0],
              <int> B, <int> H, <int> V, 0.0)
        for t in range(L - 1, -1, -1):
            for bi in range(B):
                for u in range(H):
                    gi = G_v[t, bi, u]
                    gf = G_v[t, bi, H + u]
                    gg = G_v[t, bi, 2 * H + u]
                    go = G_v[t, bi, 3 * H + u]
                    tc_ = TC_v[t, bi, u]
                    cp = C_v[t - 1, bi, u] if t > 0 else 0.0
                    do_ = dh_v[bi, u] * tc_
                    dcell_u = dc_v[bi, u] + dh_v[bi, u] * go * (1.0 - tc_ * tc_)
                    G_v[t, bi, u] = dcell_u * gg * gi * (1.0 - gi)
                    G_v[t, bi, H + u] = dcell_u * cp * gf * (1.0 - gf)
                    G_v[t, bi, 2 * H + u] = dcell_u * gi * (1.0 - gg * gg)
                    G_v[t, bi, 3 * H + u] = do_ * go * (1.0 - go)
                    dc_v[bi, u] = dcell_u * gf
            mm_tn(&Hs_v[t, 0, 0], &G_v[t, 0, 0], &dWh_v[0, 0],
                  <int> H, <int> (4 * H), <int> B, 1.0)
            for bi in range(B):
                j = idx_v[bi, t]
                for u in range(4 * H):
                    db_v[u] += G_v[t, bi, u]
                if j >= 0:
                    for u in range(4 * H):
                        dWx_v[j, u] += G_v[t, bi, u]
            mm_nt(&G_v[t, 0, 0], &Wh_v[0, 0], &dh_v[0, 0],
                  <int> B, <int> H, <int> (4 * H), 0.0)
    return loss, (dWx, dWh, db, dWy, dby)
