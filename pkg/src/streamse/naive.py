"""Loop-level reference twins of the numeric kernels.

Deliberately slow and scalar: explicit index arithmetic, float64
accumulation, no vectorization. These exist purely as oracles for the
vectorized kernels and must stay structurally independent of them.
Single-frame shapes only (no batch axes).
"""

from __future__ import annotations

import math

import numpy as np


def conv_freq_naive(x, weights, bias, stride_f=1, padding_f=0):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    k, c_in, c_out = w.shape
    f = x.shape[0]
    f_out = (f + 2 * padding_f - k) // stride_f + 1
    y = np.zeros((f_out, c_out))
    for fo in range(f_out):
        for co in range(c_out):
            acc = 0.0 if bias is None else float(bias[co])
            for kk in range(k):
                fi = fo * stride_f + kk - padding_f
                if 0 <= fi < f:
                    for ci in range(c_in):
                        acc += x[fi, ci] * w[kk, ci, co]
            y[fo, co] = acc
    return y


def deconv_freq_naive(x, weights, bias, stride_f=1, padding_f=None):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    k, c_out, c_in = w.shape
    if padding_f is None:
        padding_f = (k - 1) // 2
    f = x.shape[0]
    f_out = (f - 1) * stride_f + k - 2 * padding_f
    y = np.zeros((f_out, c_out))
    for fi in range(f):
        for kk in range(k):
            fo = fi * stride_f + kk - padding_f
            if 0 <= fo < f_out:
                for co in range(c_out):
                    for ci in range(c_in):
                        y[fo, co] += x[fi, ci] * w[kk, co, ci]
    if bias is not None:
        for co in range(c_out):
            y[:, co] += float(bias[co])
    return y


def _sig(v):
    return 1.0 / (1.0 + math.exp(-v)) if v >= 0 else math.exp(v) / (1.0 + math.exp(v))


def gru_step_naive(x, h, w_ih, w_hh, b_ih, b_hh):
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    hidden = h.shape[0]
    out = np.zeros(hidden)
    for j in range(hidden):
        gr = float(b_ih[j]) + float(b_hh[j])
        gz = float(b_ih[hidden + j]) + float(b_hh[hidden + j])
        gn_x = float(b_ih[2 * hidden + j])
        gn_h = float(b_hh[2 * hidden + j])
        for i in range(x.shape[0]):
            gr += w_ih[j, i] * x[i]
            gz += w_ih[hidden + j, i] * x[i]
            gn_x += w_ih[2 * hidden + j, i] * x[i]
        for i in range(hidden):
            gr += w_hh[j, i] * h[i]
            gz += w_hh[hidden + j, i] * h[i]
            gn_h += w_hh[2 * hidden + j, i] * h[i]
        r = _sig(gr)
        z = _sig(gz)
        n = math.tanh(gn_x + r * gn_h)
        out[j] = (1.0 - z) * n + z * h[j]
    return out


def mhsa_freq_naive(x, wq, wk, wv, wo, bq, bk, bv, bo, n_heads):
    x = np.asarray(x, dtype=np.float64)
    f, c = x.shape
    d = c // n_heads
    q = x @ np.asarray(wq, dtype=np.float64).T + np.asarray(bq, dtype=np.float64)
    k = x @ np.asarray(wk, dtype=np.float64).T + np.asarray(bk, dtype=np.float64)
    v = x @ np.asarray(wv, dtype=np.float64).T + np.asarray(bv, dtype=np.float64)
    mixed = np.zeros((f, c))
    for head in range(n_heads):
        lo, hi = head * d, (head + 1) * d
        for fi in range(f):
            scores = np.zeros(f)
            for fj in range(f):
                s = 0.0
                for dd in range(lo, hi):
                    s += q[fi, dd] * k[fj, dd]
                scores[fj] = s / math.sqrt(d)
            scores -= scores.max()
            weights = np.exp(scores)
            weights /= weights.sum()
            for fj in range(f):
                for dd in range(lo, hi):
                    mixed[fi, dd] += weights[fj] * v[fj, dd]
    return mixed @ np.asarray(wo, dtype=np.float64).T + np.asarray(bo, dtype=np.float64)


def batchnorm_infer_naive(x, gamma, beta, mean, var, eps):
    x = np.asarray(x, dtype=np.float64)
    y = np.zeros_like(x)
    for fi in range(x.shape[0]):
        for ci in range(x.shape[1]):
            y[fi, ci] = (x[fi, ci] - mean[ci]) / math.sqrt(var[ci] + eps) * gamma[ci] + beta[ci]
    return y


def layernorm_naive(x, gamma, beta, eps):
    x = np.asarray(x, dtype=np.float64)
    y = np.zeros_like(x)
    for fi in range(x.shape[0]):
        row = x[fi]
        mu = row.sum() / row.shape[0]
        var = ((row - mu) ** 2).sum() / row.shape[0]
        y[fi] = (row - mu) / math.sqrt(var + eps) * gamma + beta
    return y


def bigru_freq_naive(x, fwd, bwd, w_proj, b_proj):
    """Bidirectional frequency scan; fwd/bwd are (w_ih, w_hh, b_ih, b_hh)."""
    x = np.asarray(x, dtype=np.float64)
    f = x.shape[0]
    hidden = fwd[1].shape[1]
    out_f = np.zeros((f, hidden))
    out_b = np.zeros((f, hidden))
    h = np.zeros(hidden)
    for fi in range(f):
        h = gru_step_naive(x[fi], h, *fwd)
        out_f[fi] = h
    h = np.zeros(hidden)
    for fi in reversed(range(f)):
        h = gru_step_naive(x[fi], h, *bwd)
        out_b[fi] = h
    cat = np.concatenate([out_f, out_b], axis=1)
    return cat @ np.asarray(w_proj, dtype=np.float64).T + np.asarray(b_proj, dtype=np.float64)


def banded_time_attention_naive(xs, wq, wk, wv, wo, bq, bk, bv, bo, n_heads, window):
    """Offline causal attention over time with a look-behind band.

    xs: [T, F, C]; frame t attends to frames [max(0, t-window+1), t] at each
    frequency position independently.
    """
    xs = np.asarray(xs, dtype=np.float64)
    t_len, f, c = xs.shape
    d = c // n_heads
    q = xs @ np.asarray(wq, dtype=np.float64).T + np.asarray(bq, dtype=np.float64)
    k = xs @ np.asarray(wk, dtype=np.float64).T + np.asarray(bk, dtype=np.float64)
    v = xs @ np.asarray(wv, dtype=np.float64).T + np.asarray(bv, dtype=np.float64)
    out = np.zeros_like(xs)
    for t in range(t_len):
        lo_t = max(0, t - window + 1)
        for fi in range(f):
            mixed = np.zeros(c)
            for head in range(n_heads):
                lo, hi = head * d, (head + 1) * d
                scores = np.array(
                    [q[t, fi, lo:hi] @ k[s, fi, lo:hi] / math.sqrt(d) for s in range(lo_t, t + 1)]
                )
                scores -= scores.max()
                weights = np.exp(scores)
                weights /= weights.sum()
                for idx, s in enumerate(range(lo_t, t + 1)):
                    mixed[lo:hi] += weights[idx] * v[s, fi, lo:hi]
            out[t, fi] = mixed @ np.asarray(wo, dtype=np.float64).T + np.asarray(bo, dtype=np.float64)
    return out


def timeconv_naive(xs, weights, bias, stride_f=1, transposed=False):
    """Offline causal time-axis convolution combined with the frequency kernel.

    xs: [T, F, C]; weights: [taps, K, Cin, Cout] (or [taps, K, Cout, Cin] when
    transposed). Tap index taps-1 is the current frame. Frequency padding is
    (K-1)//2, matching the streaming layers.
    """
    xs = np.asarray(xs, dtype=np.float64)
    taps = weights.shape[0]
    padding_f = (weights.shape[1] - 1) // 2
    t_len = xs.shape[0]
    out = None
    for t in range(t_len):
        acc = None
        for tap in range(taps):
            src = t - (taps - 1) + tap
            frame = xs[src] if src >= 0 else np.zeros_like(xs[0])
            if transposed:
                term = deconv_freq_naive(frame, weights[tap], None, stride_f, padding_f)
            else:
                term = conv_freq_naive(frame, weights[tap], None, stride_f, padding_f)
            acc = term if acc is None else acc + term
        if bias is not None:
            acc = acc + np.asarray(bias, dtype=np.float64)
        if out is None:
            out = np.zeros((t_len,) + acc.shape)
        out[t] = acc
    return out


def dft_naive(x, inverse=False):
    """O(N^2) DFT used as the FFT oracle."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    sign = 2j if inverse else -2j
    grid = np.arange(n)
    mat = np.exp(sign * np.pi * np.outer(grid, grid) / n)
    y = x @ mat.T
    return y / n if inverse else y
