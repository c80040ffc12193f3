"""Torch reference implementations of the engine's numeric kernels.

Conventions mirror the engine's documented layouts (channels last,
frequency-axis convs with weights [K, Cin, Cout], GRU gate order
reset/update/new with the reset gate applied after the hidden matmul,
attention scale 1/sqrt(head_dim)); the computations themselves go through
torch's own operators.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

torch.set_grad_enabled(False)


def t(x):
    return torch.from_numpy(np.ascontiguousarray(x))


def conv_freq(x, w, b, stride, padding):
    # x [F, Cin], w [K, Cin, Cout] -> torch conv1d weight [Cout, Cin, K]
    xt = t(x).T.unsqueeze(0)
    wt = t(w).permute(2, 1, 0)
    y = F.conv1d(xt, wt, t(b), stride=stride, padding=padding)
    return y.squeeze(0).T.numpy()


def deconv_freq(x, w, b, stride):
    # w [K, Cout, Cin] -> torch conv_transpose1d weight [Cin, Cout, K]
    k = w.shape[0]
    xt = t(x).T.unsqueeze(0)
    wt = t(w).permute(2, 1, 0)
    y = F.conv_transpose1d(xt, wt, t(b), stride=stride, padding=(k - 1) // 2)
    return y.squeeze(0).T.numpy()


def gru_step(x, h, w_ih, w_hh, b_ih, b_hh):
    cell = torch.nn.GRUCell(x.shape[-1], h.shape[-1])
    cell.weight_ih.copy_(t(w_ih))
    cell.weight_hh.copy_(t(w_hh))
    cell.bias_ih.copy_(t(b_ih))
    cell.bias_hh.copy_(t(b_hh))
    batched = x.ndim == 2
    xt = t(x) if batched else t(x).unsqueeze(0)
    ht = t(h) if batched else t(h).unsqueeze(0)
    out = cell(xt, ht)
    return (out if batched else out.squeeze(0)).numpy()


def _project(x, w, b):
    return F.linear(x, t(w), t(b))


def mhsa_freq(x, wq, wk, wv, wo, bq, bk, bv, bo, n_heads):
    f, c = x.shape
    d = c // n_heads
    xt = t(x)
    q = _project(xt, wq, bq).reshape(f, n_heads, d).transpose(0, 1)
    k = _project(xt, wk, bk).reshape(f, n_heads, d).transpose(0, 1)
    v = _project(xt, wv, bv).reshape(f, n_heads, d).transpose(0, 1)
    out = F.scaled_dot_product_attention(q, k, v)
    out = out.transpose(0, 1).reshape(f, c)
    return _project(out, wo, bo).numpy()


def batchnorm_infer(x, gamma, beta, mean, var, eps=1e-5):
    return F.batch_norm(t(x), t(mean), t(var), t(gamma), t(beta),
                        training=False, eps=eps).numpy()


def layernorm(x, gamma, beta, eps=1e-5):
    return F.layer_norm(t(x), (x.shape[-1],), t(gamma), t(beta), eps).numpy()


def prelu(x, alpha):
    return F.prelu(t(x), t(alpha)).numpy()


def bigru_freq(x, fwd, bwd, w_proj, b_proj):
    """Bidirectional GRU over the frequency axis + projection.

    fwd/bwd are (w_ih, w_hh, b_ih, b_hh); torch's bidirectional GRU output
    concatenates forward and backward hidden states per position.
    """
    c = x.shape[-1]
    g = fwd[1].shape[1]
    gru = torch.nn.GRU(c, g, bidirectional=True, batch_first=True)
    gru.weight_ih_l0.copy_(t(fwd[0]))
    gru.weight_hh_l0.copy_(t(fwd[1]))
    gru.bias_ih_l0.copy_(t(fwd[2]))
    gru.bias_hh_l0.copy_(t(fwd[3]))
    gru.weight_ih_l0_reverse.copy_(t(bwd[0]))
    gru.weight_hh_l0_reverse.copy_(t(bwd[1]))
    gru.bias_ih_l0_reverse.copy_(t(bwd[2]))
    gru.bias_hh_l0_reverse.copy_(t(bwd[3]))
    out, _ = gru(t(x).unsqueeze(0))
    return _project(out.squeeze(0), w_proj, b_proj).numpy()


def banded_time_attention(xs, wq, wk, wv, wo, bq, bk, bv, bo, n_heads, window):
    """Causal time attention with a look-behind band, per frequency position."""
    t_len, f, c = xs.shape
    d = c // n_heads
    xt = t(xs)
    q = _project(xt, wq, bq).reshape(t_len, f, n_heads, d)
    k = _project(xt, wk, bk).reshape(t_len, f, n_heads, d)
    v = _project(xt, wv, bv).reshape(t_len, f, n_heads, d)
    # arrange as [F * H, T, d] so each frequency position attends over time
    q = q.permute(1, 2, 0, 3).reshape(f * n_heads, t_len, d)
    k = k.permute(1, 2, 0, 3).reshape(f * n_heads, t_len, d)
    v = v.permute(1, 2, 0, 3).reshape(f * n_heads, t_len, d)
    rows = torch.arange(t_len).unsqueeze(1)
    cols = torch.arange(t_len).unsqueeze(0)
    allowed = (cols <= rows) & (cols >= rows - (window - 1))
    out = F.scaled_dot_product_attention(q, k, v, attn_mask=allowed)
    out = out.reshape(f, n_heads, t_len, d).permute(2, 0, 1, 3).reshape(t_len, f, c)
    return _project(out, wo, bo).numpy()


def timeconv3(xs, w, b, stride):
    """Causal 3-tap time conv fused with the frequency kernel via conv2d.

    xs [T, F, Cin], w [3, K, Cin, Cout]; tap 2 is the current frame.
    """
    k = w.shape[1]
    xt = t(xs).permute(2, 0, 1).unsqueeze(0)  # [1, Cin, T, F]
    wt = t(w).permute(3, 2, 0, 1)  # [Cout, Cin, 3, K]
    padded = F.pad(xt, ((k - 1) // 2, (k - 1) // 2, 2, 0))  # (freq, freq, past, future)
    y = F.conv2d(padded, wt, t(b), stride=(1, stride))
    return y.squeeze(0).permute(1, 2, 0).numpy()


def timeconv3_transposed(xs, w, b, stride):
    """Causal 3-tap time conv with a transposed frequency kernel.

    Per-tap frequency transposed conv over all frames, then a causal
    time-shifted sum: y[t] = sum_tap term[tap][t - 2 + tap].
    """
    t_len = xs.shape[0]
    k = w.shape[1]
    xt = t(xs).permute(0, 2, 1)  # [T, Cin, F]
    terms = []
    for tap in range(3):
        wt = t(w[tap]).permute(2, 1, 0)  # [K, Cout, Cin] -> [Cin, Cout, K]
        terms.append(F.conv_transpose1d(xt, wt, None, stride=stride, padding=(k - 1) // 2))
    y = terms[2].clone()
    y[1:] += terms[1][:-1]
    y[2:] += terms[0][:-2]
    y += t(b).reshape(1, -1, 1)
    return y.permute(0, 2, 1).numpy()
