"""Float32 numeric kernels for the per-frame model graph.

Layout convention: channels last. A single frame is [F, C]; every kernel
also accepts arbitrary leading batch axes (the offline reference path
batches over time), implemented with plain matmuls so a batched call runs
the same per-slice GEMM as the streaming call.

`naive` holds the loop-level twins used as test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class GruParams:
    """Packed GRU cell parameters, gate order (reset, update, new)."""

    w_ih: np.ndarray  # [3H, I]
    w_hh: np.ndarray  # [3H, H]
    b_ih: np.ndarray  # [3H]
    b_hh: np.ndarray  # [3H]

    @property
    def hidden(self) -> int:
        return self.w_hh.shape[1]


@dataclass(frozen=True)
class MhsaParams:
    """Multi-head self-attention projections, all [C, C] with biases."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    bq: np.ndarray
    bk: np.ndarray
    bv: np.ndarray
    bo: np.ndarray
    n_heads: int


@dataclass(frozen=True)
class NormParams:
    """Per-channel normalization; running stats present for batch norm only."""

    gamma: np.ndarray
    beta: np.ndarray
    mean: np.ndarray | None = None
    var: np.ndarray | None = None
    eps: float = 1e-5


def conv_freq(x, weights, bias, stride_f: int = 1, padding_f: int = 0):
    """1-D cross-correlation along the frequency axis.

    x: [..., F, Cin], weights: [K, Cin, Cout], K in {1, 3}.
    """
    w = np.asarray(weights)
    k, c_in, c_out = w.shape
    if k not in (1, 3):
        raise ValueError(f"frequency kernel size must be 1 or 3, got {k}")
    if x.shape[-1] != c_in:
        raise ValueError(f"channel mismatch: input {x.shape[-1]}, weights {c_in}")
    f = x.shape[-2]
    f_out = (f + 2 * padding_f - k) // stride_f + 1
    if f_out < 1:
        raise ValueError(f"empty output: F={f}, K={k}, stride={stride_f}, pad={padding_f}")
    if padding_f:
        pad = [(0, 0)] * (x.ndim - 2) + [(padding_f, padding_f), (0, 0)]
        x = np.pad(x, pad)
    span = (f_out - 1) * stride_f + 1
    y = x[..., 0:span:stride_f, :] @ w[0]
    for kk in range(1, k):
        y += x[..., kk : kk + span : stride_f, :] @ w[kk]
    if bias is not None:
        y += bias
    return y


def deconv_freq(x, weights, bias, stride_f: int = 1, padding_f: int | None = None):
    """Transposed 1-D convolution along frequency (adjoint of conv_freq).

    x: [..., F, Cin], weights: [K, Cout, Cin]. Default padding (K-1)//2 makes
    stride-2 stages exactly mirror the encoder's frequency sizes.
    """
    w = np.asarray(weights)
    k, c_out, c_in = w.shape
    if k not in (1, 3):
        raise ValueError(f"frequency kernel size must be 1 or 3, got {k}")
    if x.shape[-1] != c_in:
        raise ValueError(f"channel mismatch: input {x.shape[-1]}, weights {c_in}")
    if padding_f is None:
        padding_f = (k - 1) // 2
    f = x.shape[-2]
    full_len = (f - 1) * stride_f + k
    f_out = full_len - 2 * padding_f
    if f_out < 1:
        raise ValueError("empty transposed-conv output")
    full = np.zeros(x.shape[:-2] + (full_len, c_out), dtype=x.dtype)
    span = (f - 1) * stride_f + 1
    for kk in range(k):
        full[..., kk : kk + span : stride_f, :] += x @ w[kk].T
    y = full[..., padding_f : padding_f + f_out, :]
    if bias is not None:
        y = y + bias
    return y


def gru_step(x, h, p: GruParams):
    """One GRU step; x: [..., I], h: [..., H] -> new hidden [..., H]."""
    hidden = p.hidden
    if x.shape[-1] != p.w_ih.shape[1] or h.shape[-1] != hidden:
        raise ValueError("GRU input/hidden size mismatch")
    gx = x @ p.w_ih.T + p.b_ih
    gh = h @ p.w_hh.T + p.b_hh
    r = sigmoid(gx[..., :hidden] + gh[..., :hidden])
    z = sigmoid(gx[..., hidden : 2 * hidden] + gh[..., hidden : 2 * hidden])
    n = np.tanh(gx[..., 2 * hidden :] + r * gh[..., 2 * hidden :])
    return (1.0 - z) * n + z * h


def mhsa_freq(x, p: MhsaParams):
    """Scaled dot-product attention over the F frequency rows of one frame."""
    f, c = x.shape[-2], x.shape[-1]
    if c % p.n_heads:
        raise ValueError(f"channels {c} not divisible by {p.n_heads} heads")
    d = c // p.n_heads
    lead = x.shape[:-2]

    def split(t):
        return np.swapaxes(t.reshape(lead + (f, p.n_heads, d)), -3, -2)

    q = split(x @ p.wq.T + p.bq)
    k = split(x @ p.wk.T + p.bk)
    v = split(x @ p.wv.T + p.bv)
    scores = (q @ np.swapaxes(k, -1, -2)) * np.float32(1.0 / np.sqrt(d))
    attn = softmax(scores)
    out = attn @ v
    out = np.swapaxes(out, -3, -2).reshape(lead + (f, c))
    return out @ p.wo.T + p.bo


def softmax(x, axis: int = -1):
    m = np.max(x, axis=axis, keepdims=True)
    e = np.exp(x - m)
    return e / np.sum(e, axis=axis, keepdims=True)


def batchnorm_infer(x, p: NormParams):
    """Inference-mode batch norm over the channel (last) axis."""
    if p.mean is None or p.var is None:
        raise ValueError("batch norm requires running statistics")
    denom = p.var + np.float32(p.eps)
    if np.any(denom <= 0):
        raise ValueError("non-positive variance + eps")
    scale = p.gamma / np.sqrt(denom)
    return (x - p.mean) * scale + p.beta


def layernorm(x, gamma, beta, eps: float = 1e-5):
    """Normalize each frequency row over its channels, then affine."""
    mean = np.mean(x, axis=-1, keepdims=True)
    var = np.mean((x - mean) ** 2, axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + np.float32(eps)) * gamma + beta


def sigmoid(x):
    return expit(x)


def prelu(x, alpha):
    return np.where(x >= 0, x, alpha * x)


def activation(x, kind: str, alpha=None):
    if kind == "prelu":
        if alpha is None:
            raise ValueError("prelu needs a slope parameter")
        return prelu(x, alpha)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return np.tanh(x)
    raise ValueError(f"unknown activation {kind!r}")
