"""Config-selectable architecture ablations.

Four substitutions over the base block/stage layout:

  k3        time-axis kernel 3 on every frequency-kernel-3 convolution
            (needs a 2-frame input cache per conv layer when streaming)
  layernorm every batch norm replaced by per-row layer norm (not fusable)
  dprnn     frequency attention replaced by a bidirectional frequency GRU
  dpt       time GRU replaced by causal time attention with a 31-frame
            look-behind (needs a key/value ring cache when streaming)

Streaming caches are exact: the streaming outputs equal the offline
band-masked / zero-padded computations bit-for-bit up to float32 rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .kernels import GruParams, MhsaParams


@dataclass
class KvCache:
    """Ring buffer of per-frame key/value tensors, capacity look-behind + 1."""

    capacity: int
    f: int
    c: int
    k: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)
    pos: int = 0
    filled: int = 0

    def __post_init__(self):
        self.k = np.zeros((self.capacity, self.f, self.c), dtype=np.float32)
        self.v = np.zeros((self.capacity, self.f, self.c), dtype=np.float32)

    def append(self, k_t: np.ndarray, v_t: np.ndarray) -> None:
        self.k[self.pos] = k_t
        self.v[self.pos] = v_t
        self.pos = (self.pos + 1) % self.capacity
        self.filled = min(self.filled + 1, self.capacity)

    def window(self) -> tuple[np.ndarray, np.ndarray]:
        """Cached frames ordered oldest to newest."""
        idx = (self.pos - self.filled + np.arange(self.filled)) % self.capacity
        return self.k[idx], self.v[idx]

    def reset(self) -> None:
        self.k[:] = 0.0
        self.v[:] = 0.0
        self.pos = 0
        self.filled = 0

    def nbytes(self) -> int:
        return self.k.nbytes + self.v.nbytes


@dataclass
class TimeConvCache:
    """Previous time_kernel - 1 input frames of one convolution layer."""

    f: int
    c: int
    taps: int = 3
    frames: np.ndarray = field(init=False)

    def __post_init__(self):
        self.frames = np.zeros((self.taps - 1, self.f, self.c), dtype=np.float32)

    def reset(self) -> None:
        self.frames[:] = 0.0


@dataclass(frozen=True)
class FreqGruParams:
    fwd: GruParams
    bwd: GruParams


def dprnn_freq_step(x, p: FreqGruParams, w_proj, b_proj):
    """Bidirectional GRU scan along frequency within one frame (stateless
    across time), projected back to the input width. Accepts leading batch
    axes (the offline path batches over time)."""
    f = x.shape[-2]
    g = p.fwd.hidden
    lead = x.shape[:-2]
    out_f = np.empty(lead + (f, g), dtype=np.float32)
    out_b = np.empty(lead + (f, g), dtype=np.float32)
    h = np.zeros(lead + (g,), dtype=np.float32)
    for fi in range(f):
        h = kernels.gru_step(x[..., fi, :], h, p.fwd)
        out_f[..., fi, :] = h
    h = np.zeros(lead + (g,), dtype=np.float32)
    for fi in reversed(range(f)):
        h = kernels.gru_step(x[..., fi, :], h, p.bwd)
        out_b[..., fi, :] = h
    cat = np.concatenate([out_f, out_b], axis=-1)
    return cat @ w_proj.T + b_proj


def _attend_window(q, k_win, v_win, n_heads: int):
    """Per-frequency-position attention of one query frame over a window.

    q: [F, C]; k_win/v_win: [W, F, C] ordered oldest to newest.
    """
    f, c = q.shape
    d = c // n_heads
    w = k_win.shape[0]
    qh = q.reshape(f, n_heads, 1, d)
    kh = k_win.reshape(w, f, n_heads, d).transpose(1, 2, 3, 0)  # [F, H, d, W]
    vh = v_win.reshape(w, f, n_heads, d).transpose(1, 2, 0, 3)  # [F, H, W, d]
    scores = (qh @ kh) * np.float32(1.0 / np.sqrt(d))  # [F, H, 1, W]
    attn = kernels.softmax(scores)
    out = attn @ vh  # [F, H, 1, d]
    return out.reshape(f, c)


def dpt_time_step(x, cache: KvCache, p: MhsaParams):
    """Causal time attention for one frame: append this frame's key/value to
    the ring cache, then attend from its query over the cached window."""
    q = x @ p.wq.T + p.bq
    k_t = x @ p.wk.T + p.bk
    v_t = x @ p.wv.T + p.bv
    cache.append(k_t, v_t)
    k_win, v_win = cache.window()
    out = _attend_window(q, k_win, v_win, p.n_heads)
    return out @ p.wo.T + p.bo


def dpt_time_sequence(xs, p: MhsaParams, window: int):
    """Offline twin of dpt_time_step over a whole sequence [T, F, C]."""
    q = xs @ p.wq.T + p.bq
    k = xs @ p.wk.T + p.bk
    v = xs @ p.wv.T + p.bv
    t_len = xs.shape[0]
    out = np.empty_like(xs)
    for t in range(t_len):
        lo = max(0, t - window + 1)
        out[t] = _attend_window(q[t], k[lo : t + 1], v[lo : t + 1], p.n_heads)
    return out @ p.wo.T + p.bo


def timeconv3_step(x, cache: TimeConvCache, weights, bias, stride_f: int,
                   transposed: bool = False):
    """Causal 3-tap time convolution combined with the frequency kernel.

    weights: [3, K, Cin, Cout] ([3, K, Cout, Cin] when transposed); tap 2 is
    the current frame. Pushes the current frame into the cache.
    """
    def apply(frame, tap):
        if transposed:
            return kernels.deconv_freq(frame, weights[tap], None, stride_f)
        pad = (weights.shape[1] - 1) // 2
        return kernels.conv_freq(frame, weights[tap], None, stride_f, pad)

    y = apply(cache.frames[0], 0)
    y += apply(cache.frames[1], 1)
    y += apply(x, 2)
    if bias is not None:
        y += bias
    cache.frames[0] = cache.frames[1]
    cache.frames[1] = x
    return y


def make_variant(base, which: str):
    """Apply one named ablation tag to an unmodified named preset config."""
    from . import model

    if base.preset not in model.PRESETS:
        raise ValueError("variants are defined relative to a named preset")
    if base != model.preset_config(base.preset):
        raise ValueError("variant base must be an unmodified preset config")
    from dataclasses import replace

    if which == "base":
        return base
    if which == "k3":
        return replace(base, time_kernel=3)
    if which == "layernorm":
        return replace(base, norm="layer")
    if which == "dprnn":
        return replace(base, variant="dprnn")
    if which == "dpt":
        return replace(base, variant="dpt")
    raise ValueError(f"unknown variant tag {which!r}")


VARIANT_TAGS = ("base", "k3", "layernorm", "dprnn", "dpt")
