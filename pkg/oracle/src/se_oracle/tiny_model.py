"""A tiny end-to-end torch twin of the enhancement graph.

Mirrors the engine's tiny custom config (16-point FFT, one encoder stage,
one GRU+attention block, hidden width 4, < 5K parameters) and exports its
weights in the wire format under the engine's tensor naming scheme, plus a
20-frame spectrogram and the expected per-frame masks.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from . import kernels as tk
from .container import encode

torch.set_grad_enabled(False)

BN_EPS = 1e-5

TINY_MODEL_BLOB = {
    "bn_eps": BN_EPS,
    "fused": False,
    "model": {
        "preset": "custom",
        "stft": {"sample_rate": 16000, "fft_size": 16, "hop_size": 8},
        "enc_channels": [4],
        "enc_strides": [2],
        "n_blocks": 1,
        "hidden": 4,
        "n_heads": 2,
        "norm": "batch",
        "time_kernel": 1,
        "variant": "rnnformer",
        "dpt_lookbehind": 31,
        "dprnn_hidden": 2,
    },
}

FFT_SIZE = 16
N_BINS = FFT_SIZE // 2 + 1  # 9
WIDTH = 4
HEADS = 2
F_BLOCK = 5  # 9 -> 5 after the stride-2 stage

RANGES = {
    "weight": (-0.3, 0.3), "bias": (-0.3, 0.3), "gamma": (0.5, 1.5),
    "beta": (-0.3, 0.3), "mean": (-0.1, 0.1), "var": (0.5, 1.5),
    "alpha": (0.05, 0.35),
}

# (name, shape, init kind) in the engine's graph traversal order
TINY_PARAMS = [
    ("enc0.conv.weight", (1, 3, 2, WIDTH), "weight"),
    ("enc0.conv.bias", (WIDTH,), "bias"),
    ("enc0.norm.gamma", (WIDTH,), "gamma"),
    ("enc0.norm.beta", (WIDTH,), "beta"),
    ("enc0.norm.mean", (WIDTH,), "mean"),
    ("enc0.norm.var", (WIDTH,), "var"),
    ("enc0.act.alpha", (WIDTH,), "alpha"),
    ("block0.tnorm.gamma", (WIDTH,), "gamma"),
    ("block0.tnorm.beta", (WIDTH,), "beta"),
    ("block0.tnorm.mean", (WIDTH,), "mean"),
    ("block0.tnorm.var", (WIDTH,), "var"),
    ("block0.gru.w_ih", (3 * WIDTH, WIDTH), "weight"),
    ("block0.gru.w_hh", (3 * WIDTH, WIDTH), "weight"),
    ("block0.gru.b_ih", (3 * WIDTH,), "bias"),
    ("block0.gru.b_hh", (3 * WIDTH,), "bias"),
    ("block0.tproj.weight", (WIDTH, WIDTH), "weight"),
    ("block0.tproj.bias", (WIDTH,), "bias"),
    ("block0.fnorm.gamma", (WIDTH,), "gamma"),
    ("block0.fnorm.beta", (WIDTH,), "beta"),
    ("block0.fnorm.mean", (WIDTH,), "mean"),
    ("block0.fnorm.var", (WIDTH,), "var"),
    ("block0.fattn.wq", (WIDTH, WIDTH), "weight"),
    ("block0.fattn.wk", (WIDTH, WIDTH), "weight"),
    ("block0.fattn.wv", (WIDTH, WIDTH), "weight"),
    ("block0.fattn.wo", (WIDTH, WIDTH), "weight"),
    ("block0.fattn.bq", (WIDTH,), "bias"),
    ("block0.fattn.bk", (WIDTH,), "bias"),
    ("block0.fattn.bv", (WIDTH,), "bias"),
    ("block0.fattn.bo", (WIDTH,), "bias"),
    ("dec0.deconv.weight", (1, 3, WIDTH, 2 * WIDTH), "weight"),
    ("dec0.deconv.bias", (WIDTH,), "bias"),
    ("dec0.norm.gamma", (WIDTH,), "gamma"),
    ("dec0.norm.beta", (WIDTH,), "beta"),
    ("dec0.norm.mean", (WIDTH,), "mean"),
    ("dec0.norm.var", (WIDTH,), "var"),
    ("dec0.act.alpha", (WIDTH,), "alpha"),
    ("head.conv.weight", (1, 1, WIDTH, 2), "weight"),
    ("head.conv.bias", (2,), "bias"),
]


def random_tiny_weights(seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    return {
        name: rng.uniform(*RANGES[kind], size=shape).astype(np.float32)
        for name, shape, kind in TINY_PARAMS
    }


def _bn(x, w, prefix):
    return F.batch_norm(
        x, tk.t(w[f"{prefix}.mean"]), tk.t(w[f"{prefix}.var"]),
        tk.t(w[f"{prefix}.gamma"]), tk.t(w[f"{prefix}.beta"]),
        training=False, eps=BN_EPS)


def run_tiny_model(weights: dict[str, np.ndarray],
                   spectra: np.ndarray) -> np.ndarray:
    """spectra [T, 9, 2] (re, im) -> masks [T, 9, 2], stateful over frames."""
    t_len = spectra.shape[0]
    scale = 4.0 / FFT_SIZE
    hidden = torch.zeros(F_BLOCK, WIDTH)
    masks = np.zeros_like(spectra, dtype=np.float32)

    cell = torch.nn.GRUCell(WIDTH, WIDTH)
    cell.weight_ih.copy_(tk.t(weights["block0.gru.w_ih"]))
    cell.weight_hh.copy_(tk.t(weights["block0.gru.w_hh"]))
    cell.bias_ih.copy_(tk.t(weights["block0.gru.b_ih"]))
    cell.bias_hh.copy_(tk.t(weights["block0.gru.b_hh"]))

    for frame in range(t_len):
        x = tk.t(spectra[frame] * np.float32(scale))  # [9, 2]

        # encoder stage: conv k3 s2 p1 -> BN -> PReLU
        w = tk.t(weights["enc0.conv.weight"][0]).permute(2, 1, 0)
        y = F.conv1d(x.T.unsqueeze(0), w, tk.t(weights["enc0.conv.bias"]),
                     stride=2, padding=1).squeeze(0).T
        y = _bn(y, weights, "enc0.norm")
        y = F.prelu(y, tk.t(weights["enc0.act.alpha"]))
        skip = y

        # block: pre-norm GRU over positions + projection, residual
        xn = _bn(y, weights, "block0.tnorm")
        hidden = cell(xn, hidden)
        y = y + F.linear(hidden, tk.t(weights["block0.tproj.weight"]),
                         tk.t(weights["block0.tproj.bias"]))
        # pre-norm frequency attention, residual
        xn = _bn(y, weights, "block0.fnorm")
        attn = tk.mhsa_freq(
            xn.numpy(),
            weights["block0.fattn.wq"], weights["block0.fattn.wk"],
            weights["block0.fattn.wv"], weights["block0.fattn.wo"],
            weights["block0.fattn.bq"], weights["block0.fattn.bk"],
            weights["block0.fattn.bv"], weights["block0.fattn.bo"], HEADS)
        y = y + tk.t(attn)

        # decoder stage: concat skip -> transposed conv -> BN -> PReLU
        y = torch.cat([y, skip], dim=-1)
        w = tk.t(weights["dec0.deconv.weight"][0]).permute(2, 1, 0)
        y = F.conv_transpose1d(y.T.unsqueeze(0), w, tk.t(weights["dec0.deconv.bias"]),
                               stride=2, padding=1).squeeze(0).T
        y = _bn(y, weights, "dec0.norm")
        y = F.prelu(y, tk.t(weights["dec0.act.alpha"]))

        # mask head: 1x1 conv, magnitude-bounded by tanh
        w = tk.t(weights["head.conv.weight"][0, 0])  # [Cin, 2]
        raw = y @ w + tk.t(weights["head.conv.bias"])
        mag = torch.sqrt(raw[:, 0] ** 2 + raw[:, 1] ** 2)
        gain = torch.where(mag > 1e-8, torch.tanh(mag) / torch.where(mag > 1e-8, mag, torch.ones_like(mag)),
                           torch.ones_like(mag))
        masks[frame] = (raw * gain.unsqueeze(-1)).numpy()

    return masks


def export_tiny_golden(seed: int) -> tuple[bytes, bytes, np.ndarray, np.ndarray]:
    """Returns (weights_file_bytes, io_file_bytes, spectra, masks)."""
    weights = random_tiny_weights(seed)
    rng = np.random.default_rng(seed + 1)
    spectra = rng.uniform(-1.0, 1.0, (20, N_BINS, 2)).astype(np.float32)
    masks = run_tiny_model(weights, spectra)
    rerun = run_tiny_model(weights, spectra)
    if not np.array_equal(masks, rerun):
        raise RuntimeError("tiny model self-check failed: nondeterministic output")
    weight_bytes = encode(TINY_MODEL_BLOB, weights)
    io_blob = {"kind": "golden-model", "id": "tiny-rnnformer", "frames": 20}
    io_bytes = encode(io_blob, {"spectra": spectra, "masks": masks})
    return weight_bytes, io_bytes, spectra, masks
