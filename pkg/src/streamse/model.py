"""Model graph: featurization, frequency-downsampling encoder, stacked
enhancement blocks (GRU over time, multi-head self-attention over
frequency), mirrored upsampling decoder with skip concatenation, and a
bounded complex-mask head.

The full 257-bin half spectrum is kept end to end: with kernel 3 / stride 2
/ padding 1 the odd frequency sizes mirror exactly through the transposed
convolutions (257 -> 129 -> 65 -> 33 and back).

Preset calibration record (hidden width, block count, head count were tuned
until the learnable-parameter counts landed on the published targets):

    preset  width  blocks  heads  params     target
    T       20     2       4      19,642     22K  (+/-15%)
    B       40     3       4      94,282     92K
    S       52     4       4      188,658    195K
    M       80     4       8      442,562    492K
    L       120    5       8      1,150,442  1105K
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import kernels, variants
from .dsp import StftConfig
from .kernels import GruParams, MhsaParams, NormParams

PRESETS: dict[str, dict[str, int]] = {
    "T": {"width": 20, "blocks": 2, "heads": 4, "freq_gru_hidden": 8},
    "B": {"width": 40, "blocks": 3, "heads": 4, "freq_gru_hidden": 16},
    "S": {"width": 52, "blocks": 4, "heads": 4, "freq_gru_hidden": 21},
    "M": {"width": 80, "blocks": 4, "heads": 8, "freq_gru_hidden": 32},
    "L": {"width": 120, "blocks": 5, "heads": 8, "freq_gru_hidden": 48},
}

PRESET_ORDER = "TBSML"
VARIANTS = ("rnnformer", "dprnn", "dpt")
NORMS = ("batch", "layer")


@dataclass(frozen=True)
class ModelConfig:
    """Complete architectural description of one preset or custom model."""

    preset: str = "custom"
    stft: StftConfig = field(default_factory=StftConfig)
    enc_channels: tuple[int, ...] = (40, 40, 40)
    enc_strides: tuple[int, ...] = (2, 2, 2)
    n_blocks: int = 3
    hidden: int = 40
    n_heads: int = 4
    norm: str = "batch"
    time_kernel: int = 1
    variant: str = "rnnformer"
    dpt_lookbehind: int = 31
    dprnn_hidden: int = 16

    def __post_init__(self):
        object.__setattr__(self, "enc_channels", tuple(int(c) for c in self.enc_channels))
        object.__setattr__(self, "enc_strides", tuple(int(s) for s in self.enc_strides))
        if not self.enc_channels:
            raise ValueError("encoder needs at least one stage")
        if len(self.enc_channels) != len(self.enc_strides):
            raise ValueError("enc_channels and enc_strides length mismatch")
        if any(c < 1 for c in self.enc_channels):
            raise ValueError("encoder channels must be positive")
        if any(s not in (1, 2) for s in self.enc_strides):
            raise ValueError("frequency strides must be 1 or 2")
        if self.hidden != self.enc_channels[-1]:
            raise ValueError("block width must equal the last encoder width")
        if self.n_blocks < 0:
            raise ValueError("n_blocks must be >= 0")
        if self.n_heads < 1 or self.hidden % self.n_heads:
            raise ValueError(f"head count {self.n_heads} must divide width {self.hidden}")
        if self.norm not in NORMS:
            raise ValueError(f"unknown norm {self.norm!r}")
        if self.time_kernel not in (1, 3):
            raise ValueError("time kernel must be 1 or 3")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "dpt" and self.dpt_lookbehind != 31:
            raise ValueError("dpt look-behind is fixed at 31 frames")
        if self.dpt_lookbehind < 0:
            raise ValueError("dpt look-behind must be >= 0")
        if self.dprnn_hidden < 1:
            raise ValueError("frequency-GRU hidden size must be positive")
        self.f_chain()  # raises when the decoder cannot mirror the encoder

    def f_chain(self) -> tuple[int, ...]:
        """Frequency sizes entering each stage, ending at the block width."""
        f = self.stft.n_bins
        chain = [f]
        for s in self.enc_strides:
            f_out = (f + 2 - 3) // s + 1
            if f_out < 2:
                raise ValueError(f"frequency axis collapsed: {f} -> {f_out}")
            if (f_out - 1) * s + 1 != f:
                raise ValueError(
                    f"stride {s} stage {f} -> {f_out} has no exact transposed mirror"
                )
            f = f_out
            chain.append(f)
        return tuple(chain)


def preset_config(name: str) -> ModelConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r} (expected one of {PRESET_ORDER})")
    p = PRESETS[name]
    w = p["width"]
    return ModelConfig(
        preset=name,
        enc_channels=(w, w, w),
        enc_strides=(2, 2, 2),
        n_blocks=p["blocks"],
        hidden=w,
        n_heads=p["heads"],
        dprnn_hidden=p["freq_gru_hidden"],
    )


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str  # conv | deconv | norm | act | gru | linear | attn | tattn | bigru
    f_in: int
    c_in: int
    f_out: int
    c_out: int
    attrs: dict[str, Any] = field(default_factory=dict)
    params: tuple[tuple[str, tuple[int, ...], str], ...] = ()


@dataclass(frozen=True)
class StageSpec:
    conv: LayerSpec
    norm: LayerSpec | None
    act: LayerSpec


@dataclass(frozen=True)
class BlockSpec:
    tnorm: LayerSpec | None
    gru: LayerSpec | None
    tproj: LayerSpec | None
    tattn: LayerSpec | None
    fnorm: LayerSpec | None
    fattn: LayerSpec | None
    fgru: LayerSpec | None
    fproj: LayerSpec | None


@dataclass(frozen=True)
class ModelGraph:
    """Executable layer graph; immutable and shareable across streams."""

    config: ModelConfig
    fused: bool
    enc: tuple[StageSpec, ...]
    blocks: tuple[BlockSpec, ...]
    dec: tuple[StageSpec, ...]
    head: LayerSpec
    layers: tuple[LayerSpec, ...]

    def fuse(self) -> "ModelGraph":
        return build_model(self.config, fused=True)

    def param_specs(self):
        for layer in self.layers:
            yield from layer.params


def _norm_spec(name: str, config: ModelConfig, f: int, c: int) -> LayerSpec:
    params = [(f"{name}.gamma", (c,), "gamma"), (f"{name}.beta", (c,), "beta")]
    if config.norm == "batch":
        params += [(f"{name}.mean", (c,), "mean"), (f"{name}.var", (c,), "var")]
    return LayerSpec(name, "norm", f, c, f, c, {"norm": config.norm}, tuple(params))


def _attn_spec(name: str, kind: str, f: int, c: int, heads: int, window: int = 0) -> LayerSpec:
    params = tuple(
        [(f"{name}.w{t}", (c, c), "weight") for t in "qkvo"]
        + [(f"{name}.b{t}", (c,), "bias") for t in "qkvo"]
    )
    attrs = {"heads": heads}
    if window:
        attrs["window"] = window
    return LayerSpec(name, kind, f, c, f, c, attrs, params)


def build_model(config: ModelConfig, fused: bool = False) -> ModelGraph:
    """Construct the layer graph for a config; deterministic and introspectable."""
    f_chain = config.f_chain()
    tk = config.time_kernel
    n_stages = len(config.enc_channels)
    enc = []
    c_prev = 2
    for i, (c, s) in enumerate(zip(config.enc_channels, config.enc_strides)):
        f_in, f_out = f_chain[i], f_chain[i + 1]
        conv = LayerSpec(
            f"enc{i}.conv", "conv", f_in, c_prev, f_out, c,
            {"stride": s, "kf": 3, "tk": tk},
            ((f"enc{i}.conv.weight", (tk, 3, c_prev, c), "conv_weight"),
             (f"enc{i}.conv.bias", (c,), "bias")),
        )
        norm = None if fused else _norm_spec(f"enc{i}.norm", config, f_out, c)
        act = LayerSpec(f"enc{i}.act", "act", f_out, c, f_out, c, {},
                        ((f"enc{i}.act.alpha", (c,), "alpha"),))
        enc.append(StageSpec(conv, norm, act))
        c_prev = c

    f_b = f_chain[-1]
    c = config.hidden
    g = config.dprnn_hidden
    blocks = []
    for j in range(config.n_blocks):
        tnorm = fnorm = gru = tproj = tattn = fattn = fgru = fproj = None
        if not fused:
            tnorm = _norm_spec(f"block{j}.tnorm", config, f_b, c)
            fnorm = _norm_spec(f"block{j}.fnorm", config, f_b, c)
        if config.variant == "dpt":
            tattn = _attn_spec(f"block{j}.tattn", "tattn", f_b, c, config.n_heads,
                               window=config.dpt_lookbehind + 1)
        else:
            gru = LayerSpec(
                f"block{j}.gru", "gru", f_b, c, f_b, c, {"hidden": c},
                ((f"block{j}.gru.w_ih", (3 * c, c), "weight"),
                 (f"block{j}.gru.w_hh", (3 * c, c), "weight"),
                 (f"block{j}.gru.b_ih", (3 * c,), "bias"),
                 (f"block{j}.gru.b_hh", (3 * c,), "bias")),
            )
            tproj = LayerSpec(
                f"block{j}.tproj", "linear", f_b, c, f_b, c, {},
                ((f"block{j}.tproj.weight", (c, c), "weight"),
                 (f"block{j}.tproj.bias", (c,), "bias")),
            )
        if config.variant == "dprnn":
            fgru_params = []
            for direction in ("fwd", "bwd"):
                fgru_params += [
                    (f"block{j}.fgru.{direction}_w_ih", (3 * g, c), "weight"),
                    (f"block{j}.fgru.{direction}_w_hh", (3 * g, g), "weight"),
                    (f"block{j}.fgru.{direction}_b_ih", (3 * g,), "bias"),
                    (f"block{j}.fgru.{direction}_b_hh", (3 * g,), "bias"),
                ]
            fgru = LayerSpec(f"block{j}.fgru", "bigru", f_b, c, f_b, g, {"hidden": g},
                             tuple(fgru_params))
            fproj = LayerSpec(
                f"block{j}.fproj", "linear", f_b, 2 * g, f_b, c, {},
                ((f"block{j}.fproj.weight", (c, 2 * g), "weight"),
                 (f"block{j}.fproj.bias", (c,), "bias")),
            )
        else:
            fattn = _attn_spec(f"block{j}.fattn", "attn", f_b, c, config.n_heads)
        blocks.append(BlockSpec(tnorm, gru, tproj, tattn, fnorm, fattn, fgru, fproj))

    dec = []
    carried = config.hidden
    for i in range(n_stages):
        stride = config.enc_strides[n_stages - 1 - i]
        skip = config.enc_channels[n_stages - 1 - i]
        c_in = carried + skip
        c_out = config.enc_channels[n_stages - 2 - i] if i < n_stages - 1 else config.enc_channels[0]
        f_in, f_out = f_chain[n_stages - i], f_chain[n_stages - 1 - i]
        deconv = LayerSpec(
            f"dec{i}.deconv", "deconv", f_in, c_in, f_out, c_out,
            {"stride": stride, "kf": 3, "tk": tk},
            ((f"dec{i}.deconv.weight", (tk, 3, c_out, c_in), "deconv_weight"),
             (f"dec{i}.deconv.bias", (c_out,), "bias")),
        )
        norm = None if fused else _norm_spec(f"dec{i}.norm", config, f_out, c_out)
        act = LayerSpec(f"dec{i}.act", "act", f_out, c_out, f_out, c_out, {},
                        ((f"dec{i}.act.alpha", (c_out,), "alpha"),))
        dec.append(StageSpec(deconv, norm, act))
        carried = c_out

    head = LayerSpec(
        "head.conv", "conv", f_chain[0], carried, f_chain[0], 2,
        {"stride": 1, "kf": 1, "tk": 1},
        (("head.conv.weight", (1, 1, carried, 2), "conv_weight"),
         ("head.conv.bias", (2,), "bias")),
    )

    layers: list[LayerSpec] = []
    for st in enc:
        layers += [st.conv] + ([st.norm] if st.norm else []) + [st.act]
    for blk in blocks:
        for spec in (blk.tnorm, blk.gru, blk.tproj, blk.tattn, blk.fnorm,
                     blk.fattn, blk.fgru, blk.fproj):
            if spec is not None:
                layers.append(spec)
    for st in dec:
        layers += [st.conv] + ([st.norm] if st.norm else []) + [st.act]
    layers.append(head)

    return ModelGraph(config, fused, tuple(enc), tuple(blocks), tuple(dec), head, tuple(layers))


def parameter_count(config: ModelConfig) -> int:
    """Learnable scalar parameters (running statistics are buffers, not counted)."""
    total = 0
    for name, shape, kind in build_model(config).param_specs():
        if kind not in ("mean", "var"):
            total += int(np.prod(shape))
    return total


def shape_plan(config: ModelConfig) -> list[tuple[str, tuple[int, int], tuple[int, int]]]:
    """Per-layer (name, (F_in, C_in), (F_out, C_out)) trace in execution order."""
    return [
        (layer.name, (layer.f_in, layer.c_in), (layer.f_out, layer.c_out))
        for layer in build_model(config).layers
    ]


def feature_scale(stft: StftConfig) -> np.float32:
    # 2 / sum(hann) so a full-scale sine lands near unit magnitude
    return np.float32(4.0 / stft.fft_size)


def featurize(spectrum: np.ndarray, stft: StftConfig) -> np.ndarray:
    """Complex half-spectrum [..., F] -> float32 feature map [..., F, 2]."""
    spectrum = np.asarray(spectrum)
    scale = feature_scale(stft)
    out = np.empty(spectrum.shape + (2,), dtype=np.float32)
    out[..., 0] = spectrum.real * scale
    out[..., 1] = spectrum.imag * scale
    return out


def bound_mask(raw: np.ndarray) -> np.ndarray:
    """Bound the complex mask magnitude to < 1 via tanh on the magnitude."""
    mag = np.sqrt(raw[..., 0] ** 2 + raw[..., 1] ** 2)
    safe = np.where(mag > 1e-8, mag, np.float32(1.0))
    gain = np.where(mag > 1e-8, np.tanh(mag) / safe, np.float32(1.0))
    return (raw * gain[..., None]).astype(np.float32, copy=False)


def apply_mask(spectrum: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Per-bin complex multiplication of the spectrum by the mask."""
    if spectrum.shape != mask.shape[:-1] or mask.shape[-1] != 2:
        raise ValueError(f"mask shape {mask.shape} does not match spectrum {spectrum.shape}")
    m = mask[..., 0].astype(np.float64) + 1j * mask[..., 1].astype(np.float64)
    return np.asarray(spectrum, dtype=np.complex128) * m


# ---------------------------------------------------------------------------
# execution


def _apply_norm(x, weights, spec: LayerSpec, eps: float):
    if spec.attrs["norm"] == "batch":
        p = NormParams(
            gamma=weights[f"{spec.name}.gamma"], beta=weights[f"{spec.name}.beta"],
            mean=weights[f"{spec.name}.mean"], var=weights[f"{spec.name}.var"], eps=eps,
        )
        return kernels.batchnorm_infer(x, p)
    return kernels.layernorm(x, weights[f"{spec.name}.gamma"], weights[f"{spec.name}.beta"], eps)


def _gru_params(weights, name: str) -> GruParams:
    return GruParams(weights[f"{name}.w_ih"], weights[f"{name}.w_hh"],
                     weights[f"{name}.b_ih"], weights[f"{name}.b_hh"])


def _attn_params(weights, spec: LayerSpec) -> MhsaParams:
    n = spec.name
    return MhsaParams(weights[f"{n}.wq"], weights[f"{n}.wk"], weights[f"{n}.wv"],
                      weights[f"{n}.wo"], weights[f"{n}.bq"], weights[f"{n}.bk"],
                      weights[f"{n}.bv"], weights[f"{n}.bo"], spec.attrs["heads"])


def _bigru_params(weights, name: str) -> variants.FreqGruParams:
    return variants.FreqGruParams(
        fwd=GruParams(weights[f"{name}.fwd_w_ih"], weights[f"{name}.fwd_w_hh"],
                      weights[f"{name}.fwd_b_ih"], weights[f"{name}.fwd_b_hh"]),
        bwd=GruParams(weights[f"{name}.bwd_w_ih"], weights[f"{name}.bwd_w_hh"],
                      weights[f"{name}.bwd_b_ih"], weights[f"{name}.bwd_b_hh"]),
    )


def _conv_tap(x, w_tap, spec: LayerSpec):
    if spec.kind == "deconv":
        return kernels.deconv_freq(x, w_tap, None, spec.attrs["stride"])
    return kernels.conv_freq(x, w_tap, None, spec.attrs["stride"], (spec.attrs["kf"] - 1) // 2)


def _stage_frame(stage: StageSpec, weights, state, x, eps: float):
    spec = stage.conv
    w = weights[f"{spec.name}.weight"]
    b = weights[f"{spec.name}.bias"]
    if w.shape[0] == 1:
        y = _conv_tap(x, w[0], spec) + b
    else:
        y = variants.timeconv3_step(x, state.conv_cache[spec.name], w, b,
                                    spec.attrs["stride"], transposed=spec.kind == "deconv")
    if stage.norm is not None:
        y = _apply_norm(y, weights, stage.norm, eps)
    return kernels.prelu(y, weights[f"{stage.act.name}.alpha"])


def _block_frame(blk: BlockSpec, weights, state, x, config: ModelConfig, j: int, eps: float):
    if config.variant == "dpt":
        xn = _apply_norm(x, weights, blk.tnorm, eps) if blk.tnorm else x
        x = x + variants.dpt_time_step(xn, state.kv[j], _attn_params(weights, blk.tattn))
    else:
        xn = _apply_norm(x, weights, blk.tnorm, eps) if blk.tnorm else x
        h = state.gru_h[j]
        h_new = kernels.gru_step(xn, h, _gru_params(weights, blk.gru.name))
        h[...] = h_new
        x = x + (h_new @ weights[f"{blk.tproj.name}.weight"].T + weights[f"{blk.tproj.name}.bias"])
    xn = _apply_norm(x, weights, blk.fnorm, eps) if blk.fnorm else x
    if config.variant == "dprnn":
        out = variants.dprnn_freq_step(
            xn, _bigru_params(weights, blk.fgru.name),
            weights[f"{blk.fproj.name}.weight"], weights[f"{blk.fproj.name}.bias"])
    else:
        out = kernels.mhsa_freq(xn, _attn_params(weights, blk.fattn))
    return x + out


def forward_frame(graph: ModelGraph, weights, state, spectrum: np.ndarray,
                  eps: float = 1e-5) -> np.ndarray:
    """One-frame model pass: spectrum [F] complex -> mask [F, 2] float32.

    Mutates only the recurrent state (GRU hiddens and variant caches).
    """
    cfg = graph.config
    x = featurize(spectrum, cfg.stft)
    skips = []
    for stage in graph.enc:
        x = _stage_frame(stage, weights, state, x, eps)
        skips.append(x)
    for j, blk in enumerate(graph.blocks):
        x = _block_frame(blk, weights, state, x, cfg, j, eps)
    for i, stage in enumerate(graph.dec):
        x = np.concatenate([x, skips[len(graph.dec) - 1 - i]], axis=-1)
        x = _stage_frame(stage, weights, state, x, eps)
    raw = kernels.conv_freq(x, weights["head.conv.weight"][0], weights["head.conv.bias"])
    return bound_mask(raw)


def _stage_sequence(stage: StageSpec, weights, xs, eps: float):
    spec = stage.conv
    w = weights[f"{spec.name}.weight"]
    b = weights[f"{spec.name}.bias"]
    taps = w.shape[0]
    if taps == 1:
        y = _conv_tap(xs, w[0], spec) + b
    else:
        t_len = xs.shape[0]
        y = None
        for tap in range(taps):
            shift = taps - 1 - tap
            if shift:
                src = np.concatenate(
                    [np.zeros((shift,) + xs.shape[1:], dtype=xs.dtype), xs[: t_len - shift]])
            else:
                src = xs
            term = _conv_tap(src, w[tap], spec)
            y = term if y is None else y + term
        y += b
    if stage.norm is not None:
        y = _apply_norm(y, weights, stage.norm, eps)
    return kernels.prelu(y, weights[f"{stage.act.name}.alpha"])


def _block_sequence(blk: BlockSpec, weights, xs, config: ModelConfig, eps: float):
    t_len, f_b, c = xs.shape
    if config.variant == "dpt":
        xn = _apply_norm(xs, weights, blk.tnorm, eps) if blk.tnorm else xs
        xs = xs + variants.dpt_time_sequence(
            xn, _attn_params(weights, blk.tattn), config.dpt_lookbehind + 1)
    else:
        xn = _apply_norm(xs, weights, blk.tnorm, eps) if blk.tnorm else xs
        gp = _gru_params(weights, blk.gru.name)
        h = np.zeros((f_b, c), dtype=np.float32)
        hs = np.empty_like(xn)
        for t in range(t_len):
            h = kernels.gru_step(xn[t], h, gp)
            hs[t] = h
        xs = xs + (hs @ weights[f"{blk.tproj.name}.weight"].T + weights[f"{blk.tproj.name}.bias"])
    xn = _apply_norm(xs, weights, blk.fnorm, eps) if blk.fnorm else xs
    if config.variant == "dprnn":
        out = variants.dprnn_freq_step(
            xn, _bigru_params(weights, blk.fgru.name),
            weights[f"{blk.fproj.name}.weight"], weights[f"{blk.fproj.name}.bias"])
    else:
        out = kernels.mhsa_freq(xn, _attn_params(weights, blk.fattn))
    return xs + out


def forward_sequence(graph: ModelGraph, weights, spectra: np.ndarray,
                     eps: float = 1e-5) -> np.ndarray:
    """Whole-utterance pass: spectra [T, F] complex -> masks [T, F, 2].

    Computes the same function as repeated forward_frame calls from a fresh
    state, with the recurrences unrolled explicitly (reference path for the
    streaming engine; no stream state involved).
    """
    cfg = graph.config
    xs = featurize(spectra, cfg.stft)
    skips = []
    for stage in graph.enc:
        xs = _stage_sequence(stage, weights, xs, eps)
        skips.append(xs)
    for blk in graph.blocks:
        xs = _block_sequence(blk, weights, xs, cfg, eps)
    for i, stage in enumerate(graph.dec):
        xs = np.concatenate([xs, skips[len(graph.dec) - 1 - i]], axis=-1)
        xs = _stage_sequence(stage, weights, xs, eps)
    raw = kernels.conv_freq(xs, weights["head.conv.weight"][0], weights["head.conv.bias"])
    return bound_mask(raw)
