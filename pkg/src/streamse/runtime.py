"""Frame-synchronous enhancement sessions and the offline reference path.

One session owns one stream: a shared immutable graph + weights plus a
StreamState holding every piece of mutable memory (sample buffers, OLA
accumulator, GRU hiddens, variant caches). Sessions are single-threaded;
distinct sessions are independent.

`process_offline` computes the identical mathematical function over a whole
utterance at once (recurrences unrolled, caches replaced by explicit
history) and is the oracle for the streaming path.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import dsp, model as model_mod, weights_io
from .dsp import StftState
from .model import ModelConfig, ModelGraph, build_model
from .variants import KvCache, TimeConvCache
from .weights_io import WeightBundle


@dataclass
class StreamState:
    """All mutable per-stream memory; fixed size for the stream's lifetime."""

    stft: StftState
    gru_h: list[np.ndarray]
    kv: list[KvCache]
    conv_cache: dict[str, TimeConvCache]
    frame_index: int = 0

    def reset(self) -> None:
        self.stft.reset()
        for h in self.gru_h:
            h[:] = 0.0
        for cache in self.kv:
            cache.reset()
        for cache in self.conv_cache.values():
            cache.reset()
        self.frame_index = 0

    def nbytes(self) -> int:
        total = self.stft.nbytes()
        total += sum(h.nbytes for h in self.gru_h)
        total += sum(c.nbytes() for c in self.kv)
        total += sum(c.frames.nbytes for c in self.conv_cache.values())
        return total


def make_state(graph: ModelGraph) -> StreamState:
    cfg = graph.config
    f_b = cfg.f_chain()[-1]
    gru_h = []
    kv = []
    if cfg.variant == "dpt":
        kv = [KvCache(cfg.dpt_lookbehind + 1, f_b, cfg.hidden) for _ in range(cfg.n_blocks)]
    else:
        gru_h = [np.zeros((f_b, cfg.hidden), dtype=np.float32) for _ in range(cfg.n_blocks)]
    conv_cache: dict[str, TimeConvCache] = {}
    if cfg.time_kernel == 3:
        for stage in graph.enc + graph.dec:
            spec = stage.conv
            conv_cache[spec.name] = TimeConvCache(spec.f_in, spec.c_in)
    return StreamState(StftState(cfg.stft), gru_h, kv, conv_cache)


class EnhancerSession:
    """Stateful frame-by-frame enhancer over a validated weight bundle."""

    def __init__(self, bundle: WeightBundle, graph: ModelGraph | None = None):
        if graph is None:
            graph = build_model(bundle.config, fused=bundle.fused)
        elif graph.config != bundle.config or graph.fused != bundle.fused:
            raise ValueError("graph does not match the weight bundle")
        weights_io.validate_bundle(bundle, graph)
        self.graph = graph
        self.config = bundle.config
        self.weights = bundle.tensors
        self.bn_eps = bundle.bn_eps
        self.state = make_state(graph)

    @property
    def hop(self) -> int:
        return self.config.stft.hop_size

    def process_frame(self, samples: np.ndarray) -> np.ndarray:
        """Enhance one hop of audio; returns hop_size samples delayed by
        `dsp.latency_samples`. Mutates only this session's state."""
        samples = np.asarray(samples)
        if samples.shape != (self.hop,):
            raise ValueError(f"expected {self.hop} samples, got {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("non-finite input samples")
        spectrum = dsp.analyze_frame(self.state.stft, samples)
        mask = model_mod.forward_frame(self.graph, self.weights, self.state,
                                       spectrum, eps=self.bn_eps)
        enhanced = model_mod.apply_mask(spectrum, mask)
        out = dsp.synthesize_frame(self.state.stft, enhanced)
        self.state.frame_index += 1
        return out.astype(np.float32)

    def flush(self) -> np.ndarray:
        """Emit the last `latency_samples` of output by feeding zero frames."""
        latency = dsp.latency_samples(self.config.stft)
        chunks = []
        emitted = 0
        while emitted < latency:
            chunks.append(self.process_frame(np.zeros(self.hop, dtype=np.float32)))
            emitted += self.hop
        return np.concatenate(chunks)[:latency]

    def reset(self) -> None:
        self.state.reset()

    def state_nbytes(self) -> int:
        return self.state.nbytes()


def create_session(config: ModelConfig, bundle: WeightBundle) -> EnhancerSession:
    if config != bundle.config:
        raise ValueError("config does not match the weight bundle")
    return EnhancerSession(bundle)


def process_offline(graph: ModelGraph, weights, samples: np.ndarray,
                    eps: float = 1e-5) -> np.ndarray:
    """Whole-utterance reference path; equals the concatenated streaming
    output on the same samples (input is zero-padded to a frame multiple,
    output truncated back to the input length)."""
    cfg = graph.config.stft
    samples = np.asarray(samples, dtype=np.float64).reshape(-1)
    n0 = samples.shape[0]
    if n0 == 0:
        return np.zeros(0, dtype=np.float32)
    hop, fft_size = cfg.hop_size, cfg.fft_size
    n = -(-n0 // hop) * hop
    padded = np.zeros(n)
    padded[:n0] = samples
    buf = np.concatenate([np.zeros(fft_size - hop), padded])
    frames = np.lib.stride_tricks.sliding_window_view(buf, fft_size)[::hop]
    from . import fft as fft_mod

    spectra = fft_mod.rfft(frames * cfg.analysis_window())
    masks = model_mod.forward_sequence(graph, weights, spectra, eps=eps)
    enhanced = model_mod.apply_mask(spectra, masks)
    enhanced[:, 0] = enhanced[:, 0].real
    enhanced[:, -1] = enhanced[:, -1].real
    frames_out = fft_mod.irfft(enhanced, fft_size) * cfg.synthesis_window()
    out = np.zeros(n + fft_size)
    for t in range(frames_out.shape[0]):
        out[t * hop : t * hop + fft_size] += frames_out[t]
    return out[:n0].astype(np.float32)


def enhance_signal(session: EnhancerSession, samples: np.ndarray) -> tuple[np.ndarray, float]:
    """Stream a whole signal with latency compensation.

    Returns (enhanced signal of the same length, achieved real-time factor).
    """
    samples = np.asarray(samples, dtype=np.float32).reshape(-1)
    n0 = samples.shape[0]
    hop = session.hop
    n = -(-n0 // hop) * hop
    padded = np.zeros(n, dtype=np.float32)
    padded[:n0] = samples
    latency = dsp.latency_samples(session.config.stft)
    chunks = []
    start = time.perf_counter()
    for t in range(n // hop):
        chunks.append(session.process_frame(padded[t * hop : (t + 1) * hop]))
    chunks.append(session.flush())
    elapsed = time.perf_counter() - start
    out = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.float32)
    duration = n0 / session.config.stft.sample_rate if n0 else 1.0
    return out[latency : latency + n0], elapsed / duration


@dataclass
class CausalityReport:
    ok: bool
    divergence_frame: int
    prefix_samples: int
    first_diff_sample: int | None = None
    detail: str = ""

    @property
    def first_diff_frame(self) -> int | None:
        return None if self.first_diff_sample is None else self.first_diff_sample // 256


def causality_check(processor_factory, seed: int, n_frames: int = 40,
                    divergence_frame: int = 20, hop: int = 256) -> CausalityReport:
    """Feed two streams identical up to a divergence frame and assert that
    every output sample before it is bit-identical.

    `processor_factory()` must return a fresh callable mapping a full input
    signal to a full output signal of the same length.
    """
    rng = np.random.default_rng(seed)
    base = rng.uniform(-0.5, 0.5, n_frames * hop).astype(np.float32)
    alt = base.copy()
    split = divergence_frame * hop
    alt[split:] = rng.uniform(-0.5, 0.5, alt.shape[0] - split).astype(np.float32)
    out_a = np.asarray(processor_factory()(base))
    out_b = np.asarray(processor_factory()(alt))
    if out_a.shape != out_b.shape:
        return CausalityReport(False, divergence_frame, split, 0, "output shape mismatch")
    diff = np.nonzero(out_a != out_b)[0]
    first = int(diff[0]) if diff.size else None
    ok = first is None or first >= split
    detail = "no divergence before the perturbed frame" if ok else (
        f"output diverges at sample {first} (frame {first // hop}), "
        f"before perturbation at frame {divergence_frame}")
    return CausalityReport(ok, divergence_frame, split, first, detail)


def streaming_processor(bundle: WeightBundle):
    """Processor factory: fresh session streaming frame by frame."""
    def factory():
        session = EnhancerSession(bundle)

        def run(samples: np.ndarray) -> np.ndarray:
            hop = session.hop
            chunks = [
                session.process_frame(samples[t * hop : (t + 1) * hop])
                for t in range(len(samples) // hop)
            ]
            return np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.float32)

        return run

    return factory


def offline_processor(bundle: WeightBundle):
    """Processor factory: whole-signal reference path."""
    graph = build_model(bundle.config, fused=bundle.fused)

    def factory():
        def run(samples: np.ndarray) -> np.ndarray:
            return process_offline(graph, bundle.tensors, samples, eps=bundle.bn_eps)

        return run

    return factory
