"""RTF measurement harness and static MAC counter.

RTF = processing time / audio duration (0.02 means 50x faster than real
time). Frames from the first second are warmup and excluded. MACs follow
the usual conventions: convs count F_out*Cout*Kf*Kt*Cin per frame, GRUs
3H(I+H) per position, attention 4FC^2 + 2F^2C (2FWC for windowed time
attention). Normalizations count one multiply-accumulate per element (so a
fused graph is strictly cheaper); pure activations are not counted. Totals
are reported per second of audio (sample_rate / hop_size frames).
"""

from __future__ import annotations

import csv
import hashlib
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import dsp, weights_io
from .dsp import StftConfig, StftState
from .model import ModelConfig, build_model, parameter_count
from .runtime import EnhancerSession
from .variants import make_variant
from .weights_io import WeightBundle


@dataclass
class RtfReport:
    preset: str
    variant: str
    threads: int
    seconds: float
    frames_timed: int
    warmup_frames: int
    mean_us: float
    p50_us: float
    p90_us: float
    p99_us: float
    rtf: float
    output_digest: str


@dataclass
class MacReport:
    per_layer: dict[str, int]
    total_per_frame: int
    macs_per_second: float


def count_macs(config: ModelConfig, fused: bool = False) -> MacReport:
    """Static per-frame multiply-accumulate counts from the shape plan."""
    graph = build_model(config, fused=fused)
    per_layer: dict[str, int] = {}
    for layer in graph.layers:
        kind = layer.kind
        if kind == "conv":
            macs = layer.f_out * layer.c_out * layer.attrs["kf"] * layer.attrs["tk"] * layer.c_in
        elif kind == "deconv":
            macs = layer.f_in * layer.attrs["kf"] * layer.attrs["tk"] * layer.c_in * layer.c_out
        elif kind == "norm":
            macs = layer.f_out * layer.c_out
        elif kind == "gru":
            h = layer.attrs["hidden"]
            macs = layer.f_out * 3 * h * (layer.c_in + h)
        elif kind == "linear":
            macs = layer.f_out * layer.c_in * layer.c_out
        elif kind == "attn":
            f, c = layer.f_out, layer.c_out
            macs = 4 * f * c * c + 2 * f * f * c
        elif kind == "tattn":
            f, c = layer.f_out, layer.c_out
            macs = 4 * f * c * c + 2 * f * layer.attrs["window"] * c
        elif kind == "bigru":
            g = layer.attrs["hidden"]
            macs = 2 * layer.f_out * 3 * g * (layer.c_in + g)
        else:  # activations
            continue
        per_layer[layer.name] = macs
    total = sum(per_layer.values())
    frames_per_second = config.stft.sample_rate / config.stft.hop_size
    return MacReport(per_layer, total, total * frames_per_second)


def _dsp_only_step(stft: StftConfig):
    state = StftState(stft)

    def step(chunk):
        return dsp.synthesize_frame(state, dsp.analyze_frame(state, chunk)).astype(np.float32)

    return step


def measure_rtf(config: ModelConfig | None, bundle: WeightBundle | None = None,
                seconds: float = 10.0, threads: int = 1, seed: int = 0) -> RtfReport:
    """Stream seeded random audio and time each process_frame call.

    `config=None` measures the DSP front-end alone (unit mask, no model).
    """
    if seconds < 5:
        raise ValueError("measurement needs at least 5 seconds of audio")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    stft = config.stft if config is not None else StftConfig()
    hop = stft.hop_size
    total_frames = int(seconds * stft.sample_rate) // hop
    warmup = -(-stft.sample_rate // hop)
    if config is not None and bundle is None:
        bundle = weights_io.random_bundle(config, seed)
        if config.norm == "batch":
            bundle = weights_io.fuse_batchnorm(bundle, build_model(config))

    def worker(stream_id: int):
        rng = np.random.default_rng(seed + stream_id)
        audio = rng.uniform(-0.5, 0.5, total_frames * hop).astype(np.float32)
        if config is None:
            step = _dsp_only_step(stft)
        else:
            session = EnhancerSession(bundle)
            step = session.process_frame
        times = np.empty(total_frames)
        digest = hashlib.sha256()
        for t in range(total_frames):
            chunk = audio[t * hop : (t + 1) * hop]
            t0 = time.perf_counter_ns()
            out = step(chunk)
            times[t] = time.perf_counter_ns() - t0
            digest.update(out.tobytes())
        return times, digest.hexdigest()

    if threads == 1:
        times, digest = worker(0)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(worker, range(threads)))
        times, digest = results[0]

    timed = times[warmup:]
    duration = timed.shape[0] * hop / stft.sample_rate
    rtf = float(timed.sum() / 1e9 / duration)
    return RtfReport(
        preset=(config.preset if config is not None else "noop"),
        variant=_variant_tag(config) if config is not None else "base",
        threads=threads,
        seconds=seconds,
        frames_timed=int(timed.shape[0]),
        warmup_frames=int(warmup),
        mean_us=float(timed.mean() / 1e3),
        p50_us=float(np.percentile(timed, 50) / 1e3),
        p90_us=float(np.percentile(timed, 90) / 1e3),
        p99_us=float(np.percentile(timed, 99) / 1e3),
        rtf=rtf,
        output_digest=digest,
    )


def _variant_tag(config: ModelConfig) -> str:
    if config.variant != "rnnformer":
        return config.variant
    if config.time_kernel == 3:
        return "k3"
    if config.norm == "layer":
        return "layernorm"
    return "base"


@dataclass
class BenchRow:
    preset: str
    variant: str
    params: int
    macs_per_s: float
    rtf: float
    p50_us: float
    p90_us: float
    p99_us: float
    threads: int


def run_bench(preset: str, variant_tag: str = "base", seconds: float = 10.0,
              threads: int = 1, seed: int = 0) -> BenchRow:
    from .model import preset_config

    config = make_variant(preset_config(preset), variant_tag)
    report = measure_rtf(config, seconds=seconds, threads=threads, seed=seed)
    return BenchRow(
        preset=preset,
        variant=variant_tag,
        params=parameter_count(config),
        macs_per_s=count_macs(config).macs_per_second,
        rtf=report.rtf,
        p50_us=report.p50_us,
        p90_us=report.p90_us,
        p99_us=report.p99_us,
        threads=threads,
    )


CSV_FIELDS = ("preset", "variant", "params", "macs_per_s", "rtf",
              "p50_us", "p90_us", "p99_us", "threads")


def emit_table(rows: list[BenchRow]) -> tuple[str, str]:
    """Deterministic text table + CSV for a list of bench rows."""
    header = f"{'preset':<8}{'variant':<11}{'params':>10}{'macs/s':>12}{'rtf':>9}" \
             f"{'p50_us':>9}{'p90_us':>9}{'p99_us':>9}{'threads':>9}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r.preset:<8}{r.variant:<11}{r.params:>10d}{r.macs_per_s:>12.0f}"
            f"{r.rtf:>9.4f}{r.p50_us:>9.1f}{r.p90_us:>9.1f}{r.p99_us:>9.1f}{r.threads:>9d}"
        )
    text = "\n".join(lines)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in rows:
        writer.writerow([r.preset, r.variant, r.params, f"{r.macs_per_s:.0f}",
                         f"{r.rtf:.6f}", f"{r.p50_us:.3f}", f"{r.p90_us:.3f}",
                         f"{r.p99_us:.3f}", r.threads])
    return text, buf.getvalue()
