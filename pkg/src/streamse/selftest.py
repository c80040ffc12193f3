"""Built-in verification suites runnable from the CLI.

Four suites, each over every preset/variant combination with seeded random
weights:

  cola                unit-mask round trip reconstructs the delayed input
  streaming-offline   frame loop equals the whole-utterance reference path
  causality           future-input perturbation never changes past output
  fusion              batch-norm folding preserves the output and strictly
                      shrinks the layer list and the MAC count
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp, runtime, weights_io
from .bench import count_macs
from .dsp import StftConfig, StftState
from .model import PRESET_ORDER, build_model, preset_config
from .variants import VARIANT_TAGS, make_variant

STREAM_TOL = 1e-4
COLA_TOL = 1e-6


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def all_combos(presets: str = PRESET_ORDER) -> list[tuple[str, str]]:
    return [(p, tag) for p in presets for tag in VARIANT_TAGS]


def _combo_bundle(preset: str, tag: str, seed: int):
    config = make_variant(preset_config(preset), tag)
    bundle = weights_io.random_bundle(config, seed)
    return config, bundle


def suite_cola(seed: int = 0, seconds: float = 10.0) -> SuiteResult:
    cfg = StftConfig()
    rng = np.random.default_rng(seed)
    n = int(seconds * cfg.sample_rate) // cfg.hop_size * cfg.hop_size
    x = rng.uniform(-1.0, 1.0, n)
    state = StftState(cfg)
    out = np.concatenate([
        dsp.synthesize_frame(state, dsp.analyze_frame(state, x[t : t + cfg.hop_size]))
        for t in range(0, n, cfg.hop_size)
    ])
    delay = dsp.latency_samples(cfg)
    err = np.max(np.abs(out[delay:] - x[: n - delay]))
    rel = err / np.sqrt(np.mean(x**2))
    passed = rel < COLA_TOL and dsp.cola_error(cfg) < 1e-12
    return SuiteResult("cola", passed, f"max err {rel:.2e} of input RMS (gate {COLA_TOL:.0e})")


def suite_streaming_offline(seed: int = 0, seconds: float = 3.0,
                            combos=None) -> SuiteResult:
    combos = combos if combos is not None else all_combos()
    worst = 0.0
    worst_combo = ""
    for i, (preset, tag) in enumerate(combos):
        config, bundle = _combo_bundle(preset, tag, seed + i)
        hop = config.stft.hop_size
        n = int(seconds * config.stft.sample_rate) // hop * hop
        rng = np.random.default_rng(seed + 1000 + i)
        audio = rng.uniform(-0.5, 0.5, n).astype(np.float32)
        streamed = runtime.streaming_processor(bundle)()(audio)
        offline = runtime.offline_processor(bundle)()(audio)
        diff = float(np.max(np.abs(streamed - offline))) if n else 0.0
        if diff > worst:
            worst, worst_combo = diff, f"{preset}/{tag}"
    passed = worst < STREAM_TOL
    return SuiteResult(
        "streaming-offline", passed,
        f"worst |diff| {worst:.2e} at {worst_combo or 'n/a'} (gate {STREAM_TOL:.0e})")


def suite_causality(seed: int = 0, combos=None, extra_processors=None) -> SuiteResult:
    combos = combos if combos is not None else all_combos()
    failures = []
    for i, (preset, tag) in enumerate(combos):
        _, bundle = _combo_bundle(preset, tag, seed + i)
        for label, factory in (
            ("streaming", runtime.streaming_processor(bundle)),
            ("offline", runtime.offline_processor(bundle)),
        ):
            report = runtime.causality_check(factory, seed + i)
            if not report.ok:
                failures.append(f"{preset}/{tag}/{label}: {report.detail}")
    for label, factory in (extra_processors or []):
        report = runtime.causality_check(factory, seed)
        if not report.ok:
            failures.append(f"{label}: {report.detail}")
    passed = not failures
    detail = "no violations" if passed else "; ".join(failures[:3])
    return SuiteResult("causality", passed, detail)


def broken_cache_processor(bundle):
    """Negative-control fixture: leaks one future frame into the output."""
    inner = runtime.offline_processor(bundle)

    def factory():
        run = inner()
        hop = bundle.config.stft.hop_size

        def broken(samples):
            out = run(samples)
            leak = np.concatenate([samples[hop:], np.zeros(hop, dtype=np.float32)])
            return out + np.float32(1e-3) * leak

        return broken

    return factory


def suite_fusion(seed: int = 0, seconds: float = 3.0, presets: str = PRESET_ORDER) -> SuiteResult:
    worst = 0.0
    worst_preset = ""
    for i, preset in enumerate(presets):
        config = preset_config(preset)
        bundle = weights_io.random_bundle(config, seed + i)
        graph = build_model(config)
        fused = weights_io.fuse_batchnorm(bundle, graph)
        fused_graph = build_model(config, fused=True)
        if len(fused_graph.layers) >= len(graph.layers):
            return SuiteResult("fusion", False, f"{preset}: fused graph not smaller")
        if count_macs(config, fused=True).total_per_frame >= count_macs(config).total_per_frame:
            return SuiteResult("fusion", False, f"{preset}: fused MACs not smaller")
        hop = config.stft.hop_size
        n = int(seconds * config.stft.sample_rate) // hop * hop
        rng = np.random.default_rng(seed + 2000 + i)
        audio = rng.uniform(-0.5, 0.5, n).astype(np.float32)
        out_a = runtime.streaming_processor(bundle)()(audio)
        out_b = runtime.streaming_processor(fused)()(audio)
        diff = float(np.max(np.abs(out_a - out_b)))
        if diff > worst:
            worst, worst_preset = diff, preset
    passed = worst < STREAM_TOL
    return SuiteResult(
        "fusion", passed,
        f"worst fused-vs-unfused |diff| {worst:.2e} at {worst_preset or 'n/a'} "
        f"(gate {STREAM_TOL:.0e})")


def run_selftest(seed: int = 0, seconds: float = 3.0,
                 presets: str = PRESET_ORDER) -> list[SuiteResult]:
    combos = all_combos(presets)
    return [
        suite_cola(seed),
        suite_streaming_offline(seed, seconds, combos),
        suite_causality(seed, combos),
        suite_fusion(seed, seconds, presets),
    ]
