"""Causal STFT analysis/synthesis with exact constant-overlap-add.

Frames are processed one hop at a time: `analyze_frame` consumes exactly
`hop_size` new samples (keeping the previous `fft_size - hop_size` in the
stream state) and `synthesize_frame` emits exactly `hop_size` fully
accumulated samples. The round trip through a unit mask reconstructs the
input delayed by `latency_samples()` = fft_size - hop_size.

The synthesis window is the Hann analysis window divided by the summed
squared window across the two overlapping phases, which makes the
overlap-add constant equal to 1 for every sample (exact COLA at 50%
overlap). DSP runs in float64; the model kernels downstream are float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import fft


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis geometry. Fixed 16 kHz; fft_size = 2 * hop_size."""

    sample_rate: int = 16000
    fft_size: int = 512
    hop_size: int = 256

    def __post_init__(self):
        if self.sample_rate != 16000:
            raise ValueError(f"sample rate fixed at 16000 Hz, got {self.sample_rate}")
        if self.fft_size < 4 or self.fft_size & (self.fft_size - 1):
            raise ValueError(f"fft_size must be a power of two, got {self.fft_size}")
        if self.fft_size != 2 * self.hop_size:
            raise ValueError("fft_size must equal 2 * hop_size")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def frame_period_ms(self) -> float:
        return 1000.0 * self.hop_size / self.sample_rate

    def analysis_window(self) -> np.ndarray:
        return _windows(self.fft_size)[0]

    def synthesis_window(self) -> np.ndarray:
        return _windows(self.fft_size)[1]


@lru_cache(maxsize=None)
def _windows(fft_size: int) -> tuple[np.ndarray, np.ndarray]:
    n = np.arange(fft_size)
    wa = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / fft_size)
    # wa*ws summed over the two overlapping phases must equal 1 exactly
    denom = wa**2 + np.roll(wa, fft_size // 2) ** 2
    ws = wa / denom
    wa.setflags(write=False)
    ws.setflags(write=False)
    return wa, ws


def cola_error(cfg: StftConfig) -> float:
    """Max deviation of the overlap-added window product from 1."""
    wa, ws = _windows(cfg.fft_size)
    prod = wa * ws
    total = prod[: cfg.hop_size] + prod[cfg.hop_size :]
    return float(np.max(np.abs(total - 1.0)))


def latency_samples(cfg: StftConfig) -> int:
    """Algorithmic latency of the analyze/synthesize chain in samples."""
    return cfg.fft_size - cfg.hop_size


@dataclass
class StftState:
    """Mutable per-stream DSP buffers (input tail + overlap-add accumulator)."""

    cfg: StftConfig
    tail: np.ndarray = field(init=False)
    ola: np.ndarray = field(init=False)

    def __post_init__(self):
        self.tail = np.zeros(self.cfg.fft_size - self.cfg.hop_size)
        self.ola = np.zeros(self.cfg.fft_size)

    def reset(self) -> None:
        self.tail[:] = 0.0
        self.ola[:] = 0.0

    def nbytes(self) -> int:
        return self.tail.nbytes + self.ola.nbytes


def analyze_frame(state: StftState, samples: np.ndarray) -> np.ndarray:
    """Windowed DFT of (buffered tail ++ new hop); advances the buffer."""
    cfg = state.cfg
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape != (cfg.hop_size,):
        raise ValueError(f"expected exactly {cfg.hop_size} samples, got {samples.shape}")
    frame = np.concatenate([state.tail, samples])
    state.tail[:] = frame[cfg.hop_size :]
    return fft.rfft(frame * cfg.analysis_window())


def synthesize_frame(state: StftState, spectrum: np.ndarray) -> np.ndarray:
    """Inverse DFT + synthesis window + overlap-add; emits the oldest hop."""
    cfg = state.cfg
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    if spectrum.shape != (cfg.n_bins,):
        raise ValueError(f"expected {cfg.n_bins} bins, got {spectrum.shape}")
    if not np.all(np.isfinite(spectrum)):
        raise ValueError("non-finite spectrum")
    spectrum = spectrum.copy()
    # real output: DC and Nyquist carry no imaginary part
    spectrum[0] = spectrum[0].real
    spectrum[-1] = spectrum[-1].real
    frame = fft.irfft(spectrum, cfg.fft_size) * cfg.synthesis_window()
    state.ola += frame
    out = state.ola[: cfg.hop_size].copy()
    state.ola[: -cfg.hop_size] = state.ola[cfg.hop_size :]
    state.ola[-cfg.hop_size :] = 0.0
    return out
