import numpy as np
import pytest

from streamse import dsp
from streamse.dsp import StftConfig, StftState
from streamse.naive import dft_naive


@pytest.fixture
def cfg():
    return StftConfig()


def stream_round_trip(cfg, x):
    state = StftState(cfg)
    hop = cfg.hop_size
    out = []
    for t in range(0, len(x), hop):
        spec = dsp.analyze_frame(state, x[t : t + hop])
        out.append(dsp.synthesize_frame(state, spec))
    return np.concatenate(out)


def test_config_validation():
    with pytest.raises(ValueError):
        StftConfig(sample_rate=44100)
    with pytest.raises(ValueError):
        StftConfig(fft_size=500, hop_size=250)
    with pytest.raises(ValueError):
        StftConfig(fft_size=512, hop_size=128)


def test_latency_values():
    assert dsp.latency_samples(StftConfig()) == 256
    assert dsp.latency_samples(StftConfig(fft_size=256, hop_size=128)) == 128
    # 256 samples at 16 kHz is the documented 16 ms algorithmic latency
    assert dsp.latency_samples(StftConfig()) / 16000 == pytest.approx(0.016)


def test_cola_exact(cfg):
    assert dsp.cola_error(cfg) < 1e-12


def test_analyze_zero_input(cfg):
    state = StftState(cfg)
    spec = dsp.analyze_frame(state, np.zeros(cfg.hop_size))
    assert np.all(spec == 0)


def test_analyze_constant_input(cfg):
    # constant 1.0 with pre-filled buffer: bin0 = sum(window), bin1 = -sum/2
    state = StftState(cfg)
    state.tail[:] = 1.0
    spec = dsp.analyze_frame(state, np.ones(cfg.hop_size))
    wsum = cfg.analysis_window().sum()
    assert spec[0].real == pytest.approx(wsum, rel=1e-12)
    assert spec[1].real == pytest.approx(-wsum / 2, rel=1e-9)
    assert abs(spec[1].imag) < 1e-9
    assert np.max(np.abs(spec[2:])) < 1e-9
    # cross-check the whole frame against the O(N^2) DFT
    want = dft_naive(cfg.analysis_window() * 1.0)[: cfg.n_bins]
    assert np.max(np.abs(spec - want)) < 1e-9


def test_analyze_cosine_bin(cfg):
    state = StftState(cfg)
    n = np.arange(cfg.fft_size)
    x = np.cos(2 * np.pi * 16 * n / cfg.fft_size)
    state.tail[:] = x[: cfg.hop_size]
    spec = dsp.analyze_frame(state, x[cfg.hop_size :])
    assert np.argmax(np.abs(spec)) == 16
    want = dft_naive(cfg.analysis_window() * x)[: cfg.n_bins]
    ref = np.max(np.abs(want))
    assert np.max(np.abs(spec - want)) < 1e-5 * ref


def test_analyze_wrong_sample_count(cfg):
    state = StftState(cfg)
    with pytest.raises(ValueError, match="expected exactly"):
        dsp.analyze_frame(state, np.zeros(cfg.hop_size - 1))


def test_synthesize_zero_spectrum(cfg):
    state = StftState(cfg)
    for _ in range(4):
        out = dsp.synthesize_frame(state, np.zeros(cfg.n_bins, dtype=np.complex128))
        assert np.all(out == 0)


def test_synthesize_rejects_non_finite(cfg):
    state = StftState(cfg)
    spec = np.zeros(cfg.n_bins, dtype=np.complex128)
    spec[3] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        dsp.synthesize_frame(state, spec)


def test_single_frame_impulse_matches_naive_idft(cfg):
    # one synthesize call is just iDFT * synthesis window
    state = StftState(cfg)
    spec = np.zeros(cfg.n_bins, dtype=np.complex128)
    spec[5] = 1.0 + 0.5j
    out = dsp.synthesize_frame(state, spec)
    full = np.zeros(cfg.fft_size, dtype=np.complex128)
    full[:257] = spec
    full[257:] = np.conj(spec[-2:0:-1])
    want = (dft_naive(full, inverse=True).real * cfg.synthesis_window())[: cfg.hop_size]
    assert np.max(np.abs(out - want)) < 1e-12


def test_round_trip_identity_white_noise(cfg, rng):
    x = rng.uniform(-1, 1, cfg.hop_size * 40)
    out = stream_round_trip(cfg, x)
    delay = dsp.latency_samples(cfg)
    err = np.max(np.abs(out[delay:] - x[: len(x) - delay]))
    assert err < 1e-6 * np.sqrt(np.mean(x**2))
    assert np.max(np.abs(out[:delay])) < 1e-12  # leading latency is silence


def test_analysis_is_linear(cfg, rng):
    x = rng.normal(size=cfg.hop_size)
    y = rng.normal(size=cfg.hop_size)
    sa, sb, sc = StftState(cfg), StftState(cfg), StftState(cfg)
    tail_a = rng.normal(size=cfg.fft_size - cfg.hop_size)
    tail_b = rng.normal(size=cfg.fft_size - cfg.hop_size)
    sa.tail[:] = tail_a
    sb.tail[:] = tail_b
    sc.tail[:] = tail_a + 2 * tail_b
    fa = dsp.analyze_frame(sa, x)
    fb = dsp.analyze_frame(sb, y)
    fc = dsp.analyze_frame(sc, x + 2 * y)
    scale = np.max(np.abs(fa)) + np.max(np.abs(fb))
    assert np.max(np.abs(fc - (fa + 2 * fb))) < 1e-9 * scale


def test_streaming_is_causal(cfg, rng):
    x = rng.uniform(-1, 1, cfg.hop_size * 20)
    y = x.copy()
    y[cfg.hop_size * 10 :] += 1.0  # perturb the future only
    out_x = stream_round_trip(cfg, x)
    out_y = stream_round_trip(cfg, y)
    assert np.array_equal(out_x[: cfg.hop_size * 10], out_y[: cfg.hop_size * 10])
