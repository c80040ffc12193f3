import csv
import io
import warnings

import numpy as np
import pytest

from streamse import bench
from streamse.bench import BenchRow, MacReport, count_macs, emit_table, measure_rtf
from streamse.dsp import StftConfig
from streamse.model import ModelConfig, preset_config
from streamse.variants import make_variant


def test_count_macs_hand_example():
    # single 1x1 conv stage equivalent: F=4, Cin=2, Cout=3 -> 4*3*1*1*2 = 24
    cfg = ModelConfig(
        preset="custom", stft=StftConfig(fft_size=16, hop_size=8),
        enc_channels=(4,), enc_strides=(2,), n_blocks=0, hidden=4, n_heads=2,
        dprnn_hidden=2)
    report = count_macs(cfg)
    # enc0.conv: F_out=5, Cout=4, K=3, Cin=2 -> 5*4*3*2 = 120
    assert report.per_layer["enc0.conv"] == 120
    # head.conv: F=9, Cout=2, K=1, Cin=4 -> 9*2*4 = 72
    assert report.per_layer["head.conv"] == 72
    assert report.total_per_frame == sum(report.per_layer.values())
    assert report.macs_per_second == report.total_per_frame * 2000


def test_macs_static_and_deterministic():
    cfg = preset_config("B")
    a, b = count_macs(cfg), count_macs(cfg)
    assert a.per_layer == b.per_layer
    assert a.total_per_frame > 0
    assert all(v >= 0 for v in a.per_layer.values())


def test_preset_b_macs_near_published_value():
    macs = count_macs(preset_config("B")).macs_per_second
    assert abs(macs - 262e6) <= 0.35 * 262e6


def test_fused_macs_strictly_smaller():
    for preset in "TBSML":
        cfg = preset_config(preset)
        assert count_macs(cfg, fused=True).total_per_frame < count_macs(cfg).total_per_frame


def test_k3_macs_strictly_larger():
    for preset in "TBSML":
        base = preset_config(preset)
        k3 = make_variant(base, "k3")
        assert count_macs(k3).total_per_frame > count_macs(base).total_per_frame


def test_macs_ordering_follows_presets():
    totals = [count_macs(preset_config(p)).total_per_frame for p in "TBSML"]
    assert totals == sorted(totals)
    assert len(set(totals)) == len(totals)


def test_measure_rtf_validates_args():
    with pytest.raises(ValueError, match="5 seconds"):
        measure_rtf(preset_config("T"), seconds=2)
    with pytest.raises(ValueError, match="threads"):
        measure_rtf(None, seconds=5, threads=0)


@pytest.mark.slow
def test_noop_vs_preset_and_percentile_ordering():
    noop = measure_rtf(None, seconds=5, seed=0)
    t = measure_rtf(preset_config("T"), seconds=5, seed=0)
    assert noop.rtf < t.rtf
    for r in (noop, t):
        assert 0 < r.rtf
        assert r.p50_us <= r.p90_us <= r.p99_us
        assert r.warmup_frames >= 62


@pytest.mark.slow
def test_threads_do_not_change_outputs():
    one = measure_rtf(preset_config("T"), seconds=5, threads=1, seed=3)
    two = measure_rtf(preset_config("T"), seconds=5, threads=2, seed=3)
    assert one.output_digest == two.output_digest


@pytest.mark.slow
def test_rtf_stability_soft_gate():
    a = measure_rtf(preset_config("T"), seconds=5, seed=1)
    b = measure_rtf(preset_config("T"), seconds=5, seed=1)
    spread = abs(a.rtf - b.rtf) / min(a.rtf, b.rtf)
    if spread >= 0.20:
        warnings.warn(f"RTF unstable across runs: {a.rtf:.4f} vs {b.rtf:.4f}")


def test_emit_table_round_trip():
    rows = [
        BenchRow("T", "base", 19642, 6.76e7, 0.0123, 150.0, 180.0, 220.0, 1),
        BenchRow("B", "k3", 171562, 6.3e8, 0.0456, 500.0, 600.0, 700.0, 1),
    ]
    text, csv_text = emit_table(rows)
    lines = text.splitlines()
    assert lines[0].split()[0] == "preset"
    assert len(lines) == 2 + len(rows)
    parsed = list(csv.DictReader(io.StringIO(csv_text)))
    assert len(parsed) == 2
    assert parsed[0]["preset"] == "T"
    assert int(parsed[0]["params"]) == 19642
    assert float(parsed[1]["rtf"]) == pytest.approx(0.0456)
    assert emit_table(rows) == emit_table(rows)
