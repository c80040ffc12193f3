import numpy as np
import pytest
from scipy.io import wavfile

from streamse import cli, weights_io
from streamse.model import preset_config
from streamse.variants import make_variant


def write_input(path, rate=16000, seconds=0.5, dtype=np.float32, channels=1, seed=0):
    rng = np.random.default_rng(seed)
    n = int(rate * seconds)
    data = rng.uniform(-0.5, 0.5, (n, channels) if channels > 1 else n)
    if dtype == np.int16:
        data = (data * 32767).astype(np.int16)
    else:
        data = data.astype(np.float32)
    wavfile.write(path, rate, data)
    return data


@pytest.fixture
def t_weights(tmp_path):
    path = tmp_path / "t.fenh"
    weights_io.save(weights_io.random_bundle(preset_config("T"), 0), path)
    return path


def test_enhance_zero_weights_silence(tmp_path, capsys):
    wpath = tmp_path / "zero.fenh"
    weights_io.save(weights_io.zero_bundle(preset_config("T")), wpath)
    inp, outp = tmp_path / "in.wav", tmp_path / "out.wav"
    write_input(inp)
    code = cli.main(["enhance", "--model", str(wpath), str(inp), str(outp)])
    assert code == 0
    assert "RTF" in capsys.readouterr().out
    rate, data = wavfile.read(outp)
    assert rate == 16000
    assert data.dtype == np.float32
    assert np.all(data == 0)


def test_enhance_identity_mask_round_trip(tmp_path):
    wpath = tmp_path / "id.fenh"
    weights_io.save(weights_io.identity_mask_bundle(preset_config("T")), wpath)
    inp, outp = tmp_path / "in.wav", tmp_path / "out.wav"
    original = write_input(inp, dtype=np.int16)
    assert cli.main(["enhance", "--model", str(wpath), str(inp), str(outp)]) == 0
    rate, data = wavfile.read(outp)
    assert data.dtype == np.int16 and len(data) == len(original)
    x = original.astype(np.float64) / 32768.0
    y = data.astype(np.float64) / 32768.0
    rms = np.sqrt(np.mean((x - y) ** 2)) / np.sqrt(np.mean(x**2))
    assert rms < 1e-3


def test_enhance_rejects_wrong_rate(tmp_path, t_weights, capsys):
    inp = tmp_path / "in44.wav"
    write_input(inp, rate=44100)
    code = cli.main(["enhance", "--model", str(t_weights), str(inp), str(tmp_path / "o.wav")])
    assert code == 1
    assert "expected 16000 Hz" in capsys.readouterr().err


def test_enhance_rejects_stereo(tmp_path, t_weights, capsys):
    inp = tmp_path / "stereo.wav"
    write_input(inp, channels=2)
    code = cli.main(["enhance", "--model", str(t_weights), str(inp), str(tmp_path / "o.wav")])
    assert code == 1
    assert "mono" in capsys.readouterr().err


def test_enhance_variant_assertion(tmp_path, t_weights, capsys):
    inp = tmp_path / "in.wav"
    write_input(inp)
    code = cli.main(["enhance", "--model", str(t_weights), "--variant", "k3",
                     str(inp), str(tmp_path / "o.wav")])
    assert code == 1
    assert "variant" in capsys.readouterr().err


@pytest.mark.slow
def test_bench_single_row(capsys):
    assert cli.main(["bench", "--preset", "T", "--seconds", "5"]) == 0
    out = capsys.readouterr().out
    rows = [l for l in out.splitlines() if l.startswith("T ")]
    assert len(rows) == 1


@pytest.mark.slow
def test_bench_all_emits_five_rows_in_order(tmp_path, capsys):
    csv_path = tmp_path / "bench.csv"
    assert cli.main(["bench", "--preset", "all", "--seconds", "5",
                     "--csv", str(csv_path)]) == 0
    out = capsys.readouterr().out
    order = [l.split()[0] for l in out.splitlines()[2:] if l and not l.startswith("csv")]
    assert order == list("TBSML")
    assert csv_path.exists()


@pytest.mark.slow
def test_bench_k3_row_params(capsys):
    assert cli.main(["bench", "--preset", "B", "--variant", "k3", "--seconds", "5"]) == 0
    out = capsys.readouterr().out
    row = [l for l in out.splitlines() if l.startswith("B ")][0]
    params = int(row.split()[2])
    assert abs(params - 187_000) <= 0.15 * 187_000


def test_bench_rejects_unknown_preset(capsys):
    assert cli.main(["bench", "--preset", "Q"]) == 1


@pytest.mark.slow
def test_selftest_quick_pass(capsys):
    code = cli.main(["selftest", "--presets", "T", "--seconds", "1"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.count("PASS") == 4
    assert "FAIL" not in out


@pytest.mark.slow
def test_selftest_report_is_deterministic(capsys):
    args = ["selftest", "--presets", "T", "--seconds", "1", "--seed", "5"]
    code1 = cli.main(args)
    out1 = capsys.readouterr().out
    code2 = cli.main(args)
    out2 = capsys.readouterr().out
    assert code1 == code2 == 0
    assert out1 == out2


def test_weights_inspect_lists_tensors(tmp_path, t_weights, capsys):
    from streamse.model import build_model

    assert cli.main(["weights", "inspect", str(t_weights)]) == 0
    out = capsys.readouterr().out
    assert "preset=T" in out
    listed = {line.split()[0] for line in out.splitlines()[1:] if line.strip()}
    expected = {name for name, _, _ in build_model(preset_config("T")).param_specs()}
    assert listed == expected


def test_weights_fuse_and_fuse_twice(tmp_path, t_weights, capsys):
    fused = tmp_path / "fused.fenh"
    assert cli.main(["weights", "fuse", str(t_weights), str(fused)]) == 0
    assert weights_io.load(fused).fused
    code = cli.main(["weights", "fuse", str(fused), str(tmp_path / "f2.fenh")])
    assert code == 1
    assert "already fused" in capsys.readouterr().err


def test_weights_randomize_deterministic(tmp_path):
    a, b = tmp_path / "a.fenh", tmp_path / "b.fenh"
    assert cli.main(["weights", "randomize", "--preset", "T", "--seed", "7", str(a)]) == 0
    assert cli.main(["weights", "randomize", "--preset", "T", "--seed", "7", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.fenh"
    assert cli.main(["weights", "randomize", "--preset", "T", "--seed", "8", str(c)]) == 0
    assert a.read_bytes() != c.read_bytes()


def test_corrupt_weight_file_exits_one(tmp_path, t_weights, capsys):
    data = bytearray(t_weights.read_bytes())
    data[0] ^= 0xFF
    bad = tmp_path / "bad.fenh"
    bad.write_bytes(bytes(data))
    inp = tmp_path / "in.wav"
    write_input(inp)
    code = cli.main(["enhance", "--model", str(bad), str(inp), str(tmp_path / "o.wav")])
    assert code == 1
    assert "magic" in capsys.readouterr().err
