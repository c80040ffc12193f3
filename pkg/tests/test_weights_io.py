import numpy as np
import pytest

from streamse import kernels, weights_io
from streamse.dsp import StftConfig
from streamse.kernels import NormParams
from streamse.model import ModelConfig, build_model, preset_config
from streamse.weights_io import (
    AlreadyFusedError,
    BadMagicError,
    ConfigBlobError,
    FusionError,
    ShapeMismatchError,
    TensorRecordError,
    TrailingDataError,
    TruncatedError,
    VersionError,
    WeightFormatError,
    fuse_batchnorm,
    load,
    random_bundle,
    save,
)


@pytest.fixture
def tiny():
    return ModelConfig(
        preset="custom", stft=StftConfig(fft_size=16, hop_size=8),
        enc_channels=(4,), enc_strides=(2,), n_blocks=1, hidden=4, n_heads=2,
        dprnn_hidden=2)


def test_save_load_round_trip_bit_identical(tmp_path, tiny):
    bundle = random_bundle(tiny, 3)
    path = tmp_path / "w.fenh"
    save(bundle, path)
    loaded = load(path)
    assert loaded.config == bundle.config
    assert loaded.fused is False
    assert list(loaded.tensors) == list(bundle.tensors)
    for name in bundle.tensors:
        assert np.array_equal(loaded.tensors[name], bundle.tensors[name])
    save(loaded, tmp_path / "w2.fenh")
    assert (tmp_path / "w.fenh").read_bytes() == (tmp_path / "w2.fenh").read_bytes()


def test_bad_magic(tmp_path, tiny):
    path = tmp_path / "w.fenh"
    save(random_bundle(tiny, 0), path)
    data = bytearray(path.read_bytes())
    data[1] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(BadMagicError):
        load(path)


def test_version_mismatch(tmp_path, tiny):
    path = tmp_path / "w.fenh"
    save(random_bundle(tiny, 0), path)
    data = bytearray(path.read_bytes())
    data[4] = 9
    path.write_bytes(bytes(data))
    with pytest.raises(VersionError):
        load(path)


def test_truncation_is_detected(tmp_path, tiny):
    path = tmp_path / "w.fenh"
    save(random_bundle(tiny, 0), path)
    data = path.read_bytes()
    for cut in (2, len(data) // 2, len(data) - 1):
        (tmp_path / "t.fenh").write_bytes(data[:cut])
        with pytest.raises((TruncatedError, BadMagicError)):
            load(tmp_path / "t.fenh")


def test_trailing_data_is_detected(tmp_path, tiny):
    path = tmp_path / "w.fenh"
    save(random_bundle(tiny, 0), path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(TrailingDataError):
        load(path)


def test_tensor_count_mismatch_is_truncation(tmp_path, tiny):
    bundle = random_bundle(tiny, 0)
    path = tmp_path / "w.fenh"
    save(bundle, path)
    data = bytearray(path.read_bytes())
    # the tensor-count u32 sits right after the config blob
    blob_len = int.from_bytes(data[8:12], "little")
    count_at = 12 + blob_len
    count = int.from_bytes(data[count_at : count_at + 4], "little")
    data[count_at : count_at + 4] = (count + 1).to_bytes(4, "little")
    path.write_bytes(bytes(data))
    with pytest.raises(TruncatedError):
        load(path)


def test_shape_mismatch_against_config(tmp_path, tiny):
    bundle = random_bundle(tiny, 0)
    bundle.tensors["enc0.conv.bias"] = np.zeros(5, dtype=np.float32)
    path = tmp_path / "w.fenh"
    save(bundle, path)
    with pytest.raises(ShapeMismatchError):
        load(path)


def test_missing_and_extra_tensors(tmp_path, tiny):
    bundle = random_bundle(tiny, 0)
    del bundle.tensors["head.conv.bias"]
    save(bundle, tmp_path / "a.fenh")
    with pytest.raises(ShapeMismatchError, match="missing"):
        load(tmp_path / "a.fenh")
    bundle = random_bundle(tiny, 0)
    bundle.tensors["bogus.weight"] = np.zeros(3, dtype=np.float32)
    save(bundle, tmp_path / "b.fenh")
    with pytest.raises(ShapeMismatchError, match="unexpected"):
        load(tmp_path / "b.fenh")


def test_non_finite_tensors_rejected(tmp_path, tiny):
    bundle = random_bundle(tiny, 0)
    bundle.tensors["head.conv.bias"] = np.array([np.nan, 0.0], dtype=np.float32)
    save(bundle, tmp_path / "w.fenh")
    with pytest.raises(TensorRecordError, match="non-finite"):
        load(tmp_path / "w.fenh")


def test_preset_config_tampering_rejected(tmp_path):
    bundle = random_bundle(preset_config("T"), 0)
    path = tmp_path / "w.fenh"
    save(bundle, path)
    data = path.read_bytes()
    # flip one digit of "n_heads":4 inside the canonical JSON blob
    tampered = data.replace(b'"n_heads":4', b'"n_heads":2')
    assert tampered != data
    path.write_bytes(tampered)
    with pytest.raises(ConfigBlobError, match="preset"):
        load(path)


def test_random_bundle_deterministic(tiny):
    a = random_bundle(tiny, 7)
    b = random_bundle(tiny, 7)
    assert all(np.array_equal(a.tensors[k], b.tensors[k]) for k in a.tensors)
    c = random_bundle(tiny, 8)
    assert any(not np.array_equal(a.tensors[k], c.tensors[k]) for k in a.tensors)


# fusion -----------------------------------------------------------------


def test_fold_identity_norm_is_noop(rng):
    w = rng.normal(size=(1, 3, 4, 5)).astype(np.float32)
    b = rng.normal(size=5).astype(np.float32)
    ones, zeros = np.ones(5, np.float32), np.zeros(5, np.float32)
    w2, b2 = weights_io.fold_conv_bn(w, b, ones, zeros, zeros, ones, eps=0.0)
    assert np.array_equal(w2, w)
    assert np.array_equal(b2, b)
    wl = rng.normal(size=(6, 5)).astype(np.float32)
    bl = rng.normal(size=6).astype(np.float32)
    w3, b3 = weights_io.fold_bn_linear(wl, bl, ones, zeros, zeros, ones, eps=0.0)
    assert np.array_equal(w3, wl)
    assert np.array_equal(b3, bl)


def test_fold_conv_bn_functional_equivalence(rng):
    f, c_in, c_out = 9, 3, 5
    x = rng.normal(size=(f, c_in)).astype(np.float32)
    w = rng.normal(size=(3, c_in, c_out)).astype(np.float32)
    b = rng.normal(size=c_out).astype(np.float32)
    p = NormParams(
        rng.uniform(0.5, 1.5, c_out).astype(np.float32),
        rng.normal(size=c_out).astype(np.float32),
        rng.normal(size=c_out).astype(np.float32),
        rng.uniform(0.5, 1.5, c_out).astype(np.float32))
    want = kernels.batchnorm_infer(kernels.conv_freq(x, w, b, 2, 1), p)
    w2, b2 = weights_io.fold_conv_bn(w, b, p.gamma, p.beta, p.mean, p.var, p.eps)
    got = kernels.conv_freq(x, w2, b2, 2, 1)
    assert np.max(np.abs(got - want)) < 1e-5


def test_fold_bn_linear_functional_equivalence(rng):
    c = 6
    x = rng.normal(size=(4, c)).astype(np.float32)
    w = rng.normal(size=(5, c)).astype(np.float32)
    b = rng.normal(size=5).astype(np.float32)
    p = NormParams(
        rng.uniform(0.5, 1.5, c).astype(np.float32),
        rng.normal(size=c).astype(np.float32),
        rng.normal(size=c).astype(np.float32),
        rng.uniform(0.5, 1.5, c).astype(np.float32))
    want = kernels.batchnorm_infer(x, p) @ w.T + b
    w2, b2 = weights_io.fold_bn_linear(w, b, p.gamma, p.beta, p.mean, p.var, p.eps)
    got = x @ w2.T + b2
    assert np.max(np.abs(got - want)) < 1e-5


def test_fuse_drops_norms_and_shrinks_graph(tiny):
    bundle = random_bundle(tiny, 1)
    graph = build_model(tiny)
    fused = fuse_batchnorm(bundle, graph)
    assert fused.fused
    assert not any(".norm." in n or "tnorm" in n or "fnorm" in n for n in fused.tensors)
    fused_graph = build_model(tiny, fused=True)
    assert len(fused_graph.layers) < len(graph.layers)
    weights_io.validate_bundle(fused, fused_graph)


def test_fuse_twice_rejected(tiny):
    bundle = random_bundle(tiny, 1)
    fused = fuse_batchnorm(bundle, build_model(tiny))
    with pytest.raises(AlreadyFusedError):
        fuse_batchnorm(fused, build_model(tiny))


def test_fuse_layernorm_config_rejected(tiny):
    from dataclasses import replace

    cfg = replace(tiny, norm="layer")
    bundle = random_bundle(cfg, 1)
    with pytest.raises(FusionError, match="no batch"):
        fuse_batchnorm(bundle, build_model(cfg))


def test_fuse_names_unfusable_layer(tiny):
    # a graph whose block pre-norm has no adjacent projection to fold into
    bundle = random_bundle(tiny, 1)
    graph = build_model(tiny)
    from dataclasses import replace as dc_replace

    broken_block = dc_replace(graph.blocks[0], gru=None, tattn=None)
    broken = dc_replace(graph, blocks=(broken_block,))
    with pytest.raises(FusionError, match="block0.tnorm"):
        fuse_batchnorm(bundle, broken)


def test_fuzz_structural_corruption_smoke(tmp_path):
    # the full 1000-case fuzz lives in the acceptance suite
    bundle = random_bundle(preset_config("T"), 0)
    path = tmp_path / "w.fenh"
    save(bundle, path)
    data = path.read_bytes()
    rng = np.random.default_rng(0)
    for i in range(100):
        cut = int(rng.integers(0, len(data) - 1))
        (tmp_path / "f.fenh").write_bytes(data[:cut])
        with pytest.raises(WeightFormatError):
            load(tmp_path / "f.fenh")
