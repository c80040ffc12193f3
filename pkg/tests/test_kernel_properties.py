"""Randomized agreement between the vectorized kernels and their loop twins."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from streamse import kernels, naive
from streamse.kernels import GruParams, MhsaParams, NormParams

COMMON = dict(max_examples=100, deadline=None, derandomize=True)


def arr(rng, shape):
    return rng.uniform(-1.0, 1.0, size=shape).astype(np.float32)


@st.composite
def conv_case(draw):
    seed = draw(st.integers(0, 2**31))
    f = draw(st.integers(1, 10))
    c_in = draw(st.integers(1, 6))
    c_out = draw(st.integers(1, 6))
    k = draw(st.sampled_from([1, 3]))
    stride = draw(st.sampled_from([1, 2]))
    pad = draw(st.integers(0, 1)) if k == 3 else 0
    if (f + 2 * pad - k) // stride + 1 < 1:
        f = k + stride
    return seed, f, c_in, c_out, k, stride, pad


@given(conv_case())
@settings(**COMMON)
def test_conv_freq_property(case):
    seed, f, c_in, c_out, k, stride, pad = case
    rng = np.random.default_rng(seed)
    x = arr(rng, (f, c_in))
    w = arr(rng, (k, c_in, c_out))
    b = arr(rng, (c_out,))
    got = kernels.conv_freq(x, w, b, stride, pad)
    want = naive.conv_freq_naive(x, w, b, stride, pad)
    assert np.max(np.abs(got - want)) < 1e-5


@given(conv_case())
@settings(**COMMON)
def test_deconv_freq_property(case):
    seed, f, c_in, c_out, k, stride, _ = case
    rng = np.random.default_rng(seed)
    x = arr(rng, (f, c_in))
    w = arr(rng, (k, c_out, c_in))
    b = arr(rng, (c_out,))
    got = kernels.deconv_freq(x, w, b, stride)
    want = naive.deconv_freq_naive(x, w, b, stride)
    assert np.max(np.abs(got - want)) < 1e-5


@given(st.integers(0, 2**31), st.integers(1, 8), st.integers(1, 8))
@settings(**COMMON)
def test_gru_step_property(seed, i, h):
    rng = np.random.default_rng(seed)
    p = GruParams(arr(rng, (3 * h, i)), arr(rng, (3 * h, h)),
                  arr(rng, (3 * h,)), arr(rng, (3 * h,)))
    x, hid = arr(rng, (i,)), arr(rng, (h,))
    got = kernels.gru_step(x, hid, p)
    want = naive.gru_step_naive(x, hid, p.w_ih, p.w_hh, p.b_ih, p.b_hh)
    assert np.max(np.abs(got - want)) < 1e-5


@given(st.integers(0, 2**31), st.integers(1, 8), st.sampled_from([1, 2, 4]),
       st.integers(1, 4))
@settings(**COMMON)
def test_mhsa_freq_property(seed, f, heads, d):
    rng = np.random.default_rng(seed)
    c = heads * d
    p = MhsaParams(*[arr(rng, (c, c)) for _ in range(4)],
                   *[arr(rng, (c,)) for _ in range(4)], heads)
    x = arr(rng, (f, c))
    got = kernels.mhsa_freq(x, p)
    want = naive.mhsa_freq_naive(x, p.wq, p.wk, p.wv, p.wo, p.bq, p.bk, p.bv, p.bo, heads)
    assert np.max(np.abs(got - want)) < 1e-5


@given(st.integers(0, 2**31), st.integers(1, 10), st.integers(1, 8))
@settings(**COMMON)
def test_batchnorm_property(seed, f, c):
    rng = np.random.default_rng(seed)
    p = NormParams(arr(rng, (c,)), arr(rng, (c,)), arr(rng, (c,)),
                   rng.uniform(0.5, 1.5, c).astype(np.float32))
    x = arr(rng, (f, c))
    got = kernels.batchnorm_infer(x, p)
    want = naive.batchnorm_infer_naive(x, p.gamma, p.beta, p.mean, p.var, p.eps)
    assert np.max(np.abs(got - want)) < 1e-5


@given(st.integers(0, 2**31), st.integers(1, 10), st.integers(2, 8))
@settings(**COMMON)
def test_layernorm_property(seed, f, c):
    rng = np.random.default_rng(seed)
    gamma, beta = arr(rng, (c,)), arr(rng, (c,))
    x = arr(rng, (f, c))
    got = kernels.layernorm(x, gamma, beta)
    want = naive.layernorm_naive(x, gamma, beta, 1e-5)
    assert np.max(np.abs(got - want)) < 1e-5


@given(st.integers(0, 2**31), st.sampled_from([1, 2]))
@settings(**COMMON)
def test_conv_deconv_adjoint_property(seed, stride):
    rng = np.random.default_rng(seed)
    f = int(rng.integers(3, 10))
    if stride == 2 and f % 2 == 0:
        f += 1  # exact transposed mirror needs an odd length at stride 2
    c_in = int(rng.integers(1, 5))
    c_out = int(rng.integers(1, 5))
    x = arr(rng, (f, c_in))
    w = arr(rng, (3, c_in, c_out))
    f_out = (f + 2 - 3) // stride + 1
    y = arr(rng, (f_out, c_out))
    lhs = np.sum(kernels.conv_freq(x, w, None, stride, 1).astype(np.float64) * y)
    rhs = np.sum(x.astype(np.float64) * kernels.deconv_freq(y, w, None, stride, 1))
    assert abs(lhs - rhs) < 1e-5 * max(1.0, abs(lhs))
