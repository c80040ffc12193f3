"""Golden-case generator.

Emits `goldens/`: a JSON manifest plus one tensor container per case.
Kernel cases cover all nine numeric kernels with >= 10 randomized shapes
each plus fixed anchor cases; the model case is a tiny end-to-end network
with its weight file, a 20-frame input spectrogram, and the expected
per-frame masks.

Every case is verified twice before export: once when computed and once
re-read from its own serialized bytes.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from . import kernels as tk
from .container import decode, encode
from .tiny_model import export_tiny_golden

KERNEL_TOL = 1e-5
MODEL_TOL = 1e-4
CASES_PER_KERNEL = 12


def u(rng, shape, lo=-1.0, hi=1.0):
    return rng.uniform(lo, hi, size=shape).astype(np.float32)


def _gen_conv(rng, i):
    if i == 0:  # identity anchor: K=1 identity mapping
        c = 4
        x = u(rng, (6, c))
        w = np.eye(c, dtype=np.float32)[None]
        b = np.zeros(c, np.float32)
        stride, pad = 1, 0
    else:
        k = int(rng.choice([1, 3]))
        stride = int(rng.choice([1, 2]))
        pad = int(rng.integers(0, 2)) if k == 3 else 0
        f = int(rng.integers(k + stride, 12))
        x = u(rng, (f, int(rng.integers(1, 6))))
        w = u(rng, (k, x.shape[1], int(rng.integers(1, 6))))
        b = u(rng, (w.shape[2],))
    y = tk.conv_freq(x, w, b, stride, pad)
    return {"stride": stride, "padding": pad}, {"x": x, "w": w, "b": b, "y": y}


def _gen_deconv(rng, i):
    k = int(rng.choice([1, 3]))
    stride = int(rng.choice([1, 2]))
    f = int(rng.integers(2, 10))
    x = u(rng, (f, int(rng.integers(1, 6))))
    w = u(rng, (k, int(rng.integers(1, 6)), x.shape[1]))
    b = u(rng, (w.shape[1],))
    y = tk.deconv_freq(x, w, b, stride)
    return {"stride": stride}, {"x": x, "w": w, "b": b, "y": y}


def _gen_gru(rng, i):
    if i == 0:  # zero-parameter anchor: new hidden is exactly h/2
        isz, h = 3, 5
        x, hid = u(rng, (isz,)), u(rng, (h,))
        w_ih = np.zeros((3 * h, isz), np.float32)
        w_hh = np.zeros((3 * h, h), np.float32)
        b_ih = np.zeros(3 * h, np.float32)
        b_hh = np.zeros(3 * h, np.float32)
    else:
        isz, h = int(rng.integers(1, 8)), int(rng.integers(1, 8))
        x, hid = u(rng, (isz,)), u(rng, (h,))
        w_ih, w_hh = u(rng, (3 * h, isz)), u(rng, (3 * h, h))
        b_ih, b_hh = u(rng, (3 * h,)), u(rng, (3 * h,))
    y = tk.gru_step(x, hid, w_ih, w_hh, b_ih, b_hh)
    if i == 0:
        assert np.allclose(y, 0.5 * hid, atol=1e-6)
    return {}, {"x": x, "h": hid, "w_ih": w_ih, "w_hh": w_hh,
                "b_ih": b_ih, "b_hh": b_hh, "y": y}


def _attn_tensors(rng, c):
    names = ["wq", "wk", "wv", "wo", "bq", "bk", "bv", "bo"]
    vals = [u(rng, (c, c)) for _ in range(4)] + [u(rng, (c,)) for _ in range(4)]
    return dict(zip(names, vals))


def _gen_mhsa(rng, i):
    heads = int(rng.choice([1, 2, 4]))
    c = heads * int(rng.integers(1, 5))
    f = int(rng.integers(1, 9))
    p = _attn_tensors(rng, c)
    x = u(rng, (f, c))
    y = tk.mhsa_freq(x, p["wq"], p["wk"], p["wv"], p["wo"],
                     p["bq"], p["bk"], p["bv"], p["bo"], heads)
    return {"heads": heads}, {"x": x, **p, "y": y}


def _gen_batchnorm(rng, i):
    f, c = int(rng.integers(1, 10)), int(rng.integers(1, 8))
    x = u(rng, (f, c))
    gamma, beta = u(rng, (c,)), u(rng, (c,))
    mean, var = u(rng, (c,), -0.1, 0.1), u(rng, (c,), 0.5, 1.5)
    y = tk.batchnorm_infer(x, gamma, beta, mean, var)
    return {}, {"x": x, "gamma": gamma, "beta": beta, "mean": mean, "var": var, "y": y}


def _gen_layernorm(rng, i):
    f, c = int(rng.integers(1, 10)), int(rng.integers(2, 8))
    x = u(rng, (f, c))
    gamma, beta = u(rng, (c,)), u(rng, (c,))
    y = tk.layernorm(x, gamma, beta)
    return {}, {"x": x, "gamma": gamma, "beta": beta, "y": y}


def _gen_dprnn(rng, i):
    c, g = int(rng.integers(1, 6)), int(rng.integers(1, 5))
    f = int(rng.integers(1, 8))
    fwd = (u(rng, (3 * g, c)), u(rng, (3 * g, g)), u(rng, (3 * g,)), u(rng, (3 * g,)))
    bwd = (u(rng, (3 * g, c)), u(rng, (3 * g, g)), u(rng, (3 * g,)), u(rng, (3 * g,)))
    w_proj, b_proj = u(rng, (c, 2 * g)), u(rng, (c,))
    x = u(rng, (f, c))
    y = tk.bigru_freq(x, fwd, bwd, w_proj, b_proj)
    tensors = {"x": x, "w_proj": w_proj, "b_proj": b_proj, "y": y}
    for pre, params in (("fwd", fwd), ("bwd", bwd)):
        for suffix, val in zip(("w_ih", "w_hh", "b_ih", "b_hh"), params):
            tensors[f"{pre}_{suffix}"] = val
    return {}, tensors


def _gen_dpt(rng, i):
    heads = int(rng.choice([1, 2]))
    c = heads * int(rng.integers(1, 4))
    f = int(rng.integers(1, 5))
    t_len = int(rng.integers(3, 9))
    window = int(rng.integers(2, 6))
    p = _attn_tensors(rng, c)
    xs = u(rng, (t_len, f, c))
    y = tk.banded_time_attention(xs, p["wq"], p["wk"], p["wv"], p["wo"],
                                 p["bq"], p["bk"], p["bv"], p["bo"], heads, window)
    return {"heads": heads, "window": window}, {"xs": xs, **p, "y": y}


def _gen_timeconv(rng, i):
    transposed = bool(i % 2)
    k = 3
    stride = int(rng.choice([1, 2]))
    ci, co = int(rng.integers(1, 5)), int(rng.integers(1, 5))
    f = int(rng.integers(3, 9))
    t_len = int(rng.integers(3, 7))
    xs = u(rng, (t_len, f, ci))
    if transposed:
        w = u(rng, (3, k, co, ci))
        b = u(rng, (co,))
        y = tk.timeconv3_transposed(xs, w, b, stride)
    else:
        w = u(rng, (3, k, ci, co))
        b = u(rng, (co,))
        y = tk.timeconv3(xs, w, b, stride)
    return ({"stride": stride, "transposed": int(transposed)},
            {"xs": xs, "w": w, "b": b, "y": y})


GENERATORS = {
    "conv_freq": _gen_conv,
    "deconv_freq": _gen_deconv,
    "gru_step": _gen_gru,
    "mhsa_freq": _gen_mhsa,
    "batchnorm_infer": _gen_batchnorm,
    "layernorm": _gen_layernorm,
    "dprnn_freq_step": _gen_dprnn,
    "dpt_time_step": _gen_dpt,
    "timeconv3_step": _gen_timeconv,
}


def generate(out_dir: Path, seed: int) -> dict:
    out_dir = Path(out_dir)
    (out_dir / "kernels").mkdir(parents=True, exist_ok=True)
    (out_dir / "model").mkdir(parents=True, exist_ok=True)
    manifest = {"seed": seed, "kernel_cases": [], "model_cases": []}

    for op_index, (op, gen) in enumerate(sorted(GENERATORS.items())):
        for i in range(CASES_PER_KERNEL):
            rng = np.random.default_rng(seed + 1000 * op_index + i)
            attrs, tensors = gen(rng, i)
            case_id = f"{op}-{i:03d}"
            blob = {"kind": "golden-kernel", "op": op, "id": case_id, "attrs": attrs}
            data = encode(blob, tensors)
            blob2, tensors2 = decode(data)  # self-check on re-read
            assert blob2 == blob
            assert all(np.array_equal(tensors2[k], tensors[k]) for k in tensors)
            rel = f"kernels/{case_id}.fenh"
            (out_dir / rel).write_bytes(data)
            manifest["kernel_cases"].append(
                {"id": case_id, "op": op, "tolerance": KERNEL_TOL, "file": rel})

    weight_bytes, io_bytes, _, _ = export_tiny_golden(seed)
    (out_dir / "model/tiny-weights.fenh").write_bytes(weight_bytes)
    (out_dir / "model/tiny-io.fenh").write_bytes(io_bytes)
    manifest["model_cases"].append({
        "id": "tiny-rnnformer", "tolerance": MODEL_TOL,
        "weights": "model/tiny-weights.fenh", "io": "model/tiny-io.fenh"})

    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="goldens")
    parser.add_argument("--seed", type=int, default=20260810)
    args = parser.parse_args(argv)
    manifest = generate(Path(args.out), args.seed)
    n = len(manifest["kernel_cases"])
    print(f"wrote {n} kernel cases + {len(manifest['model_cases'])} model case(s) "
          f"to {args.out} (seed {args.seed})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
