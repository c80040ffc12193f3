"""Command-line front end: enhance, bench, selftest, weights.

Exit codes: 0 success, 1 validation or format error, 2 invariant failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np
from scipy.io import wavfile

from . import bench, selftest, weights_io
from .bench import BenchRow, count_macs, emit_table, run_bench
from .model import PRESET_ORDER, build_model, parameter_count, preset_config, shape_plan
from .runtime import EnhancerSession, enhance_signal
from .variants import VARIANT_TAGS, make_variant


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def read_wav(path) -> tuple[np.ndarray, np.dtype]:
    try:
        rate, data = wavfile.read(path)
    except (ValueError, FileNotFoundError, OSError) as exc:
        raise CliError(f"cannot read {path}: {exc}") from None
    if rate != 16000:
        raise CliError(f"expected 16000 Hz, got {rate} Hz")
    if data.ndim != 1:
        raise CliError(f"expected mono audio, got {data.ndim} channels")
    if data.dtype == np.int16:
        return data.astype(np.float32) / 32768.0, data.dtype
    if data.dtype == np.float32:
        return data, data.dtype
    raise CliError(f"expected 16-bit PCM or 32-bit float samples, got {data.dtype}")


def write_wav(path, samples: np.ndarray, dtype: np.dtype) -> None:
    if dtype == np.int16:
        pcm = np.clip(np.round(samples * 32768.0), -32768, 32767).astype(np.int16)
        wavfile.write(path, 16000, pcm)
    else:
        wavfile.write(path, 16000, samples.astype(np.float32))


def _bundle_variant_tag(config) -> str:
    if config.variant != "rnnformer":
        return config.variant
    if config.time_kernel == 3:
        return "k3"
    if config.norm == "layer":
        return "layernorm"
    return "base"


def cmd_enhance(args) -> int:
    samples, dtype = read_wav(args.input)
    bundle = weights_io.load(args.model)
    if args.variant is not None:
        actual = _bundle_variant_tag(bundle.config)
        if args.variant != actual:
            raise CliError(f"weight file is variant {actual!r}, not {args.variant!r}")
    session = EnhancerSession(bundle)
    enhanced, rtf = enhance_signal(session, samples)
    write_wav(args.output, enhanced, dtype)
    print(f"enhanced {len(samples)} samples "
          f"({len(samples) / 16000:.2f} s) at RTF {rtf:.4f}")
    return 0


def cmd_bench(args) -> int:
    presets = list(PRESET_ORDER) if args.preset == "all" else [args.preset]
    rows: list[BenchRow] = []
    for preset in presets:
        rows.append(run_bench(preset, args.variant, seconds=args.seconds,
                              threads=args.threads, seed=args.seed))
    text, csv_text = emit_table(rows)
    print(text)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(csv_text)
        print(f"csv written to {args.csv}")
    return 0


def cmd_selftest(args) -> int:
    results = selftest.run_selftest(seed=args.seed, seconds=args.seconds,
                                    presets=args.presets)
    failed = False
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{status} {result.name}: {result.detail}")
        failed |= not result.passed
    return 2 if failed else 0


def cmd_weights(args) -> int:
    if args.weights_cmd == "inspect":
        bundle = weights_io.load(args.path)
        cfg = bundle.config
        print(f"preset={cfg.preset} variant={_bundle_variant_tag(cfg)} "
              f"fused={bundle.fused} params={parameter_count(cfg)}")
        for name, tensor in bundle.tensors.items():
            print(f"{name:<28}{str(tuple(tensor.shape)):<20}{tensor.nbytes:>10d} bytes")
        return 0
    if args.weights_cmd == "fuse":
        bundle = weights_io.load(args.input)
        try:
            fused = weights_io.fuse_batchnorm(bundle, build_model(bundle.config))
        except weights_io.FusionError as exc:
            raise CliError(str(exc)) from None
        weights_io.save(fused, args.output)
        print(f"fused bundle written to {args.output}")
        return 0
    if args.weights_cmd == "randomize":
        config = make_variant(preset_config(args.preset), args.variant)
        bundle = weights_io.random_bundle(config, args.seed)
        weights_io.save(bundle, args.output)
        print(f"random {args.preset}/{args.variant} bundle (seed {args.seed}) "
              f"written to {args.output}")
        return 0
    raise CliError(f"unknown weights subcommand {args.weights_cmd!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="streamse",
                     description="streaming speech enhancement engine and benchmark")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("enhance", help="enhance a 16 kHz mono wav file")
    p.add_argument("--model", required=True, help="weight bundle path")
    p.add_argument("--variant", choices=VARIANT_TAGS, help="assert the bundle variant")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("bench", help="measure RTF and MACs")
    p.add_argument("--preset", default="all", choices=list(PRESET_ORDER) + ["all"])
    p.add_argument("--variant", default="base", choices=VARIANT_TAGS)
    p.add_argument("--seconds", type=float, default=10.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", help="also write the csv table to this path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("selftest", help="run the built-in verification suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seconds", type=float, default=3.0,
                   help="stream length for the equivalence suites")
    p.add_argument("--presets", default=PRESET_ORDER,
                   help="subset of presets to cover, e.g. TB")
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("weights", help="inspect, fuse or generate weight bundles")
    wsub = p.add_subparsers(dest="weights_cmd", required=True)
    w = wsub.add_parser("inspect")
    w.add_argument("path")
    w = wsub.add_parser("fuse")
    w.add_argument("input")
    w.add_argument("output")
    w = wsub.add_parser("randomize")
    w.add_argument("--preset", required=True, choices=list(PRESET_ORDER))
    w.add_argument("--variant", default="base", choices=VARIANT_TAGS)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("output")
    p.set_defaults(func=cmd_weights)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (CliError, weights_io.WeightFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
