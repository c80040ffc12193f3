#!/usr/bin/env python3
"""Ablation sweep on one preset: measure RTF for the base block layout
against the four architecture substitutions and print the bench table.

Usage: python scripts/run_ablation.py [--preset B] [--seconds 10] [--seed 0]
"""

import argparse

from streamse.bench import emit_table, run_bench
from streamse.variants import VARIANT_TAGS


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--preset", default="B", choices=list("TBSML"))
    parser.add_argument("--seconds", type=float, default=10.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--csv", help="optional csv output path")
    args = parser.parse_args()

    rows = [run_bench(args.preset, tag, seconds=args.seconds, seed=args.seed)
            for tag in VARIANT_TAGS]
    text, csv_text = emit_table(rows)
    print(text)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(csv_text)

    base = next(r for r in rows if r.variant == "base")
    for row in rows:
        if row.variant == "base":
            continue
        direction = "slower" if row.rtf > base.rtf else "faster"
        print(f"{row.variant}: {row.rtf / base.rtf:.2f}x base RTF ({direction})")


if __name__ == "__main__":
    main()
