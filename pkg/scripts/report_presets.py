#!/usr/bin/env python3
"""Print the preset calibration table: learnable parameters and MACs per
second of audio for every preset, next to the published targets."""

from streamse.bench import count_macs
from streamse.model import PRESET_ORDER, parameter_count, preset_config

TARGETS = {
    "T": (22_000, 55e6),
    "B": (92_000, 262e6),
    "S": (195_000, 664e6),
    "M": (492_000, 2.9e9),
    "L": (1_105_000, 11e9),
}


def main() -> None:
    print(f"{'preset':<8}{'width':>6}{'blocks':>7}{'heads':>6}"
          f"{'params':>11}{'target':>11}{'delta':>8}{'macs/s':>10}")
    for preset in PRESET_ORDER:
        cfg = preset_config(preset)
        params = parameter_count(cfg)
        target, _ = TARGETS[preset]
        macs = count_macs(cfg).macs_per_second
        print(f"{preset:<8}{cfg.hidden:>6}{cfg.n_blocks:>7}{cfg.n_heads:>6}"
              f"{params:>11,}{target:>11,}{100 * (params - target) / target:>+7.1f}%"
              f"{macs / 1e6:>9.0f}M")


if __name__ == "__main__":
    main()
