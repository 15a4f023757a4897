#!/usr/bin/env python3
"""Print the parameter breakdown of the full network and the baseline CNN.

Also shows why the reduced-inception layers need reconciling: no pair of
textbook 1x1 reduction widths gives their published per-layer counts.
"""
import argparse

from struct2func import netspec
from struct2func.cli import netcheck


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--structures", type=int, default=1628, help="corpus size for the feature ratio")
    args = ap.parse_args()

    print(netcheck())
    g = netspec.build_architecture(netspec.ArchConfig())
    print(f"input features per parameter ({args.structures} structures): "
          f"{netspec.feature_ratio(args.structures, g):.1f}")
    for layer, target in (("L2/L3", 85248), ("L4", 129280)):
        sols = netspec.reduction_width_solutions(target, 256)
        print(f"textbook reduction widths reaching {target:,} for {layer}: {sols or 'none'}")


if __name__ == "__main__":
    main()
