#!/usr/bin/env python3
"""30 K orientation optimization from the odd-Hermite guess, with and
without the area multiplier."""

import argparse
import sys
from pathlib import Path

from zeroarea.cli import main as cli_main

HERE = Path(__file__).parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/thermal_oct")
    args = ap.parse_args()
    base = Path(args.out)
    for label, mu in (("free", 0.0), ("zero_area", 1.8e-4)):
        code = cli_main(
            [
                "oct",
                "--config",
                str(HERE / "configs" / "thermal_oct.cfg"),
                "--out",
                str(base / label),
                "--override",
                f"control.mu_au={mu}",
            ]
        )
        if code != 0:
            return code
        print(f"--- {label} (mu = {mu})")
        print((base / label / "summary.txt").read_text())
    from plot_results import plot_field_and_spectrum, plot_trajectory

    for label in ("free", "zero_area"):
        plot_trajectory(base / label)
        plot_field_and_spectrum(base / label)
    return 0


if __name__ == "__main__":
    sys.exit(main())
