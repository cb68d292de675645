#!/usr/bin/env python3
"""Zero-temperature orientation optimization with and without the area
multiplier; prints the orientation/area comparison and renders the plots."""

import argparse
import sys
from pathlib import Path

from zeroarea.cli import main as cli_main

HERE = Path(__file__).parent


def run_one(outdir, mu):
    return cli_main(
        [
            "oct",
            "--config",
            str(HERE / "configs" / "zero_t_oct.cfg"),
            "--out",
            str(outdir),
            "--override",
            f"control.mu_au={mu}",
        ]
    )


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/zero_t_oct")
    args = ap.parse_args()
    base = Path(args.out)
    for label, mu in (("free", 0.0), ("zero_area", 1.0e-4)):
        code = run_one(base / label, mu)
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
