#!/usr/bin/env python3
"""Family-pulse orientation landscape (desk-scale reproduction of the 10x10
scan) followed by the heat-map plot."""

import argparse
import sys
from pathlib import Path

from zeroarea.cli import main as cli_main

HERE = Path(__file__).parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/landscape")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    code = cli_main(
        [
            "scan",
            "--config",
            str(HERE / "configs" / "landscape.cfg"),
            "--out",
            args.out,
            "--workers",
            str(args.workers),
        ]
    )
    if code != 0:
        return code
    from plot_results import plot_landscape

    print(plot_landscape(Path(args.out)))
    print(Path(args.out, "summary.txt").read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
