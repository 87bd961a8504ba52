"""Write the built-in silhouette targets as PGM files.

Usage: python scripts/make_targets.py [--size 128] [--out targets/]
"""

import argparse
from pathlib import Path

from tides.fileio import write_pgm
from tides import shapes


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=128)
    parser.add_argument("--out", default="targets")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = args.size
    for name in ("disk", "soft_disk", "ring", "triangle", "hexagon", "arch"):
        field = getattr(shapes, name)(n, n)
        path = out / f"{name}_{n}.pgm"
        write_pgm(path, 1.0 - field)
        print(path)


if __name__ == "__main__":
    main()
