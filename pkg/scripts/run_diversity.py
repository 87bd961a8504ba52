"""Diversity trials: seeded runs per target, scatter of (compliance, score).

For each target image, launches n seeded joint runs with randomized starting
canvases plus n physics-only baselines, then writes a combined CSV and a
log-compliance scatter plot.

Usage: python scripts/run_diversity.py --targets targets/disk_64.pgm targets/triangle_64.pgm -n 10 --size 64
"""

import argparse
import csv
from pathlib import Path

from tides.opt import RunConfig, run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--targets", nargs="+", required=True)
    parser.add_argument("-n", type=int, default=10)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--epochs", type=int, default=100)
    parser.add_argument("--out", default="runs/diversity")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for target in args.targets:
        label = Path(target).stem
        for seed in range(args.n):
            config = RunConfig.for_problem(
                "tower", nx=args.size, ny=args.size, mode="joint",
                judge="reference", target_image=target, epochs=args.epochs,
                seed=seed, init="random", out_dir=str(out / f"{label}_{seed}"),
            )
            record = run(config)
            last = record.rows[-1]
            rows.append((label, seed, last["compliance"], last["vision"]))
            print(f"{label} seed={seed} c={last['compliance']:.5g} v={last['vision']:.4f}")
    for seed in range(args.n):
        config = RunConfig.for_problem(
            "tower", nx=args.size, ny=args.size, mode="physics_only",
            epochs=args.epochs, seed=1000 + seed, init="random",
            out_dir=str(out / f"physics_{seed}"),
        )
        record = run(config)
        rows.append(("physics", 1000 + seed, record.rows[-1]["compliance"], 0.0))

    with open(out / "trials.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "seed", "compliance", "score"])
        writer.writerows(rows)

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label in sorted({r[0] for r in rows}):
        pts = [(c, s) for (l, _, c, s) in rows if l == label]
        ax.scatter([p[0] for p in pts], [p[1] for p in pts], label=label, alpha=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("compliance")
    ax.set_ylabel("visual score")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "scatter.png", dpi=130)
    print(out / "scatter.png")


if __name__ == "__main__":
    main()
