"""Command-line entry points.

Subcommands: optimize, render, gradcheck, export, trials.  Every failure
exits nonzero after printing one machine-parsable line
``error: <kind>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .encode import BlurKernel, init_canvas
from .fem import SolveError
from .judge import JudgeImage, JudgeSpec, JudgeUnavailableError, ProtocolError
from .opt import LossWeights, RunConfig, run, total_loss
from .problems import cleanup_components, make_problem
from .shapes import disk


def _parse_resolution(text: str) -> tuple[int, int]:
    """'128' -> (128, 128); '256x128' -> (256, 128)."""
    if "x" in text:
        w, _, h = text.partition("x")
        return int(w), int(h)
    n = int(text)
    return n, n


def _load_config(args) -> RunConfig:
    if args.config:
        config = RunConfig.from_mapping(fileio.read_config_file(args.config))
    else:
        config = RunConfig()
    if getattr(args, "out", None):
        config.out_dir = args.out
    for attr in ("seed", "mode", "epochs", "prompt", "endpoint"):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(config, attr, value)
    if getattr(args, "target_image", None):
        config.target_image = args.target_image
        config.judge = "reference"
    if getattr(args, "endpoint", None):
        config.judge = "remote"
    if getattr(args, "resolution", None):
        config.nx, config.ny = _parse_resolution(args.resolution)
    return config


def cmd_optimize(args) -> int:
    config = _load_config(args)
    record = run(config)
    last = record.rows[-1] if record.rows else {}
    print(
        f"done: {record.out_dir} epochs={len(record.rows)} "
        f"compliance={last.get('compliance', float('nan')):.6g} "
        f"score={last.get('vision', float('nan')):.6g}"
    )
    return 0


def cmd_render(args) -> int:
    nx, ny, values = fileio.load_field(args.field)
    out = args.out or str(Path(args.field).with_suffix(".pgm"))
    fileio.render_density_pgm(out, nx, ny, np.clip(values, 0.0, 1.0))
    print(out)
    return 0


def cmd_gradcheck(args) -> int:
    """Finite-difference audit of every gradient path on a small instance."""
    nx, ny = _parse_resolution(args.resolution)
    problem = make_problem(args.problem, nx, ny)
    kernel = BlurKernel(sigma=1.0)
    rng = np.random.default_rng(args.seed)
    params = init_canvas(
        problem.nx, problem.ny, "from_values",
        values=rng.uniform(0.6, 1.4, problem.nx * problem.ny),
    )
    judged_w = 2 * problem.nx if problem.symmetry else problem.nx
    target = JudgeImage(judged_w, problem.ny, 1.0 - disk(judged_w, problem.ny))
    spec = JudgeSpec.reference(target, blur_sigma=1.5)
    weights = LossWeights(beta1=5.0, beta2=10.0, target_density=0.4)

    worst = 0.0
    h = 1e-6
    for mode in ("joint", "physics_only", "vision_only"):
        base = total_loss(problem, params, weights, spec, mode, kernel=kernel)
        frozen = base.mask
        grad = total_loss(
            problem, params, weights, spec, mode, kernel=kernel, frozen_mask=frozen
        ).grad
        values = params.values
        fd = np.zeros_like(grad)
        for i in range(values.size):
            for sign in (+1.0, -1.0):
                shifted = values.copy()
                shifted[i] += sign * h
                probe = init_canvas(problem.nx, problem.ny, "from_values", values=shifted)
                fd[i] += sign * total_loss(
                    problem, probe, weights, spec, mode,
                    kernel=kernel, frozen_mask=frozen,
                ).objective
        fd /= 2 * h
        scale = np.maximum(np.abs(fd), 1e-8 * max(np.abs(fd).max(), 1e-30))
        err = float(np.max(np.abs(grad - fd) / scale))
        worst = max(worst, err)
        print(f"gradcheck {mode}: max relative error {err:.3e}")
    print(f"gradcheck worst: {worst:.3e}")
    return 0 if worst <= 1e-3 else 1


def cmd_export(args) -> int:
    out_dir = Path(args.run_dir)
    config = RunConfig.from_mapping(fileio.read_config_file(out_dir / "config.resolved.cfg"))
    nx, ny, values = fileio.load_field(out_dir / "final_density.tdsf")
    problem = make_problem(config.problem, config.nx, config.ny)
    binary = (values > 0.5).reshape(ny, nx)
    if args.cleanup:
        binary = cleanup_components(problem, binary)
    out = args.out or str(out_dir / "export_design.pgm")
    fileio.write_pgm(out, 1.0 - binary.astype(np.float64))
    fileio.save_field(Path(out).with_suffix(".tdsf"), nx, ny, binary.astype(np.float64).ravel())
    print(out)
    return 0


def cmd_trials(args) -> int:
    config = _load_config(args)
    out_dir = Path(args.out or config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(args.n):
        seed = (args.seed if args.seed is not None else config.seed) + i
        trial = RunConfig(**{**config.resolved(), "seed": seed,
                             "out_dir": str(out_dir / f"trial_{seed:04d}")})
        record = run(trial)
        last = record.rows[-1]
        rows.append((seed, last["compliance"], last["vision"]))
        print(f"trial seed={seed} compliance={last['compliance']:.6g} score={last['vision']:.6g}")
    csv_path = out_dir / "trials.csv"
    fileio.write_trials_csv(csv_path, rows)
    _scatter_plot(rows, out_dir / "trials_scatter.png")
    print(csv_path)
    return 0


def _scatter_plot(rows, path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    compliance = [r[1] for r in rows]
    score = [r[2] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(compliance, score)
    ax.set_xlabel("compliance")
    ax.set_ylabel("visual score")
    ax.set_xscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tides", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run a full optimization")
    p_opt.add_argument("--config", help="flat key=value config file")
    p_opt.add_argument("--out", help="output directory")
    p_opt.add_argument("--seed", type=int)
    p_opt.add_argument("--mode", choices=("joint", "physics_only", "vision_only"))
    p_opt.add_argument("--epochs", type=int)
    p_opt.add_argument("--resolution", help="N or WxH (full design dims)")
    p_opt.add_argument("--prompt")
    p_opt.add_argument("--target-image", dest="target_image")
    p_opt.add_argument("--endpoint")
    p_opt.set_defaults(func=cmd_optimize)

    p_render = sub.add_parser("render", help="render a TDSF density field to PGM")
    p_render.add_argument("field")
    p_render.add_argument("--out")
    p_render.set_defaults(func=cmd_render)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p_grad.add_argument("--problem", default="tower")
    p_grad.add_argument("--resolution", default="8x4")
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.set_defaults(func=cmd_gradcheck)

    p_export = sub.add_parser("export", help="binarize a finished run (optional cleanup)")
    p_export.add_argument("run_dir")
    p_export.add_argument("--cleanup", action="store_true",
                          help="drop components not touching a support or load")
    p_export.add_argument("--out")
    p_export.set_defaults(func=cmd_export)

    p_trials = sub.add_parser("trials", help="n seeded runs -> CSV + scatter plot")
    p_trials.add_argument("--config", required=True)
    p_trials.add_argument("-n", type=int, default=5)
    p_trials.add_argument("--seed", type=int, help="base seed (trial i uses seed + i)")
    p_trials.add_argument("--out")
    p_trials.set_defaults(func=cmd_trials)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (fileio.InputError, FileNotFoundError) as exc:
        print(f"error: input: {exc}", file=sys.stderr)
    except SolveError as exc:
        print(f"error: solve: {exc}", file=sys.stderr)
    except JudgeUnavailableError as exc:
        print(f"error: judge-unavailable: {exc}", file=sys.stderr)
    except ProtocolError as exc:
        print(f"error: protocol: {exc}", file=sys.stderr)
    except ValueError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
