"""Shared fixtures: hand-built toy problems, silhouette targets, FD helpers.

Toy problems are constructed here with raw index math (node id =
ix * (ny + 1) + iy, DOFs 2n / 2n + 1) so the tests do not depend on the
package's own problem registry.
"""

import numpy as np
import pytest

from tides.fem import DensityField, DesignProblem
from tides.fileio import write_pgm
from tides.shapes import disk, soft_disk, triangle


def node(ix, iy, ny):
    return ix * (ny + 1) + iy


def build_problem(nx, ny, fixed_nodes, loads, symmetry=False, **kw):
    """fixed_nodes: (ix, iy, 'both'|'x'|'y'); loads: (ix, iy, fx, fy)."""
    ndof = 2 * (nx + 1) * (ny + 1)
    forces = np.zeros(ndof)
    fixed = np.zeros(ndof, dtype=bool)
    for ix, iy, which in fixed_nodes:
        n = node(ix, iy, ny)
        if which in ("both", "x"):
            fixed[2 * n] = True
        if which in ("both", "y"):
            fixed[2 * n + 1] = True
    for ix, iy, fx, fy in loads:
        n = node(ix, iy, ny)
        forces[2 * n] += fx
        forces[2 * n + 1] += fy
    return DesignProblem(nx=nx, ny=ny, forces=forces, fixed_dofs=fixed,
                         symmetry=symmetry, **kw)


def column_problem(nx, ny, **kw):
    """Bottom edge fully fixed, unit downward load at the top-center node."""
    fixed = [(ix, ny, "both") for ix in range(nx + 1)]
    loads = [(nx // 2, 0, 0.0, -1.0)]
    return build_problem(nx, ny, fixed, loads, **kw)


def cantilever_problem(nx, ny, **kw):
    """Left edge fully fixed, downward load at the right mid-edge node."""
    fixed = [(0, iy, "both") for iy in range(ny + 1)]
    loads = [(nx, ny // 2, 0.0, -1.0)]
    return build_problem(nx, ny, fixed, loads, **kw)


def random_density(problem, seed, lo=0.2, hi=0.9):
    rng = np.random.default_rng(seed)
    return DensityField(problem.nx, problem.ny,
                        rng.uniform(lo, hi, problem.n_elements))


def max_rel_error(analytic, numeric, floor_scale=1e-8):
    """Elementwise relative error with a floor tied to the gradient scale."""
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    scale = np.maximum(np.abs(numeric), floor_scale * max(np.abs(numeric).max(), 1e-30))
    return float(np.max(np.abs(analytic - numeric) / scale))


def central_difference(f, x, h=1e-6):
    """Central FD gradient of scalar f over a flat array x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        plus = x.copy()
        plus[i] += h
        minus = x.copy()
        minus[i] -= h
        grad[i] = (f(plus) - f(minus)) / (2 * h)
    return grad


@pytest.fixture(scope="session")
def target_dir(tmp_path_factory):
    """Silhouette target images written once per session."""
    root = tmp_path_factory.mktemp("targets")
    for size in (32, 64, 128):
        write_pgm(root / f"disk_{size}.pgm", 1.0 - disk(size, size))
        write_pgm(root / f"triangle_{size}.pgm", 1.0 - triangle(size, size))
    write_pgm(root / "soft_disk_64.pgm", 1.0 - soft_disk(64, 64))
    # a drawn column that happens to carry the load, plus a decorative
    # ornament that cannot: the fixture for floating-material checks
    column = np.zeros((64, 64))
    column[:, 26:38] = 1.0
    column[56:, 10:54] = 1.0
    ornament = disk(64, 64, cx=10, cy=12, radius=6)
    write_pgm(root / "column_ornament_64.pgm", 1.0 - np.maximum(column, ornament))
    return root
