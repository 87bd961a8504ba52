"""Library of load/support layouts for every built-in design problem.

Layouts are defined on the full design grid with total applied load
TOTAL_LOAD split equally across the load nodes.  The absolute magnitude is
arbitrary for compliance ratios (compliances are comparable only within a
problem), but it is NOT arbitrary for the compliance mask, whose threshold
(ln c >= -20) is absolute: TOTAL_LOAD is calibrated so that at desk
resolutions (32-128 per side) load-path material sits well above the
threshold while shielded and floating material falls below it, matching the
masking behavior the threshold was designed for.

Problems whose loading is mirror-symmetric are solved on the left half of
the grid with roller (x-fixed) boundary conditions along the mirror plane;
only the judged image is mirrored back to full width.

Exact node/DOF conventions are in tides.fem.  Every registry entry is frozen
by golden tests: changing a layout is a breaking change.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage

from .fem import DesignProblem

TOTAL_LOAD = 1.0


@dataclass(frozen=True)
class ProblemInfo:
    """Registry metadata: canonical dims and per-problem loss defaults."""

    name: str
    canonical_nx: int
    canonical_ny: int
    symmetric: bool
    target_density: float
    beta1: float
    beta2: float
    description: str


def _layout_arrays(nx: int, ny: int):
    """(nx+1, ny+1, 2) force and fixed arrays indexed [ix, iy, dof]."""
    forces = np.zeros((nx + 1, ny + 1, 2))
    fixed = np.zeros((nx + 1, ny + 1, 2), dtype=bool)
    return forces, fixed


def _top_center_band(nx: int) -> np.ndarray:
    """Node columns of the top load band: center +- max(1, nx//32)."""
    half = max(1, nx // 32)
    cx = nx // 2
    return np.arange(cx - half, cx + half + 1)


def _tower(nx: int, ny: int):
    forces, fixed = _layout_arrays(nx, ny)
    fixed[:, ny, :] = True  # rests on the ground
    band = _top_center_band(nx)
    forces[band, 0, 1] = -1.0 / band.size
    return forces, fixed


def _hoop(nx: int, ny: int):
    forces, fixed = _layout_arrays(nx, ny)
    fixed[:, ny, :] = True
    cx, cy = nx / 2.0, ny / 2.0
    radius = 0.3 * min(nx, ny)
    ix, iy = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    dist = np.hypot(np.abs(ix - cx), iy - cy)  # abs keeps the ring exactly mirror-symmetric
    ring = (np.abs(dist - radius) <= 0.5) & (iy < ny)
    count = int(ring.sum())
    if count == 0:
        raise ValueError(f"hoop ring is empty at {nx}x{ny}; grid too coarse")
    forces[:, :, 1][ring] = -1.0 / count
    return forces, fixed


def _bridge(nx: int, ny: int):
    forces, fixed = _layout_arrays(nx, ny)
    w = max(1, nx // 64)
    fixed[: w + 1, ny, :] = True  # separated end supports at deck level
    fixed[nx - w :, ny, :] = True
    deck = np.arange(w + 1, nx - w)
    forces[deck, ny, 1] = -1.0 / deck.size
    return forces, fixed


def _beam(nx: int, ny: int):
    forces, fixed = _layout_arrays(nx, ny)
    inset = max(1, round(0.05 * nx))
    fixed[inset, ny, 1] = True  # simply supported: vertical reaction only
    fixed[nx - inset, ny, 1] = True
    band = _top_center_band(nx)
    forces[band, 0, 1] = -1.0 / band.size
    return forces, fixed


def _roof(nx: int, ny: int):
    forces, fixed = _layout_arrays(nx, ny)
    w = max(1, nx // 8)
    fixed[: w + 1, ny, :] = True  # end walls
    fixed[nx - w :, ny, :] = True
    forces[:, 0, 1] = -1.0 / (nx + 1)  # snow load across the whole top edge
    return forces, fixed


def _staircase(nx: int, ny: int):
    forces, fixed = _layout_arrays(nx, ny)
    fixed[:, ny, :] = True
    steps = [(round(k * nx / 5), round(k * ny / 5)) for k in range(1, 5)]
    for ix, iy in steps:
        forces[ix, iy, 1] = -1.0 / len(steps)
    return forces, fixed


def _cantilever_two(nx: int, ny: int):
    forces, fixed = _layout_arrays(nx, ny)
    fixed[0, :, :] = True  # wall on the left edge
    for iy in (ny // 3, (2 * ny) // 3):
        forces[nx, iy, 1] = -0.5
    return forces, fixed


def _dam(nx: int, ny: int):
    forces, fixed = _layout_arrays(nx, ny)
    fixed[:, ny, :] = True
    depths = np.arange(1, ny + 1, dtype=np.float64)  # hydrostatic: zero at surface
    forces[0, :ny, 0] = depths / depths.sum()  # water pushes +x on the left face
    return forces, fixed


def _multistory(nx: int, ny: int):
    forces, fixed = _layout_arrays(nx, ny)
    fixed[:, ny, :] = True
    floors = sorted({round(k * ny / 4) for k in range(1, 4)})
    for iy in floors:
        forces[:, iy, 1] = -1.0 / (len(floors) * (nx + 1))
    return forces, fixed


def _staggered_point(nx: int, ny: int):
    forces, fixed = _layout_arrays(nx, ny)
    fixed[:, ny, :] = True
    points = [
        (nx // 4, ny // 4),
        (3 * nx // 4, ny // 4),
        (nx // 2, ny // 2),
        (nx // 4, 3 * ny // 4),
        (3 * nx // 4, 3 * ny // 4),
    ]
    for ix, iy in points:
        forces[ix, iy, 1] = -1.0 / len(points)
    return forces, fixed


_BUILDERS: dict[str, Callable] = {
    "tower": _tower,
    "hoop": _hoop,
    "bridge": _bridge,
    "beam": _beam,
    "roof": _roof,
    "staircase": _staircase,
    "cantilever_two": _cantilever_two,
    "dam": _dam,
    "multistory": _multistory,
    "staggered_point": _staggered_point,
}

REGISTRY: dict[str, ProblemInfo] = {
    "tower": ProblemInfo("tower", 128, 128, True, 0.3, 50.0, 100.0,
                         "rests on the ground, downward load at the top center"),
    "hoop": ProblemInfo("hoop", 128, 128, True, 0.3, 50.0, 100.0,
                        "rests on the ground, downward loads along a circular ring"),
    "bridge": ProblemInfo("bridge", 256, 128, True, 0.3, 50.0, 100.0,
                          "separated end supports, distributed load along the deck"),
    "beam": ProblemInfo("beam", 672, 96, True, 0.5, 50.0, 100.0,
                        "simply supported at two bottom points, center top load"),
    "roof": ProblemInfo("roof", 128, 64, False, 0.3, 10.0, 250.0,
                        "end walls, distributed load across the top edge"),
    "staircase": ProblemInfo("staircase", 64, 64, False, 0.4, 10.0, 250.0,
                             "ground-fixed, point loads descending a diagonal"),
    "cantilever_two": ProblemInfo("cantilever_two", 80, 64, False, 0.5, 100.0, 250.0,
                                  "left wall, two point loads on the free edge"),
    "dam": ProblemInfo("dam", 64, 80, False, 0.5, 10.0, 250.0,
                       "ground-fixed, hydrostatic side pressure"),
    "multistory": ProblemInfo("multistory", 70, 64, False, 0.5, 50.0, 250.0,
                              "ground-fixed, distributed loads on three floor lines"),
    "staggered_point": ProblemInfo("staggered_point", 80, 80, False, 0.5, 50.0, 50.0,
                                   "ground-fixed, staggered grid of point loads"),
}


def _fold_symmetric(nx: int, ny: int, forces: np.ndarray, fixed: np.ndarray):
    """Left-half layout of an exactly mirror-symmetric full layout.

    The shared plane column keeps half its vertical load and gets an x
    roller; x loads must be antisymmetric (zero on the plane).
    """
    if nx % 2 != 0:
        raise ValueError(f"symmetric problems need an even width, got nx={nx}")
    half = nx // 2
    if not (
        np.array_equal(forces[:, :, 1], forces[::-1, :, 1])
        and np.array_equal(forces[:, :, 0], -forces[::-1, :, 0])
        and np.array_equal(fixed, fixed[::-1])
    ):
        raise AssertionError("layout is not mirror-symmetric")  # registry bug
    f_half = forces[: half + 1].copy()
    x_half = fixed[: half + 1].copy()
    f_half[half, :, 1] *= 0.5
    f_half[half, :, 0] = 0.0  # antisymmetric => exactly zero on the plane
    x_half[half, :, 0] = True
    return half, f_half, x_half


def make_problem(name: str, nx: int | None = None, ny: int | None = None) -> DesignProblem:
    """Build the named problem at full-design dims (nx, ny); defaults to canonical.

    Symmetric problems return the folded left-half DesignProblem with
    ``symmetry=True``; its grid is then (nx/2, ny).
    """
    if name not in REGISTRY:
        raise ValueError(f"unknown problem {name!r}; known: {sorted(REGISTRY)}")
    info = REGISTRY[name]
    nx = info.canonical_nx if nx is None else int(nx)
    ny = info.canonical_ny if ny is None else int(ny)
    if nx < 4 or ny < 4:
        raise ValueError(f"layouts need at least a 4x4 grid, got {nx}x{ny}")
    forces, fixed = _BUILDERS[name](nx, ny)
    forces *= TOTAL_LOAD  # builders emit unit totals
    symmetry = info.symmetric
    if symmetry:
        nx, forces, fixed = _fold_symmetric(nx, ny, forces, fixed)
    return DesignProblem(
        nx=nx,
        ny=ny,
        forces=forces.reshape(-1),
        fixed_dofs=fixed.reshape(-1),
        symmetry=symmetry,
    )


def problem_info(name: str) -> ProblemInfo:
    if name not in REGISTRY:
        raise ValueError(f"unknown problem {name!r}; known: {sorted(REGISTRY)}")
    return REGISTRY[name]


def anchor_elements(problem: DesignProblem) -> np.ndarray:
    """Boolean per-element grid (ny, nx): elements touching a support or a load.

    Pure mirror rollers on the symmetry plane do not count as supports: a
    blob touching only the plane is still floating in the mirrored design.
    """
    nx, ny = problem.nx, problem.ny
    forces = problem.forces.reshape(nx + 1, ny + 1, 2)
    fixed = problem.fixed_dofs.reshape(nx + 1, ny + 1, 2)
    anchor = fixed[:, :, 1] | np.any(forces != 0.0, axis=2)
    x_support = fixed[:, :, 0].copy()
    if problem.symmetry:
        x_support[nx, :] = False
    anchor |= x_support

    out = np.zeros((ny, nx), dtype=bool)
    ixs, iys = np.nonzero(anchor)
    for ix, iy in zip(ixs, iys):
        for ex in (ix - 1, ix):
            for ey in (iy - 1, iy):
                if 0 <= ex < nx and 0 <= ey < ny:
                    out[ey, ex] = True
    return out


def cleanup_components(problem: DesignProblem, binary_grid: np.ndarray) -> np.ndarray:
    """Keep only 4-connected solid components that touch a support or load."""
    binary_grid = np.asarray(binary_grid, dtype=bool)
    if binary_grid.shape != (problem.ny, problem.nx):
        raise ValueError(
            f"design shape {binary_grid.shape} does not match problem "
            f"{(problem.ny, problem.nx)}"
        )
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    labels, n = ndimage.label(binary_grid, structure=structure)
    if n == 0:
        return np.zeros_like(binary_grid)
    anchored = np.unique(labels[anchor_elements(problem) & binary_grid])
    anchored = anchored[anchored > 0]
    return np.isin(labels, anchored)
