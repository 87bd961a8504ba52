"""Plane-stress linear elasticity FEM on a regular quad grid with SIMP interpolation.

Mesh conventions (documented here and relied on by the file formats):

* The design grid has ``nx`` elements horizontally and ``ny`` vertically.
* Element arrays are row-major: element ``(ex, ey)`` lives at index
  ``ey * nx + ex``, with ``ey = 0`` the top row.
* Nodes are numbered column-major with the row index increasing downward:
  node ``(ix, iy)`` has id ``ix * (ny + 1) + iy``.
* Each node carries 2 DOFs, x then y: ``(2 * nid, 2 * nid + 1)``.
* The physical y axis points up, so a downward load has a negative y
  component.  Compliance is sign-invariant either way.

Every element is a unit-square bilinear quadrilateral; the element stiffness
for unit Young's modulus is the standard closed form, and per-element moduli
come from the penalized density interpolation
``E(d) = e_min + d**penalty * (e0 - e_min)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

# Largest element count handled by the sparse direct factorization; bigger
# grids switch to Jacobi-preconditioned CG to bound memory.
DIRECT_SOLVER_MAX_ELEMENTS = 128 * 128
CG_RELATIVE_TOLERANCE = 1e-8
MASK_THRESHOLD_DEFAULT = -20.0


class SolveError(RuntimeError):
    """Raised when the reduced stiffness system cannot be solved reliably."""

    def __init__(self, message: str, *, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class DesignProblem:
    """Grid dimensions, loads, supports and material constants of one physics instance.

    ``symmetry=True`` marks this grid as the left half of a mirrored full
    design; the mirror plane is the right edge (handled by the optimizer and
    the judged-image mirroring, not by the solver itself).
    """

    nx: int
    ny: int
    forces: np.ndarray
    fixed_dofs: np.ndarray
    e0: float = 1.0
    e_min: float = 1e-9
    nu: float = 0.3
    penalty: float = 3.0
    symmetry: bool = False

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid dims must be >= 1, got {self.nx}x{self.ny}")
        forces = np.ascontiguousarray(self.forces, dtype=np.float64)
        fixed = np.ascontiguousarray(self.fixed_dofs, dtype=bool)
        object.__setattr__(self, "forces", forces)
        object.__setattr__(self, "fixed_dofs", fixed)
        if forces.shape != (self.ndof,) or fixed.shape != (self.ndof,):
            raise ValueError(
                f"forces/fixed_dofs must have length {self.ndof}, "
                f"got {forces.shape} and {fixed.shape}"
            )
        if not fixed.any():
            raise ValueError("at least one DOF must be fixed")
        if np.any(forces[fixed] != 0.0):
            raise ValueError("forces must be zero at fixed DOFs")
        if not (0.0 < self.e_min < self.e0):
            raise ValueError(f"need 0 < e_min < e0, got e_min={self.e_min}, e0={self.e0}")
        if not 0.0 <= self.nu < 0.5:
            raise ValueError(f"Poisson ratio must be in [0, 0.5), got {self.nu}")

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def ndof(self) -> int:
        return 2 * (self.nx + 1) * (self.ny + 1)


@dataclass(frozen=True)
class DensityField:
    """Material densities in [0, 1], one per element, row-major."""

    nx: int
    ny: int
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.shape != (self.nx * self.ny,):
            raise ValueError(f"expected {self.nx * self.ny} values, got {values.shape}")
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise ValueError("density values must lie in [0, 1]")

    def grid(self) -> np.ndarray:
        """(ny, nx) view, top row first."""
        return self.values.reshape(self.ny, self.nx)


@dataclass(frozen=True)
class FemSolution:
    """Displacements and compliances of one linear solve."""

    displacements: np.ndarray
    element_compliance: np.ndarray
    total_compliance: float
    solve_residual: float


def element_stiffness(nu: float) -> np.ndarray:
    """8x8 stiffness of the unit-square bilinear plane-stress element, E = 1.

    Node order is counterclockwise from the bottom-left corner; DOFs
    alternate (x, y) per node.  The closed form integrates B^T D B exactly.
    """
    if not 0.0 <= nu < 0.5:
        raise ValueError(f"Poisson ratio must be in [0, 0.5), got {nu}")
    k = np.array(
        [
            1 / 2 - nu / 6,
            1 / 8 + nu / 8,
            -1 / 4 - nu / 12,
            -1 / 8 + 3 * nu / 8,
            -1 / 4 + nu / 12,
            -1 / 8 - nu / 8,
            nu / 6,
            1 / 8 - 3 * nu / 8,
        ]
    )
    idx = np.array(
        [
            [0, 1, 2, 3, 4, 5, 6, 7],
            [1, 0, 7, 6, 5, 4, 3, 2],
            [2, 7, 0, 5, 6, 3, 4, 1],
            [3, 6, 5, 0, 7, 2, 1, 4],
            [4, 5, 6, 7, 0, 1, 2, 3],
            [5, 4, 3, 2, 1, 0, 7, 6],
            [6, 3, 4, 1, 2, 7, 0, 5],
            [7, 2, 1, 4, 3, 6, 5, 0],
        ]
    )
    return k[idx] / (1 - nu**2)


@functools.lru_cache(maxsize=16)
def _element_stiffness_cached(nu: float) -> np.ndarray:
    k0 = element_stiffness(nu)
    k0.setflags(write=False)
    return k0


@functools.lru_cache(maxsize=32)
def element_dof_map(nx: int, ny: int) -> np.ndarray:
    """(n_elements, 8) DOF indices per element, matching element_stiffness order.

    Element (ex, ey) uses nodes BL=(ex, ey+1), BR=(ex+1, ey+1), TR=(ex+1, ey),
    TL=(ex, ey), i.e. counterclockwise with y up.
    """
    ex, ey = np.meshgrid(np.arange(nx), np.arange(ny))  # row-major element order
    ex = ex.ravel()
    ey = ey.ravel()
    n_bl = ex * (ny + 1) + (ey + 1)
    n_br = (ex + 1) * (ny + 1) + (ey + 1)
    n_tr = (ex + 1) * (ny + 1) + ey
    n_tl = ex * (ny + 1) + ey
    edof = np.empty((nx * ny, 8), dtype=np.int64)
    for j, n in enumerate((n_bl, n_br, n_tr, n_tl)):
        edof[:, 2 * j] = 2 * n
        edof[:, 2 * j + 1] = 2 * n + 1
    edof.setflags(write=False)
    return edof


def simp_modulus(d, problem: DesignProblem):
    """Penalized modulus E(d) = e_min + d**p * (e0 - e_min); scalar or array."""
    d = np.asarray(d, dtype=np.float64)
    if d.size and (d.min() < 0.0 or d.max() > 1.0):
        raise ValueError("density must lie in [0, 1]")
    out = problem.e_min + d**problem.penalty * (problem.e0 - problem.e_min)
    return float(out) if out.ndim == 0 else out


def _unit_strain_energy(displacements: np.ndarray, edof: np.ndarray, k0: np.ndarray) -> np.ndarray:
    """u_e^T k0 u_e per element, clamped at 0 against roundoff."""
    ue = displacements[edof]
    q = np.einsum("ni,ij,nj->n", ue, k0, ue)
    return np.maximum(q, 0.0)


def _solve_direct(k_red: sp.csc_matrix, f_red: np.ndarray) -> np.ndarray:
    try:
        lu = splu(k_red)
    except RuntimeError as exc:  # singular factorization
        raise SolveError(
            f"direct factorization failed: {exc}",
            diagnostics={"ndof_reduced": k_red.shape[0], "reason": str(exc)},
        ) from exc
    u = lu.solve(f_red)
    if not np.all(np.isfinite(u)):
        raise SolveError(
            "direct solve produced non-finite displacements (system singular or ill-posed)",
            diagnostics={"ndof_reduced": k_red.shape[0]},
        )
    # iterative refinement: SIMP stiffness contrasts near 1e9 leave plain LU a
    # few digits short of the residual contract.  Each pass reuses the
    # factorization; keep the best iterate and stop once progress stalls.
    f_norm = np.linalg.norm(f_red)
    best_u = u
    best_res = np.linalg.norm(k_red @ u - f_red)
    for _ in range(8):
        if best_res <= 1e-10 * f_norm:
            break
        u = best_u + lu.solve(f_red - k_red @ best_u)
        res = np.linalg.norm(k_red @ u - f_red)
        if not np.isfinite(res) or res >= 0.5 * best_res:
            if res < best_res:
                best_u, best_res = u, res
            break
        best_u, best_res = u, res
    return best_u


def _solve_pcg(k_red: sp.csc_matrix, f_red: np.ndarray) -> np.ndarray:
    """Jacobi-preconditioned CG on the reduced SPD system.

    Iterates until the true residual satisfies ||Ku - f|| <= rtol * ||f||;
    iteration cap 10 * ndof.
    """
    diag = k_red.diagonal()
    if np.any(diag <= 0.0):
        raise SolveError(
            "reduced stiffness matrix has a non-positive diagonal entry",
            diagnostics={"min_diagonal": float(diag.min())},
        )
    inv_diag = 1.0 / diag
    f_norm = np.linalg.norm(f_red)
    x = np.zeros_like(f_red)
    r = f_red.copy()
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    max_iter = 10 * k_red.shape[0]
    for it in range(max_iter):
        ap = k_red @ p
        pap = p @ ap
        if pap <= 0.0:
            raise SolveError(
                "CG encountered non-positive curvature (matrix not positive definite)",
                diagnostics={"iteration": it, "curvature": float(pap)},
            )
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        if np.linalg.norm(r) <= CG_RELATIVE_TOLERANCE * f_norm:
            return x
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolveError(
        "CG did not converge",
        diagnostics={
            "iterations": max_iter,
            "relative_residual": float(np.linalg.norm(r) / f_norm),
        },
    )


def assemble_and_solve(problem: DesignProblem, densities: DensityField) -> FemSolution:
    """Assemble K from SIMP moduli, solve the reduced system, return compliances.

    Uses the sparse direct factorization up to DIRECT_SOLVER_MAX_ELEMENTS
    elements and Jacobi-PCG beyond that.  The direct path is deterministic:
    identical inputs give bitwise-identical solutions.
    """
    if (densities.nx, densities.ny) != (problem.nx, problem.ny):
        raise ValueError(
            f"density grid {densities.nx}x{densities.ny} does not match "
            f"problem grid {problem.nx}x{problem.ny}"
        )
    ndof = problem.ndof
    edof = element_dof_map(problem.nx, problem.ny)
    k0 = _element_stiffness_cached(problem.nu)
    moduli = simp_modulus(densities.values, problem)

    u = np.zeros(ndof)
    if not np.any(problem.forces):
        return FemSolution(u, np.zeros(problem.n_elements), 0.0, 0.0)

    data = (moduli[:, None, None] * k0[None, :, :]).ravel()
    rows = np.repeat(edof, 8, axis=1).ravel()
    cols = np.tile(edof, (1, 8)).ravel()
    k_full = sp.coo_matrix((data, (rows, cols)), shape=(ndof, ndof)).tocsc()

    free = ~problem.fixed_dofs
    k_red = k_full[free][:, free]
    f_red = problem.forces[free]

    if problem.n_elements <= DIRECT_SOLVER_MAX_ELEMENTS:
        u_red = _solve_direct(k_red, f_red)
    else:
        u_red = _solve_pcg(k_red, f_red)

    residual = float(np.linalg.norm(k_red @ u_red - f_red) / np.linalg.norm(f_red))
    if residual > 1e-8:
        raise SolveError(
            f"linear solve residual {residual:.3e} exceeds 1e-8",
            diagnostics={"relative_residual": residual},
        )
    u[free] = u_red

    energies = _unit_strain_energy(u, edof, k0)
    element_compliance = moduli * energies
    return FemSolution(u, element_compliance, float(element_compliance.sum()), residual)


def compliance_gradient(
    problem: DesignProblem, densities: DensityField, solution: FemSolution
) -> np.ndarray:
    """dc/dd per element via the self-adjoint form: -p d^(p-1) (e0 - e_min) u_e^T k0 u_e."""
    edof = element_dof_map(problem.nx, problem.ny)
    k0 = _element_stiffness_cached(problem.nu)
    energies = _unit_strain_energy(solution.displacements, edof, k0)
    d = densities.values
    p = problem.penalty
    return -p * d ** (p - 1.0) * (problem.e0 - problem.e_min) * energies


def compliance_mask(solution: FemSolution, threshold: float = MASK_THRESHOLD_DEFAULT) -> np.ndarray:
    """Per-element 0/1 gate: 1 where ln(element compliance) >= threshold.

    Elements with exactly zero compliance map to 0 (the log is undefined
    there, and a strain-free element by definition carries no load).
    """
    ce = solution.element_compliance
    mask = np.zeros_like(ce)
    positive = ce > 0.0
    mask[positive] = (np.log(ce[positive]) >= threshold).astype(np.float64)
    return mask
