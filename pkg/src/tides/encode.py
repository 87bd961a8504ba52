"""Design encoding: raw parameter canvas -> blur -> saturating sigmoid -> densities.

The sigmoid is a Hill-style map ``d = 1 / (1 + a / (x**n + 0.1))`` with
``a = 0.8`` and ``n = 20``; it squeezes most of its output toward 0 or 1,
which is what the downstream physics wants.  Inputs are clamped to
``[0, X_MAX]`` first: the raw map is not monotone for negative x and
``x**20`` overflows quickly.

The blur renormalizes its kernel at the boundary (taps falling outside the
grid are dropped and the rest rescaled), so constant canvases stay constant.
With a symmetric kernel that makes the exact adjoint
``blur_transpose(y) = conv(y / tapsum)`` where ``tapsum`` is the per-pixel
sum of in-grid taps.

All gradient helpers here are hand-derived; the test suite checks them
against central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .fem import DensityField

X_MAX = 4.0
HILL_ALPHA = 0.8
HILL_N = 20.0
HILL_OFFSET = 0.1


@dataclass(frozen=True)
class ParameterField:
    """Unconstrained learnable canvas, one value per element, row-major."""

    nx: int
    ny: int
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.shape != (self.nx * self.ny,):
            raise ValueError(f"expected {self.nx * self.ny} values, got {values.shape}")
        if values.size and not np.all(np.isfinite(values)):
            raise ValueError("parameter values must be finite")

    def grid(self) -> np.ndarray:
        return self.values.reshape(self.ny, self.nx)


@dataclass(frozen=True)
class BlurKernel:
    """Truncated 2D Gaussian, sigma in element units, radius = ceil(3 sigma)."""

    sigma: float = 1.0
    radius: int = -1  # -1: derive from sigma

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.radius < 0:
            object.__setattr__(self, "radius", math.ceil(3.0 * self.sigma))
        offsets = np.arange(-self.radius, self.radius + 1, dtype=np.float64)
        taps = np.exp(-0.5 * (offsets / self.sigma) ** 2)
        taps /= taps.sum()
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def weights(self) -> np.ndarray:
        """Normalized 2D taps (the separable outer product)."""
        return np.outer(self.taps, self.taps)


def _conv2(grid: np.ndarray, kernel: BlurKernel) -> np.ndarray:
    """Separable zero-padded convolution with the symmetric taps."""
    out = convolve1d(grid, kernel.taps, axis=0, mode="constant", cval=0.0)
    return convolve1d(out, kernel.taps, axis=1, mode="constant", cval=0.0)


def _tap_sums(shape: tuple[int, int], kernel: BlurKernel) -> np.ndarray:
    """Per-pixel sum of in-grid taps, the boundary renormalizer."""
    ny, nx = shape
    col = convolve1d(np.ones(ny), kernel.taps, mode="constant", cval=0.0)
    row = convolve1d(np.ones(nx), kernel.taps, mode="constant", cval=0.0)
    return np.outer(col, row)


def blur_grid(grid: np.ndarray, kernel: BlurKernel) -> np.ndarray:
    """Boundary-renormalized Gaussian blur of a 2D array."""
    return _conv2(grid, kernel) / _tap_sums(grid.shape, kernel)


def blur_transpose_grid(grid: np.ndarray, kernel: BlurKernel) -> np.ndarray:
    """Exact adjoint of blur_grid: <blur(x), y> == <x, blur_transpose(y)>."""
    return _conv2(grid / _tap_sums(grid.shape, kernel), kernel)


def blur(params: ParameterField, kernel: BlurKernel) -> ParameterField:
    return ParameterField(params.nx, params.ny, blur_grid(params.grid(), kernel).ravel())


def blur_transpose(grad: ParameterField, kernel: BlurKernel) -> ParameterField:
    return ParameterField(grad.nx, grad.ny, blur_transpose_grid(grad.grid(), kernel).ravel())


def hill(x) -> np.ndarray:
    """Saturating sigmoid of Eq-style form 1/(1 + a/(x^n + 0.1)), clamped input."""
    xc = np.clip(np.asarray(x, dtype=np.float64), 0.0, X_MAX)
    return 1.0 / (1.0 + HILL_ALPHA / (xc**HILL_N + HILL_OFFSET))


def hill_derivative(x) -> np.ndarray:
    """Analytic d(hill)/dx; zero outside the input clamp (subgradient convention)."""
    x = np.asarray(x, dtype=np.float64)
    inside = (x >= 0.0) & (x <= X_MAX)
    xc = np.clip(x, 0.0, X_MAX)
    s = xc**HILL_N + HILL_OFFSET
    deriv = HILL_ALPHA * HILL_N * xc ** (HILL_N - 1.0) / (s + HILL_ALPHA) ** 2
    return np.where(inside, deriv, 0.0)


def init_canvas(
    nx: int,
    ny: int,
    mode: str = "ones",
    *,
    seed: int | None = None,
    lo: float = 0.0,
    hi: float = 1.0,
    values=None,
) -> ParameterField:
    """Starting canvas: all 1.0 (solid block), seeded uniform noise, or given values.

    Random mode draws i.i.d. uniform[lo, hi) from numpy's default generator
    (PCG64: a permuted congruential generator with 128-bit state and 64-bit
    output), so a seed pins the canvas bit-exactly across platforms.
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"grid dims must be >= 1, got {nx}x{ny}")
    if mode == "ones":
        vals = np.ones(nx * ny)
    elif mode == "uniform_random":
        if not lo < hi:
            raise ValueError(f"need lo < hi, got [{lo}, {hi})")
        vals = np.random.default_rng(seed).uniform(lo, hi, nx * ny)
    elif mode == "from_values":
        vals = np.asarray(values, dtype=np.float64).ravel().copy()
    else:
        raise ValueError(f"unknown init mode {mode!r}")
    return ParameterField(nx, ny, vals)


def _param_clamp_bounds(sigmoid: str) -> tuple[float, float]:
    # identity encoding clamps the canvas straight to density range
    if sigmoid == "hill":
        return 0.0, X_MAX
    if sigmoid == "identity":
        return 0.0, 1.0
    raise ValueError(f"unknown sigmoid {sigmoid!r}")


def encode(params: ParameterField, kernel: BlurKernel, sigmoid: str = "hill") -> DensityField:
    """Densities = sigmoid(blur(clamp(params))).

    ``sigmoid="identity"`` disables the Hill map (ablation mode); the canvas
    is then clamped to [0, 1] and the blurred values are used directly.
    """
    lo, hi = _param_clamp_bounds(sigmoid)
    z = blur_grid(np.clip(params.grid(), lo, hi), kernel)
    if sigmoid == "hill":
        d = hill(z)
    else:
        d = np.clip(z, 0.0, 1.0)  # blur keeps [0,1]; clip guards roundoff
    return DensityField(params.nx, params.ny, d.ravel())


def encode_gradient(
    params: ParameterField,
    kernel: BlurKernel,
    grad_density: np.ndarray,
    sigmoid: str = "hill",
) -> np.ndarray:
    """Pull a per-element density gradient back to the raw canvas.

    Chain: clamp subgradient o blur adjoint o sigmoid derivative.
    """
    lo, hi = _param_clamp_bounds(sigmoid)
    raw = params.grid()
    z = blur_grid(np.clip(raw, lo, hi), kernel)
    g = np.asarray(grad_density, dtype=np.float64).reshape(params.ny, params.nx)
    if sigmoid == "hill":
        g = g * hill_derivative(z)
    g = blur_transpose_grid(g, kernel)
    clamp_pass = (raw >= lo) & (raw <= hi)
    return np.where(clamp_pass, g, 0.0).ravel()


def init_from_image(image: np.ndarray, kernel: BlurKernel) -> ParameterField:
    """Per-pixel analytic inverse of the Hill map for warm starts.

    ``image`` is a (ny, nx) material field in [0, 1] (1 = solid).  Densities
    are clipped to [0.01, 0.99] so the inverse stays finite, and inverting
    the blur is deliberately skipped (deconvolution is ill-posed); the
    accepted reproduction error of encode(init_from_image(img)) is therefore
    one blur application.  ``kernel`` is the blur that will be applied at
    encode time and only documents that contract.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a 2D field, got shape {img.shape}")
    if img.size and (img.min() < 0.0 or img.max() > 1.0):
        raise ValueError("image values must lie in [0, 1]")
    d = np.clip(img, 0.01, 0.99)
    base = HILL_ALPHA * d / (1.0 - d) - HILL_OFFSET
    x = np.clip(np.maximum(base, 0.0) ** (1.0 / HILL_N), 0.0, X_MAX)
    ny, nx = img.shape
    return ParameterField(nx, ny, x.ravel())
