"""Procedural silhouette fields for judge targets, demos, and fixtures.

Each function returns a (ny, nx) float array in [0, 1] where 1 means
material (rendered dark).  Pixel centers sit at integer + 0.5 coordinates
with y increasing downward, matching the element grid.
"""

from __future__ import annotations

import numpy as np


def _pixel_centers(nx: int, ny: int):
    ys, xs = np.meshgrid(np.arange(ny) + 0.5, np.arange(nx) + 0.5, indexing="ij")
    return xs, ys


def disk(nx: int, ny: int, cx: float | None = None, cy: float | None = None,
         radius: float | None = None) -> np.ndarray:
    """Filled circle; defaults to centered with radius 0.3 * min(nx, ny)."""
    cx = nx / 2 if cx is None else cx
    cy = ny / 2 if cy is None else cy
    radius = 0.3 * min(nx, ny) if radius is None else radius
    xs, ys = _pixel_centers(nx, ny)
    return (np.hypot(xs - cx, ys - cy) <= radius).astype(np.float64)


def soft_disk(nx: int, ny: int, inner: float | None = None, outer: float | None = None) -> np.ndarray:
    """Shaded disk: solid core fading linearly to the background.

    Most of its area is a radial gray ramp, which a saturating encoding
    cannot reproduce; useful for shading-ablation fixtures.
    """
    inner = 0.1 * min(nx, ny) if inner is None else inner
    outer = 0.45 * min(nx, ny) if outer is None else outer
    xs, ys = _pixel_centers(nx, ny)
    dist = np.hypot(xs - nx / 2, ys - ny / 2)
    return np.clip((outer - dist) / (outer - inner), 0.0, 1.0)


def ring(nx: int, ny: int, radius: float | None = None, thickness: float | None = None) -> np.ndarray:
    """Annulus centered in the domain."""
    radius = 0.3 * min(nx, ny) if radius is None else radius
    thickness = max(2.0, 0.08 * min(nx, ny)) if thickness is None else thickness
    xs, ys = _pixel_centers(nx, ny)
    dist = np.hypot(xs - nx / 2, ys - ny / 2)
    return (np.abs(dist - radius) <= thickness / 2).astype(np.float64)


def triangle(nx: int, ny: int) -> np.ndarray:
    """Solid isoceles triangle, apex at the top center, base on the ground."""
    xs, ys = _pixel_centers(nx, ny)
    frac = ys / ny  # 0 at apex row, 1 at base
    half_width = 0.45 * nx * frac
    return (np.abs(xs - nx / 2) <= half_width).astype(np.float64)


def hexagon(nx: int, ny: int) -> np.ndarray:
    """Regular-ish hexagon (flat top/bottom) centered in the domain."""
    xs, ys = _pixel_centers(nx, ny)
    px = (xs - nx / 2) / (0.45 * nx)
    py = (ys - ny / 2) / (0.45 * ny)
    inside = (np.abs(py) <= 0.866) & (0.866 * np.abs(px) + 0.5 * np.abs(py) <= 0.866)
    return inside.astype(np.float64)


def arch(nx: int, ny: int) -> np.ndarray:
    """Semicircular arch band standing on the ground."""
    xs, ys = _pixel_centers(nx, ny)
    cx, cy = nx / 2, 0.95 * ny
    outer = 0.45 * min(nx, ny * 1.05)
    inner = 0.62 * outer
    dist = np.hypot(xs - cx, ys - cy)
    return ((dist <= outer) & (dist >= inner) & (ys <= cy)).astype(np.float64)
