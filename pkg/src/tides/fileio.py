"""File formats: the TDSF field container, PGM images, grayscale loading,
the flat key=value run-config grammar, and CSV tables.

TDSF field container (little-endian throughout):

    bytes 0..3   magic "TDSF"
    u32          version (currently 1)
    u32          nx
    u32          ny
    f32[nx*ny]   row-major payload

Checkpoint container (see tides.opt for the writer):

    bytes 0..3   magic "TIDE"
    u32          version (currently 1)
    u32          nx
    u32          ny
    f32[nx*ny]   parameters
    f64[nx*ny]   first moments
    f64[nx*ny]   second moments
    u64          step count
    u64          PRNG state (the run's base seed)

Config grammar: one ``key = value`` per line; blank lines and lines starting
with ``#`` are ignored; values are bare tokens (no quoting) parsed by the
target field type; booleans are ``true``/``false``.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np
from PIL import Image

TDSF_MAGIC = b"TDSF"
TIDE_MAGIC = b"TIDE"
FORMAT_VERSION = 1

# ITU-R 601 luminance weights for RGB -> gray
LUMA = np.array([0.299, 0.587, 0.114])


class InputError(ValueError):
    """Unreadable or unsupported input file."""


def save_field(path, nx: int, ny: int, values: np.ndarray) -> None:
    """Write a row-major field as a TDSF container (float32 payload)."""
    values = np.ascontiguousarray(values, dtype="<f4").ravel()
    if values.size != nx * ny:
        raise ValueError(f"field has {values.size} values, expected {nx * ny}")
    with open(path, "wb") as fh:
        fh.write(TDSF_MAGIC)
        fh.write(struct.pack("<III", FORMAT_VERSION, nx, ny))
        fh.write(values.tobytes())


def load_field(path) -> tuple[int, int, np.ndarray]:
    """Read a TDSF container; returns (nx, ny, float64 values)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != TDSF_MAGIC:
            raise InputError(f"{path}: not a TDSF field file (magic {magic!r})")
        version, nx, ny = struct.unpack("<III", fh.read(12))
        if version != FORMAT_VERSION:
            raise InputError(f"{path}: unsupported TDSF version {version}")
        payload = fh.read(4 * nx * ny)
        if len(payload) != 4 * nx * ny:
            raise InputError(f"{path}: truncated payload")
        values = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    return nx, ny, values


def write_pgm(path, gray01: np.ndarray) -> None:
    """8-bit binary PGM (P5) from a (h, w) array in [0, 1]."""
    gray01 = np.asarray(gray01, dtype=np.float64)
    if gray01.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {gray01.shape}")
    data = np.rint(np.clip(gray01, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def render_density_pgm(path, nx: int, ny: int, densities: np.ndarray) -> None:
    """Render a density field as a PGM, dark = material."""
    grid = np.asarray(densities, dtype=np.float64).reshape(ny, nx)
    write_pgm(path, 1.0 - grid)


def bilinear_resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with pixel-center alignment; identity when dims match."""
    arr = np.asarray(arr, dtype=np.float64)
    h, w = arr.shape
    if (h, w) == (out_h, out_w):
        return arr.copy()
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = arr[np.ix_(y0, x0)] * (1 - fx) + arr[np.ix_(y0, x1)] * fx
    bot = arr[np.ix_(y1, x0)] * (1 - fx) + arr[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def load_grayscale_image(path, target_nx: int, target_ny: int) -> np.ndarray:
    """Load an 8-bit PGM/PNG as a (target_ny, target_nx) material field in [0, 1].

    RGB collapses to luminance; polarity is dark-is-material
    (field = 1 - pixel/255) to match the judge convention.
    """
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise InputError(f"{path}: cannot read image ({exc})") from exc
    if img.mode == "L":
        gray = np.asarray(img, dtype=np.float64) / 255.0
    elif img.mode == "RGB":
        rgb = np.asarray(img, dtype=np.float64) / 255.0
        gray = rgb @ LUMA
    else:
        raise InputError(f"{path}: unsupported image mode {img.mode!r} (need 8-bit L or RGB)")
    gray = bilinear_resize(gray, target_ny, target_nx)
    return 1.0 - gray


# ---------------------------------------------------------------------------
# flat key = value config files
# ---------------------------------------------------------------------------


def parse_config_text(text: str) -> dict[str, str]:
    """Parse the flat grammar into raw string values; duplicate keys are an error."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise InputError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise InputError(f"line {lineno}: empty key")
        if key in out:
            raise InputError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config_file(path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def format_config(pairs: dict) -> str:
    """Serialize key/value pairs back to the flat grammar (floats via repr)."""
    lines = []
    for key, value in pairs.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def parse_bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise InputError(f"expected a boolean, got {raw!r}")


# ---------------------------------------------------------------------------
# CSV tables
# ---------------------------------------------------------------------------

LOSS_COLUMNS = ["epoch", "compliance", "material", "vision", "total"]


def write_loss_csv(path, rows: list[dict]) -> None:
    """Loss table rows; floats are written with repr for exact round-trips."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOSS_COLUMNS)
        for row in rows:
            writer.writerow(
                [row["epoch"]] + [repr(float(row[c])) for c in LOSS_COLUMNS[1:]]
            )


def read_loss_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            rows.append(
                {
                    "epoch": int(raw["epoch"]),
                    **{c: float(raw[c]) for c in LOSS_COLUMNS[1:]},
                }
            )
    return rows


def write_trials_csv(path, rows: list[tuple[int, float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "compliance", "score"])
        for seed, compliance, score in rows:
            writer.writerow([seed, repr(float(compliance)), repr(float(score))])
