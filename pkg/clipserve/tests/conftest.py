"""Sidecar test fixtures: the tiny seeded model app, a client, and
silhouette images.

The pretrained fixture tries a local-files-only load so no test ever hangs
on a network that is not there; ordering-sanity tests skip without it.
"""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from clipserve.app import create_app


@pytest.fixture(scope="session")
def tiny_app():
    return create_app(model_id="tiny", dtype="float64")


@pytest.fixture(scope="session")
def client(tiny_app):
    with TestClient(tiny_app) as c:
        yield c


@pytest.fixture(scope="session")
def pretrained_model():
    import os

    os.environ.setdefault("HF_HUB_OFFLINE", "1")  # fail fast, never wait on DNS
    from clipserve.model import DEFAULT_MODEL, JudgeModel

    try:
        return JudgeModel(DEFAULT_MODEL)
    except Exception as exc:
        pytest.skip(f"pretrained weights unavailable: {exc}")


def silhouette(kind: str, n: int = 64) -> np.ndarray:
    """White background with a dark filled shape, in [0, 1]."""
    ys, xs = np.meshgrid(np.arange(n) + 0.5, np.arange(n) + 0.5, indexing="ij")
    cx = cy = n / 2
    if kind == "triangle":
        frac = ys / n
        inside = np.abs(xs - cx) <= 0.45 * n * frac
    elif kind == "hexagon":
        px = (xs - cx) / (0.45 * n)
        py = (ys - cy) / (0.45 * n)
        inside = (np.abs(py) <= 0.866) & (0.866 * np.abs(px) + 0.5 * np.abs(py) <= 0.866)
    elif kind == "disk":
        inside = np.hypot(xs - cx, ys - cy) <= 0.35 * n
    else:
        raise ValueError(kind)
    return 1.0 - inside.astype(np.float64)


def judge_payload(pixels: np.ndarray, prompt: str, augmentations: int = 2, seed: int = 0):
    from clipserve.scoring import encode_b64

    h, w = pixels.shape
    return {
        "prompt": prompt,
        "width": w,
        "height": h,
        "pixels_b64": encode_b64(pixels),
        "augmentations": augmentations,
        "seed": seed,
    }
