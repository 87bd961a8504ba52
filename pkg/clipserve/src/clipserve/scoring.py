"""Scoring pipeline: native-resolution pixels in, mean augmented similarity
and its exact pixel gradient out.

Pipeline: repeat the single channel 3-fold -> bilinear resize to 224 ->
seeded augmentation batch -> image encoder -> mean cosine similarity against
the cached text embedding.  The gradient is torch autodiff of that mean with
respect to the submitted pixels, so the resize/repeat/augmentation adjoints
are exact by construction.
"""

from __future__ import annotations

import base64

import numpy as np
import torch
from torchvision.transforms import InterpolationMode
from torchvision.transforms import functional as TF

from .augment import MODEL_SIZE, augment_batch
from .model import JudgeModel


def encode_b64(values: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(values, dtype="<f4").tobytes()).decode("ascii")


def decode_b64(data: str, width: int, height: int) -> np.ndarray:
    raw = base64.b64decode(data, validate=True)
    if len(raw) != 4 * width * height:
        raise ValueError(f"payload holds {len(raw)} bytes, expected {4 * width * height}")
    return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(height, width)


def score_and_grad(
    model: JudgeModel,
    pixels: np.ndarray,
    prompt: str,
    augmentations: int,
    seed: int,
) -> tuple[float, np.ndarray]:
    """Mean similarity over the augmentation batch plus d(score)/d(pixel)."""
    if augmentations < 1:
        raise ValueError("augmentations must be >= 1")
    if pixels.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {pixels.shape}")
    text = model.text_embedding(prompt)

    x = torch.tensor(pixels, dtype=model.dtype, device=model.device, requires_grad=True)
    gray3 = x.unsqueeze(0).expand(3, -1, -1)
    resized = TF.resize(gray3, [MODEL_SIZE, MODEL_SIZE],
                        InterpolationMode.BILINEAR, antialias=False)
    batch = augment_batch(resized, augmentations, seed)
    embeddings = model.image_embeddings(batch)
    score = (embeddings @ text).mean()
    score.backward()
    return float(score.item()), x.grad.detach().cpu().numpy().astype(np.float64)
