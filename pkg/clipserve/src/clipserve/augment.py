"""Seeded, differentiable augmentation batch: random crop, random
perspective, resize back to the model resolution.

Parameter sampling comes from an explicit torch.Generator so a request seed
pins the whole batch; every image operation (slicing, perspective warp,
bilinear resize) is differentiable with respect to the input pixels.
"""

from __future__ import annotations

import torch
from torchvision.transforms import InterpolationMode
from torchvision.transforms import functional as TF

CROP_SCALE = (0.7, 1.0)
PERSPECTIVE_DISTORTION = 0.2
MODEL_SIZE = 224


def _sample_crop(gen: torch.Generator, size: int) -> tuple[int, int, int]:
    scale = CROP_SCALE[0] + (CROP_SCALE[1] - CROP_SCALE[0]) * torch.rand(1, generator=gen).item()
    side = max(16, min(size, round(scale * size)))
    max_off = size - side
    y0 = int(torch.randint(0, max_off + 1, (1,), generator=gen).item())
    x0 = int(torch.randint(0, max_off + 1, (1,), generator=gen).item())
    return y0, x0, side


def _sample_perspective(gen: torch.Generator, side: int):
    """Corner jitter up to PERSPECTIVE_DISTORTION * side, pulled inward."""
    limit = int(PERSPECTIVE_DISTORTION * side)
    start = [[0, 0], [side - 1, 0], [side - 1, side - 1], [0, side - 1]]
    if limit == 0:
        return start, start
    jitter = torch.randint(0, limit + 1, (8,), generator=gen).tolist()
    end = [
        [jitter[0], jitter[1]],
        [side - 1 - jitter[2], jitter[3]],
        [side - 1 - jitter[4], side - 1 - jitter[5]],
        [jitter[6], side - 1 - jitter[7]],
    ]
    return start, end


def augment_batch(image: torch.Tensor, augmentations: int, seed: int) -> torch.Tensor:
    """(3, S, S) image -> (k, 3, MODEL_SIZE, MODEL_SIZE) augmented batch."""
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"expected a (3, H, W) image, got {tuple(image.shape)}")
    gen = torch.Generator(device="cpu")
    gen.manual_seed(int(seed) & (2**63 - 1))
    size = image.shape[-1]
    views = []
    for _ in range(augmentations):
        y0, x0, side = _sample_crop(gen, size)
        crop = image[:, y0 : y0 + side, x0 : x0 + side]
        start, end = _sample_perspective(gen, side)
        warped = TF.perspective(crop, start, end, InterpolationMode.BILINEAR, fill=1.0)
        views.append(TF.resize(warped, [MODEL_SIZE, MODEL_SIZE],
                               InterpolationMode.BILINEAR, antialias=False))
    return torch.stack(views)
