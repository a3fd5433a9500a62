"""Synthetic color-blob datasets for desk-scale experiments and tests.

Each class is a solid color plus per-pixel Gaussian noise.  The default
palette is chosen so channel permutations map one class's color onto (or
near) another's: a channel-shuffling operator genuinely destroys the class
signal, while additive noise preserves it.
"""

from __future__ import annotations

import numpy as np

from .dataset import DatasetItem, LabeledDataset
from .raster import RasterImage
from .rng import derive_rng

DEFAULT_PALETTE = (
    (210, 60, 60),
    (60, 210, 60),
    (60, 60, 210),
    (210, 210, 60),
    (60, 210, 210),
    (210, 60, 210),
    (160, 160, 160),
    (230, 130, 40),
)


def blob_image(color: tuple[int, int, int], size: int, noise_sigma: float, rng) -> RasterImage:
    base = np.broadcast_to(np.array(color, dtype=np.float64), (size, size, 3))
    noisy = base + rng.normal(0.0, noise_sigma, size=(size, size, 3))
    return RasterImage.from_array(np.clip(noisy, 0, 255))


def blob_dataset(
    classes: int = 5,
    shots: int = 1,
    size: int = 16,
    noise_sigma: float = 8.0,
    seed: int = 0,
    palette: tuple[tuple[int, int, int], ...] = DEFAULT_PALETTE,
) -> LabeledDataset:
    if classes > len(palette):
        raise ValueError(f"palette holds {len(palette)} colors, need {classes}")
    items = []
    for c in range(classes):
        for s in range(shots):
            rng = derive_rng(seed, "blob", c, s)
            items.append(
                DatasetItem(
                    id=f"c{c}_s{s}",
                    label=c,
                    image=blob_image(palette[c], size, noise_sigma, rng),
                )
            )
    return LabeledDataset(items=items, class_names=[f"class{c}" for c in range(classes)])
