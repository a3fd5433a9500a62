"""Fake-mode operator filters.

Each filter is a cheap, fully deterministic stand-in that keeps the output
the same shape as the input.  The conditioning-style operators (canny, depth,
color, segment, nerf) preserve class-level appearance so downstream searches
have a usable signal; "scramble" deliberately destroys it and exists to give
search pipelines a known-bad operator.
"""

from __future__ import annotations

import numpy as np

NERF_ROTATIONS = (-15.0, 15.0)


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.uint64(seed))


def canny(arr: np.ndarray, seed: int) -> np.ndarray:
    """Edge-map overlay: bright edges painted over a dimmed image."""
    gray = arr.astype(np.float64).mean(axis=2)
    gx = np.zeros_like(gray)
    gy = np.zeros_like(gray)
    gx[:, 1:-1] = gray[:, 2:] - gray[:, :-2]
    gy[1:-1, :] = gray[2:, :] - gray[:-2, :]
    magnitude = np.hypot(gx, gy)
    percentile = float(_rng(seed).uniform(70.0, 90.0))
    threshold = np.percentile(magnitude, percentile)
    edges = magnitude > max(threshold, 1e-9)
    out = arr.astype(np.float64) * 0.55
    out[edges] = 255.0
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def depth(arr: np.ndarray, seed: int) -> np.ndarray:
    """Radial gradient blend: center lit, rim darkened, center jittered by seed."""
    h, w = arr.shape[:2]
    gen = _rng(seed)
    cy = (h - 1) / 2.0 + float(gen.uniform(-0.15, 0.15)) * h
    cx = (w - 1) / 2.0 + float(gen.uniform(-0.15, 0.15)) * w
    ys, xs = np.mgrid[0:h, 0:w]
    dist = np.hypot(ys - cy, xs - cx)
    rmax = float(dist.max()) or 1.0
    shade = 1.0 - 0.6 * (dist / rmax)
    out = arr.astype(np.float64) * shade[:, :, None]
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def color(arr: np.ndarray, seed: int) -> np.ndarray:
    """Posterized palette: quantize every channel to a few seeded levels."""
    levels = int(_rng(seed).integers(3, 7))
    scaled = arr.astype(np.float64) / 255.0
    quantized = np.rint(scaled * (levels - 1)) / (levels - 1)
    return np.clip(np.rint(quantized * 255.0), 0, 255).astype(np.uint8)


def segment(arr: np.ndarray, seed: int) -> np.ndarray:
    """Region-mean fill over a seeded grid of cells."""
    h, w = arr.shape[:2]
    cells = int(_rng(seed).integers(3, 7))
    out = arr.astype(np.float64).copy()
    y_edges = np.linspace(0, h, cells + 1, dtype=int)
    x_edges = np.linspace(0, w, cells + 1, dtype=int)
    for yi in range(cells):
        for xi in range(cells):
            y0, y1 = y_edges[yi], y_edges[yi + 1]
            x0, x1 = x_edges[xi], x_edges[xi + 1]
            if y1 > y0 and x1 > x0:
                out[y0:y1, x0:x1] = out[y0:y1, x0:x1].mean(axis=(0, 1))
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def nerf(arr: np.ndarray, seed: int, rotation: float) -> np.ndarray:
    """Affine horizontal shear standing in for a small 3D azimuth rotation."""
    if rotation not in NERF_ROTATIONS:
        raise ValueError(f"rotation must be one of {NERF_ROTATIONS}, got {rotation}")
    h, w = arr.shape[:2]
    shear = np.tan(np.radians(rotation))
    cy = (h - 1) / 2.0
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    src_x = xs - shear * (ys - cy)
    x0 = np.floor(src_x).astype(int)
    frac = src_x - x0
    out = np.zeros_like(arr, dtype=np.float64)
    for dx, weight in ((0, 1.0 - frac), (1, frac)):
        col = x0 + dx
        inside = (col >= 0) & (col < w)
        vals = arr[ys.astype(int), np.clip(col, 0, w - 1)]
        out += weight[:, :, None] * np.where(inside[:, :, None], vals, 0.0)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def scramble(arr: np.ndarray, seed: int) -> np.ndarray:
    """Destructive control: seeded permutation of every sample in the image."""
    flat = arr.reshape(-1)
    perm = _rng(seed).permutation(flat.shape[0])
    return flat[perm].reshape(arr.shape)


def embed(arr: np.ndarray, dim: int = 32) -> list[float]:
    """Deterministic hash-seeded vector: identical images embed identically."""
    import hashlib

    digest = hashlib.blake2b(
        arr.tobytes() + bytes(str(arr.shape), "ascii"), digest_size=8
    ).digest()
    gen = np.random.default_rng(int.from_bytes(digest, "little"))
    return [float(v) for v in gen.standard_normal(dim)]


AUGMENTERS = {
    "canny": canny,
    "depth": depth,
    "color": color,
    "segment": segment,
    "scramble": scramble,
}
