"""Pluggable providers mapping images to fixed-dimension embedding vectors.

Providers are pure: the same spec and images always give the same matrix.
Neural encoders are reached only through precomputed files or the remote
worker; nothing here runs a network.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import (
    IoError,
    MissingEmbeddingError,
    NonFiniteEmbeddingError,
    ProtocolError,
)
from .raster import RasterImage
from .rng import derive_rng
from .worker_client import WorkerClient


@dataclass(frozen=True)
class EmbeddingMatrix:
    ids: tuple[str, ...]
    rows: np.ndarray  # (n, dim) float64

    def __post_init__(self):
        if self.rows.ndim != 2:
            raise ValueError(f"rows must be 2-D, got shape {self.rows.shape}")
        if len(self.ids) != self.rows.shape[0]:
            raise ValueError("ids and rows are misaligned")
        if not np.all(np.isfinite(self.rows)):
            raise NonFiniteEmbeddingError("embedding matrix holds NaN or infinite entries")

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class PixelProvider:
    """Area-average downsample to target_size^2, flattened and scaled to [0, 1]."""

    target_size: int = 8

    def __post_init__(self):
        if self.target_size < 1:
            raise ValueError("target_size must be positive")


@dataclass(frozen=True)
class RandProjProvider:
    """Pixel features pushed through a seeded Gaussian projection (var 1/dim)."""

    dim: int
    seed: int = 0
    target_size: int = 8

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.target_size < 1:
            raise ValueError("target_size must be positive")


@dataclass(frozen=True)
class PrecomputedProvider:
    """Vectors read from a text file: header "dim=<d>", then "<id> <d floats>"."""

    path: Path


@dataclass(frozen=True)
class RemoteProvider:
    """Embeddings served by a worker that advertises the "embed" capability."""

    client: WorkerClient


ProviderSpec = Union[PixelProvider, RandProjProvider, PrecomputedProvider, RemoteProvider]


def _area_weights(n: int, target: int) -> np.ndarray:
    """(target, n) matrix whose row t averages source cells overlapping dest cell t."""
    weights = np.zeros((target, n))
    cell = n / target
    for t in range(target):
        lo, hi = t * cell, (t + 1) * cell
        for j in range(int(np.floor(lo)), min(n, int(np.ceil(hi)))):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                weights[t, j] = overlap / cell
    return weights


def pixel_features(img: RasterImage, target_size: int) -> np.ndarray:
    """Flattened area-averaged pixels in [0, 1]; grayscale is widened to 3 channels."""
    arr = img.to_array().astype(np.float64)
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    wy = _area_weights(arr.shape[0], target_size)
    wx = _area_weights(arr.shape[1], target_size)
    pooled = np.einsum("ty,yxc,ux->tuc", wy, arr, wx)
    return pooled.reshape(-1) / 255.0


def _load_precomputed(path: Path) -> tuple[int, dict[str, np.ndarray]]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read embeddings {path}: {exc}") from exc
    if not lines or not lines[0].startswith("dim="):
        raise IoError(f"{path}: first line must be 'dim=<d>'")
    dim = int(lines[0][4:])
    table: dict[str, np.ndarray] = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split()
        vec = np.array([float(x) for x in parts[1:]])
        if vec.shape[0] != dim:
            raise IoError(f"{path}: row {parts[0]!r} has {vec.shape[0]} values, expected {dim}")
        table[parts[0]] = vec
    return dim, table


def embed_items(
    provider: ProviderSpec, images: Sequence[tuple[str, RasterImage]]
) -> EmbeddingMatrix:
    """Embed (id, image) pairs; row order follows input order."""
    ids = tuple(item_id for item_id, _ in images)
    if isinstance(provider, PixelProvider):
        rows = np.stack(
            [pixel_features(img, provider.target_size) for _, img in images]
        ) if images else np.zeros((0, provider.target_size**2 * 3))
        return EmbeddingMatrix(ids=ids, rows=rows)
    if isinstance(provider, RandProjProvider):
        feats = np.stack(
            [pixel_features(img, provider.target_size) for _, img in images]
        ) if images else np.zeros((0, provider.target_size**2 * 3))
        in_dim = provider.target_size**2 * 3
        proj_rng = derive_rng(provider.seed, "randproj", in_dim, provider.dim)
        proj = proj_rng.normal(0.0, 1.0 / np.sqrt(provider.dim), size=(in_dim, provider.dim))
        return EmbeddingMatrix(ids=ids, rows=feats @ proj)
    if isinstance(provider, PrecomputedProvider):
        dim, table = _load_precomputed(provider.path)
        rows = np.zeros((len(images), dim))
        for i, (item_id, _) in enumerate(images):
            if item_id not in table:
                raise MissingEmbeddingError(f"no precomputed embedding for id {item_id!r}")
            rows[i] = table[item_id]
        return EmbeddingMatrix(ids=ids, rows=rows)
    if isinstance(provider, RemoteProvider):
        caps, _ = provider.client.capabilities()
        if "embed" not in {c.lower() for c in caps}:
            raise ProtocolError("worker does not advertise the 'embed' capability")
        rows = [provider.client.embed(img) for _, img in images]
        return EmbeddingMatrix(ids=ids, rows=np.array(rows, dtype=np.float64))
    raise TypeError(f"unknown provider spec {provider!r}")


def write_precomputed(path: Path, matrix: EmbeddingMatrix) -> None:
    """Inverse of the precomputed reader; handy for exporting encoder outputs."""
    lines = [f"dim={matrix.dim}"]
    for item_id, row in zip(matrix.ids, matrix.rows):
        lines.append(item_id + " " + " ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
