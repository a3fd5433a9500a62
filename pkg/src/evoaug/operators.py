"""Operator registry: tags bound to executable image transforms.

Three families share one registry:
  native  -> Classical (sampled transform) and NoOp, always installed
  mock    -> deterministic stand-ins for generative operators, used in tests
             and desk-scale searches
  remote  -> tags served by a worker over the wire protocol

The registry is read-only after setup and never mutates input images, so
concurrent ``apply`` calls are safe.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DuplicateOperatorError,
    OperatorError,
    ProtocolError,
    UnknownOperatorError,
    WorkerUnreachableError,
)
from .raster import (
    ClassicalAugConfig,
    RasterImage,
    apply_transform,
    sample_classical_spec,
)
from .worker_client import WorkerClient

MOCK_BEHAVIORS = ("invert", "channel_shuffle", "gaussian_noise", "identity")


@dataclass(frozen=True)
class MockSpec:
    behavior: str
    sigma: float = 0.0

    def __post_init__(self):
        if self.behavior not in MOCK_BEHAVIORS:
            raise ConfigError(f"unknown mock behavior {self.behavior!r}")
        if self.sigma < 0:
            raise ConfigError("gaussian_noise sigma must be >= 0")


@dataclass(frozen=True)
class _RemoteEntry:
    client: WorkerClient
    wire_op: str


def invert_image(img: RasterImage) -> RasterImage:
    return RasterImage.from_array(255 - img.to_array())


def shuffle_channels(img: RasterImage, perm: tuple[int, ...]) -> RasterImage:
    """Reorder channels so output channel c holds input channel perm[c]."""
    arr = img.to_array()
    return RasterImage.from_array(arr[:, :, list(perm)])


def add_gaussian_noise(img: RasterImage, sigma: float, rng: np.random.Generator) -> RasterImage:
    arr = img.to_array().astype(np.float64)
    noise = np.rint(rng.normal(0.0, sigma, size=arr.shape))
    return RasterImage.from_array(np.clip(arr + noise, 0, 255))


class OperatorRegistry:
    """Maps operator tags to transforms; Classical and NoOp are always present."""

    def __init__(self, classical_config: ClassicalAugConfig | None = None):
        self.classical_config = classical_config or ClassicalAugConfig()
        self._mocks: dict[str, MockSpec] = {}
        self._remotes: dict[str, _RemoteEntry] = {}
        self._order: list[str] = ["Classical", "NoOp"]

    def tags(self) -> list[str]:
        """All registered tags in registration order."""
        return list(self._order)

    def __contains__(self, tag: str) -> bool:
        return tag in self._order

    def _claim(self, tag: str) -> None:
        if tag in self._order:
            raise DuplicateOperatorError(f"operator {tag!r} already registered")
        self._order.append(tag)

    def register_mock(self, name: str, behavior: str, sigma: float = 0.0) -> None:
        spec = MockSpec(behavior=behavior, sigma=sigma)
        self._claim(name)
        self._mocks[name] = spec

    def register_remote(
        self,
        tags: list[str] | tuple[str, ...],
        client: WorkerClient,
        require_capabilities: bool = True,
    ) -> None:
        """Bind engine tags to worker capabilities (matched case-insensitively).

        Refuses tags the worker does not advertise.
        """
        if require_capabilities:
            advertised = {c.lower() for c in client.capabilities()[0]}
            missing = [t for t in tags if t.lower() not in advertised]
            if missing:
                raise ConfigError(
                    f"worker does not advertise {missing} (capabilities: {sorted(advertised)})"
                )
        for tag in tags:
            self._claim(tag)
            self._remotes[tag] = _RemoteEntry(client=client, wire_op=tag.lower())

    def apply(self, tag: str, img: RasterImage, rng: np.random.Generator) -> RasterImage:
        """Apply one operator; deterministic for native/mock tags given the rng."""
        if tag == "NoOp":
            return img
        if tag == "Classical":
            return apply_transform(img, sample_classical_spec(rng, self.classical_config))
        if tag in self._mocks:
            return self._apply_mock(self._mocks[tag], img, rng)
        if tag in self._remotes:
            return self._apply_remote(tag, self._remotes[tag], img, rng)
        raise UnknownOperatorError(f"operator {tag!r} is not registered")

    def _apply_mock(
        self, spec: MockSpec, img: RasterImage, rng: np.random.Generator
    ) -> RasterImage:
        if spec.behavior == "identity":
            return img
        if spec.behavior == "invert":
            return invert_image(img)
        if spec.behavior == "channel_shuffle":
            perm = tuple(int(i) for i in rng.permutation(img.channels))
            return shuffle_channels(img, perm)
        return add_gaussian_noise(img, spec.sigma, rng)

    def _apply_remote(
        self, tag: str, entry: _RemoteEntry, img: RasterImage, rng: np.random.Generator
    ) -> RasterImage:
        seed = int(rng.integers(0, 2**64, dtype=np.uint64))
        params: dict = {}
        if entry.wire_op == "nerf":
            rotations = entry.client.cfg.nerf_rotations
            params["rotation"] = float(rotations[rng.integers(len(rotations))])
        attempts = entry.client.cfg.max_retries + 1
        last: Exception | None = None
        for attempt in range(attempts):
            if attempt > 0:
                time.sleep(entry.client.cfg.backoff_base * (2 ** (attempt - 1)))
            try:
                return entry.client.augment(entry.wire_op, img, seed=seed, params=params)
            except (WorkerUnreachableError, ProtocolError) as exc:
                last = exc
        raise OperatorError(tag, f"worker failed after {attempts} attempt(s): {last}")
