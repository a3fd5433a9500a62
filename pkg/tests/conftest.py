import numpy as np
import pytest

from evoaug.operators import OperatorRegistry
from evoaug.raster import ClassicalAugConfig, RasterImage
from evoaug.synth import blob_dataset


@pytest.fixture(autouse=True)
def no_ambient_worker(monkeypatch):
    monkeypatch.delenv("EVOAUG_WORKER", raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_image(rng):
    return RasterImage.from_array(rng.integers(0, 256, (6, 7, 3)).astype(np.uint8))


@pytest.fixture
def gray_image(rng):
    return RasterImage.from_array(rng.integers(0, 256, (5, 4, 1)).astype(np.uint8))


def make_mock_registry(noise_sigma: float = 40.0) -> OperatorRegistry:
    """Classical + NoOp + one label-preserving and one class-destroying mock."""
    registry = OperatorRegistry(classical_config=ClassicalAugConfig())
    registry.register_mock("gaussian_noise", "gaussian_noise", sigma=noise_sigma)
    registry.register_mock("channel_shuffle", "channel_shuffle")
    return registry


@pytest.fixture
def mock_registry():
    return make_mock_registry()


@pytest.fixture
def blobs_1shot():
    return blob_dataset(classes=5, shots=1, size=16, noise_sigma=8.0, seed=0)


@pytest.fixture
def blobs_4shot():
    return blob_dataset(classes=5, shots=4, size=16, noise_sigma=8.0, seed=0)
