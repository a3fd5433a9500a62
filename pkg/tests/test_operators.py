import json
import sys
import threading
from pathlib import Path

import numpy as np
import pytest

from evoaug.errors import (
    ConfigError,
    DuplicateOperatorError,
    OperatorError,
    ProtocolError,
    UnknownOperatorError,
    WorkerUnreachableError,
)
from evoaug.operators import OperatorRegistry, invert_image, shuffle_channels
from evoaug.raster import RasterImage
from evoaug.worker_client import RemoteOperatorConfig, WorkerClient, probe_worker

STUB = str(Path(__file__).parent / "stub_worker.py")


def stub_config(*flags: str, **overrides) -> RemoteOperatorConfig:
    defaults = dict(timeout=10.0, max_retries=0, backoff_base=0.0)
    defaults.update(overrides)
    return RemoteOperatorConfig(
        transport="subprocess",
        command=(sys.executable, STUB, *flags),
        **defaults,
    )


class TestNativeAndMockOps:
    def test_noop_identity(self, small_image):
        registry = OperatorRegistry()
        out = registry.apply("NoOp", small_image, np.random.default_rng(0))
        assert out.data == small_image.data

    def test_classical_is_deterministic(self, small_image):
        registry = OperatorRegistry()
        a = registry.apply("Classical", small_image, np.random.default_rng(4))
        b = registry.apply("Classical", small_image, np.random.default_rng(4))
        assert a.data == b.data

    def test_invert_oracle(self, small_image):
        out = invert_image(small_image)
        assert np.array_equal(out.to_array(), 255 - small_image.to_array())

    def test_channel_shuffle_permutation(self):
        img = RasterImage(width=1, height=1, channels=3, data=bytes([10, 20, 30]))
        out = shuffle_channels(img, (2, 0, 1))
        assert list(out.data) == [30, 10, 20]

    def test_identity_mock_matches_noop(self, small_image):
        registry = OperatorRegistry()
        registry.register_mock("noop2", "identity")
        rng = np.random.default_rng(0)
        assert registry.apply("noop2", small_image, rng).data == small_image.data

    def test_gaussian_sigma_zero_is_identity(self, small_image):
        registry = OperatorRegistry()
        registry.register_mock("noise", "gaussian_noise", sigma=0.0)
        out = registry.apply("noise", small_image, np.random.default_rng(1))
        assert out.data == small_image.data

    def test_gaussian_noise_deterministic_and_clamped(self, small_image):
        registry = OperatorRegistry()
        registry.register_mock("noise", "gaussian_noise", sigma=80.0)
        a = registry.apply("noise", small_image, np.random.default_rng(2))
        b = registry.apply("noise", small_image, np.random.default_rng(2))
        assert a.data == b.data
        assert a.data != small_image.data

    def test_input_never_mutated(self, small_image):
        registry = OperatorRegistry()
        registry.register_mock("invert", "invert")
        before = bytes(small_image.data)
        registry.apply("invert", small_image, np.random.default_rng(0))
        assert small_image.data == before

    def test_duplicate_registration(self):
        registry = OperatorRegistry()
        registry.register_mock("x", "identity")
        with pytest.raises(DuplicateOperatorError):
            registry.register_mock("x", "invert")
        with pytest.raises(DuplicateOperatorError):
            registry.register_mock("Classical", "identity")

    def test_unknown_operator(self, small_image):
        registry = OperatorRegistry()
        with pytest.raises(UnknownOperatorError):
            registry.apply("Zap", small_image, np.random.default_rng(0))

    def test_unknown_behavior(self):
        registry = OperatorRegistry()
        with pytest.raises(ConfigError):
            registry.register_mock("weird", "sepia")

    def test_tags_order(self):
        registry = OperatorRegistry()
        registry.register_mock("a", "identity")
        registry.register_mock("b", "invert")
        assert registry.tags() == ["Classical", "NoOp", "a", "b"]


class TestWorkerProtocol:
    def test_probe_capabilities(self):
        tags, mode = probe_worker(stub_config())
        assert {"canny", "segment", "depth", "color", "nerf"} <= set(tags)
        assert mode == "fake"

    def test_dead_endpoint_unreachable(self):
        cfg = RemoteOperatorConfig(
            transport="tcp", address=("127.0.0.1", 9), timeout=0.5, max_retries=0
        )
        with pytest.raises(WorkerUnreachableError):
            probe_worker(cfg)

    def test_immediate_exit_unreachable(self):
        cfg = RemoteOperatorConfig(
            transport="subprocess",
            command=(sys.executable, "-c", "pass"),
            timeout=5.0,
        )
        with pytest.raises(WorkerUnreachableError):
            probe_worker(cfg)

    def test_malformed_response(self):
        with pytest.raises(ProtocolError):
            probe_worker(stub_config("--malformed"))

    def test_timeout(self):
        with pytest.raises(WorkerUnreachableError, match="no response"):
            probe_worker(stub_config("--silent", timeout=0.4))

    def test_augment_round_trip(self, small_image):
        with WorkerClient(stub_config()) as client:
            out = client.augment("canny", small_image, seed=7)
        assert out.data == small_image.data

    def test_embed_request(self, small_image):
        with WorkerClient(stub_config()) as client:
            vec = client.embed(small_image)
        assert len(vec) == 3

    def test_out_of_order_responses(self, small_image):
        with WorkerClient(stub_config("--pair-reverse")) as client:
            results = {}

            def call(name):
                results[name] = client.augment("canny", small_image, seed=0)

            threads = [threading.Thread(target=call, args=(f"t{i}",)) for i in range(2)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        assert all(r.data == small_image.data for r in results.values())


class TestRemoteOperators:
    def test_register_and_apply(self, small_image):
        with WorkerClient(stub_config()) as client:
            registry = OperatorRegistry()
            registry.register_remote(["Canny", "NeRF"], client)
            out = registry.apply("Canny", small_image, np.random.default_rng(0))
            assert out.data == small_image.data

    def test_register_refuses_unadvertised(self):
        with WorkerClient(stub_config()) as client:
            registry = OperatorRegistry()
            with pytest.raises(ConfigError, match="does not advertise"):
                registry.register_remote(["Canny", "Sparkle"], client)

    def test_nerf_rotation_domain(self, small_image, tmp_path):
        record = tmp_path / "requests.jsonl"
        with WorkerClient(stub_config("--record", str(record))) as client:
            registry = OperatorRegistry()
            registry.register_remote(["NeRF"], client)
            for seed in range(20):
                out = registry.apply("NeRF", small_image, np.random.default_rng(seed))
                assert out.data == small_image.data
        rotations = set()
        for line in record.read_text().splitlines():
            req = json.loads(line)
            if req.get("kind") != "augment":
                continue
            assert req["operator"] == "nerf"
            assert 0 <= req["seed"] < 2**64
            rotations.add(req["params"]["rotation"])
        assert rotations == {-15.0, 15.0}

    def test_retry_then_success(self, small_image):
        with WorkerClient(stub_config("--fail-first", "1", max_retries=1)) as client:
            registry = OperatorRegistry()
            registry.register_remote(["Canny"], client)
            out = registry.apply("Canny", small_image, np.random.default_rng(0))
            assert out.data == small_image.data

    def test_failure_after_retries_keeps_registry_usable(self, small_image):
        with WorkerClient(stub_config("--fail-first", "99")) as client:
            registry = OperatorRegistry()
            registry.register_remote(["Canny"], client)
            with pytest.raises(OperatorError) as info:
                registry.apply("Canny", small_image, np.random.default_rng(0))
            assert info.value.op == "Canny"
            # native operators still work, and the remote keeps failing cleanly
            assert registry.apply("NoOp", small_image, np.random.default_rng(0)).data
            with pytest.raises(OperatorError):
                registry.apply("Canny", small_image, np.random.default_rng(1))
