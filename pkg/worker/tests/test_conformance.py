"""Protocol conformance: a 50-request session against the fake-mode worker.

Covers the capabilities handshake, augment round-trips that preserve image
dimensions, deterministic repeats, malformed-request resilience, and the NeRF
rotation domain, all over the real stdio transport.
"""

import base64
import json
import socket
import subprocess
import sys
import time

import numpy as np
import pytest

from genworker import png
from genworker.service import CAPABILITIES


class StdioDriver:
    def __init__(self, extra_args=()):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "genworker", "--mode", "fake", *extra_args],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )
        self.sent = 0
        self.counter = 0

    def send_raw(self, line: str) -> dict:
        self.proc.stdin.write((line + "\n").encode("utf-8"))
        self.proc.stdin.flush()
        self.sent += 1
        raw = self.proc.stdout.readline()
        assert raw, "worker closed the stream"
        return json.loads(raw)

    def send(self, **payload) -> dict:
        self.counter += 1
        payload.setdefault("id", f"r{self.counter}")
        return self.send_raw(json.dumps(payload))

    def close(self):
        self.proc.stdin.close()
        self.proc.wait(timeout=10)


@pytest.fixture
def driver():
    d = StdioDriver()
    yield d
    d.close()


def image_payload(shape, seed):
    arr = np.random.default_rng(seed).integers(0, 256, shape).astype(np.uint8)
    return base64.b64encode(png.encode(arr)).decode("ascii"), arr


def test_fifty_request_conformance(driver):
    # 1. capabilities handshake
    resp = driver.send(kind="capabilities")
    assert resp["ok"] and resp["mode"] == "fake"
    assert {"canny", "segment", "depth", "color", "nerf"} <= set(resp["capabilities"])

    # 2. augment round-trips preserve dimensions for every operator and
    #    several image shapes, including grayscale
    shapes = [(8, 8, 3), (5, 9, 3), (7, 4, 1)]
    operators = [c for c in CAPABILITIES if c != "embed"]
    for op in operators:
        for shape_index, shape in enumerate(shapes):
            payload, arr = image_payload(shape, seed=shape_index)
            params = {"rotation": -15} if op == "nerf" else {}
            resp = driver.send(
                kind="augment", operator=op, image_png_b64=payload, seed=41, params=params
            )
            assert resp["ok"], (op, shape, resp)
            out = png.decode(base64.b64decode(resp["image_png_b64"]))
            assert out.shape[:2] == arr.shape[:2]

    # 3. deterministic repeat: same (image, operator, seed) -> same PNG bytes
    payload, _ = image_payload((10, 10, 3), seed=5)
    for op in operators:
        params = {"rotation": 15} if op == "nerf" else {}
        first = driver.send(
            kind="augment", operator=op, image_png_b64=payload, seed=99, params=params
        )
        second = driver.send(
            kind="augment", operator=op, image_png_b64=payload, seed=99, params=params
        )
        assert first["ok"] and second["ok"]
        assert first["image_png_b64"] == second["image_png_b64"]

    # 4. malformed requests never poison the connection
    for garbage in ("not json at all", '{"id": 7, "kind": []}', '{"kind": "augment"}'):
        resp = driver.send_raw(garbage)
        assert resp["ok"] is False
    follow_up = driver.send(kind="capabilities")
    assert follow_up["ok"]

    # 5. NeRF rotation domain: only -15 and +15 are accepted
    payload, _ = image_payload((6, 6, 3), seed=8)
    for rotation, expected in ((-15, True), (15, True), (7, False), (0, False)):
        resp = driver.send(
            kind="augment",
            operator="nerf",
            image_png_b64=payload,
            seed=1,
            params={"rotation": rotation},
        )
        assert resp["ok"] is expected, (rotation, resp)
    resp = driver.send(kind="augment", operator="nerf", image_png_b64=payload, seed=1)
    assert not resp["ok"]

    # 6. embed: fixed-dimension, content-deterministic vectors
    first = driver.send(kind="embed", image_png_b64=payload)
    second = driver.send(kind="embed", image_png_b64=payload)
    assert first["ok"] and first["embedding"] == second["embedding"]

    # 7. different seeds produce different augmentations (variety probe)
    payload, _ = image_payload((9, 9, 3), seed=12)
    for op in operators:
        params = {"rotation": -15} if op == "nerf" else {}
        outs = set()
        for seed in (1, 2):
            resp = driver.send(
                kind="augment", operator=op, image_png_b64=payload, seed=seed, params=params
            )
            assert resp["ok"]
            outs.add(resp["image_png_b64"])
        if op != "nerf":  # nerf output depends only on the rotation parameter
            assert len(outs) == 2, f"{op} ignored the seed"

    assert driver.sent >= 50, f"conformance session only sent {driver.sent} requests"


def test_tcp_transport_round_trip():
    port = 29173
    proc = subprocess.Popen(
        [sys.executable, "-m", "genworker", "--mode", "fake", "--tcp", str(port)],
        stderr=subprocess.PIPE,
    )
    try:
        deadline = time.monotonic() + 10
        sock = None
        while time.monotonic() < deadline:
            try:
                sock = socket.create_connection(("127.0.0.1", port), timeout=1)
                break
            except OSError:
                time.sleep(0.05)
        assert sock is not None, "could not connect to TCP worker"
        with sock:
            reader = sock.makefile("rb")
            writer = sock.makefile("wb")
            payload, arr = image_payload((6, 7, 3), seed=1)
            for i in range(3):
                req = {
                    "id": f"t{i}",
                    "kind": "augment",
                    "operator": "segment",
                    "image_png_b64": payload,
                    "seed": 4,
                }
                writer.write((json.dumps(req) + "\n").encode())
                writer.flush()
                resp = json.loads(reader.readline())
                assert resp["ok"] and resp["id"] == f"t{i}"
                out = png.decode(base64.b64decode(resp["image_png_b64"]))
                assert out.shape == arr.shape
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def test_real_mode_degrades_with_warning():
    proc = subprocess.Popen(
        [sys.executable, "-m", "genworker", "--mode", "real"],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
    )
    try:
        proc.stdin.write(b'{"id": "m", "kind": "capabilities"}\n')
        proc.stdin.flush()
        resp = json.loads(proc.stdout.readline())
        assert resp["ok"] and resp["mode"] == "fake"
    finally:
        proc.stdin.close()
        proc.wait(timeout=10)
        err = proc.stderr.read()
        proc.stderr.close()
        proc.stdout.close()
    assert b"fake mode" in err
