"""End-to-end: the search engine's CLI drives this worker over the protocol.

Requires the engine package; skipped when it is not installed.
"""

import shlex
import sys

import pytest

evoaug = pytest.importorskip("evoaug")

from evoaug.cli import main  # noqa: E402
from evoaug.dataset import load_dataset  # noqa: E402
from evoaug.raster import load_image, save_image  # noqa: E402
from evoaug.synth import blob_dataset  # noqa: E402
from evoaug.worker_client import RemoteOperatorConfig, probe_worker  # noqa: E402

WORKER_CMD = f"{shlex.quote(sys.executable)} -m genworker --mode fake"


def write_dataset(tmp_path):
    root = tmp_path / "data"
    ds = blob_dataset(classes=3, shots=1, size=10, seed=5)
    for item in ds.items:
        cls_dir = root / ds.class_names[item.label]
        cls_dir.mkdir(parents=True, exist_ok=True)
        save_image(item.load(), cls_dir / f"{item.id}.png")
    return root


def test_probe_sees_fake_capabilities():
    tags, mode = probe_worker(RemoteOperatorConfig.from_endpoint(WORKER_CMD, timeout=30.0))
    assert {"canny", "segment", "depth", "color", "nerf"} <= set(tags)
    assert mode == "fake"


def test_cli_apply_with_worker(tmp_path):
    root = write_dataset(tmp_path)
    tree = tmp_path / "tree.txt"
    tree.write_text("(Color, 0.5, NeRF, 0.5, None)\n")
    out = tmp_path / "aug"
    status = main(
        [
            "apply",
            str(tree),
            "--dataset",
            str(root),
            "--multiplier",
            "2",
            "--out",
            str(out),
            "--worker",
            WORKER_CMD,
        ]
    )
    assert status == 0
    originals = load_dataset(root)
    manifest = load_dataset(out / "manifest.jsonl")
    assert len(manifest.items) == 2 * len(originals.items)
    source_dims = {(i.load().width, i.load().height) for i in originals.items}
    for item in manifest.items:
        img = load_image(item.path)
        assert (img.width, img.height) in source_dims


def test_cli_apply_deterministic_with_worker(tmp_path):
    root = write_dataset(tmp_path)
    tree = tmp_path / "tree.txt"
    tree.write_text("(Color, 0.7, Depth, 0.3, Segment)\n")
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        status = main(
            [
                "apply",
                str(tree),
                "--dataset",
                str(root),
                "--multiplier",
                "1",
                "--out",
                str(out),
                "--seed",
                "9",
                "--worker",
                WORKER_CMD,
            ]
        )
        assert status == 0
        outs.append(sorted(p.read_bytes() for p in out.glob("*.png")))
    assert outs[0] == outs[1]
