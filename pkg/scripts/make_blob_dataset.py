#!/usr/bin/env python3
"""Write a synthetic color-blob dataset to disk as PNGs plus a JSONL manifest.

Example:
    python scripts/make_blob_dataset.py --out data/blobs --classes 5 --shots 4
"""

import argparse
import json
from pathlib import Path

from evoaug.raster import save_image
from evoaug.synth import blob_dataset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, type=Path)
    parser.add_argument("--classes", type=int, default=5)
    parser.add_argument("--shots", type=int, default=4)
    parser.add_argument("--size", type=int, default=16)
    parser.add_argument("--noise-sigma", type=float, default=8.0)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    dataset = blob_dataset(
        classes=args.classes,
        shots=args.shots,
        size=args.size,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    rows = []
    for item in dataset.items:
        name = f"{item.id}.png"
        save_image(item.load(), args.out / name)
        rows.append(
            {"id": item.id, "path": name, "label": dataset.class_names[item.label]}
        )
    manifest = args.out / "manifest.jsonl"
    manifest.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    print(f"wrote {len(rows)} images and {manifest}")


if __name__ == "__main__":
    main()
