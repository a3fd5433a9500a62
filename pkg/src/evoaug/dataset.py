"""Labeled-image datasets: ingestion, stratified folds, and few-shot draws.

A dataset is immutable after load.  Items may carry their image in memory or
a lazy path that is decoded once on first access (guarded by a lock, so many
workers can share one dataset).
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    EmptyClassError,
    IoError,
    ManifestError,
    TooFewClassesError,
    TooFewItemsError,
)
from .raster import RasterImage, load_image

IMAGE_SUFFIXES = (".png", ".ppm")


@dataclass
class DatasetItem:
    id: str
    label: int
    image: RasterImage | None = None
    path: Path | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def load(self) -> RasterImage:
        if self.image is None:
            with self._lock:
                if self.image is None:
                    if self.path is None:
                        raise IoError(f"item {self.id!r} has neither image nor path")
                    self.image = load_image(self.path)
        return self.image


@dataclass
class LabeledDataset:
    items: list[DatasetItem]
    class_names: list[str]

    def __post_init__(self):
        seen: set[str] = set()
        counts = [0] * len(self.class_names)
        for item in self.items:
            if item.id in seen:
                raise ValueError(f"duplicate item id {item.id!r}")
            seen.add(item.id)
            if not 0 <= item.label < len(self.class_names):
                raise ValueError(f"item {item.id!r} has label {item.label} out of range")
            counts[item.label] += 1
        for label, count in enumerate(counts):
            if count == 0:
                raise EmptyClassError(f"class {self.class_names[label]!r} has no items")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def items_by_class(self) -> dict[int, list[DatasetItem]]:
        by_class: dict[int, list[DatasetItem]] = {c: [] for c in range(self.num_classes)}
        for item in self.items:
            by_class[item.label].append(item)
        return by_class

    def min_class_count(self) -> int:
        return min(len(v) for v in self.items_by_class().values())


@dataclass(frozen=True)
class FoldPlan:
    """Stratified assignment of item ids to folds."""

    k: int
    assignment: dict[str, int]

    def fold_ids(self, fold: int) -> list[str]:
        return [i for i, f in self.assignment.items() if f == fold]

    def split(self, dataset: LabeledDataset, fold: int) -> tuple[list[DatasetItem], list[DatasetItem]]:
        """(train items, validation items) for one fold index."""
        train, val = [], []
        for item in dataset.items:
            (val if self.assignment[item.id] == fold else train).append(item)
        return train, val


def load_dataset(source: str | Path) -> LabeledDataset:
    """Load from a JSONL manifest file or a class-per-directory tree."""
    source = Path(source)
    if source.is_dir():
        return _load_directory(source)
    if source.is_file():
        return _load_manifest(source)
    raise IoError(f"dataset source {source} does not exist")


def _load_directory(root: Path) -> LabeledDataset:
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise EmptyClassError(f"{root}: no class directories found")
    class_names = [p.name for p in class_dirs]
    items: list[DatasetItem] = []
    for label, class_dir in enumerate(class_dirs):
        paths = sorted(
            p for p in class_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
        )
        if not paths:
            raise EmptyClassError(f"class directory {class_dir} holds no images")
        for p in paths:
            items.append(DatasetItem(id=f"{class_dir.name}/{p.stem}", label=label, path=p))
    return LabeledDataset(items=items, class_names=class_names)


def _load_manifest(path: Path) -> LabeledDataset:
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read manifest {path}: {exc}") from exc
    records: list[tuple[str, Path, object]] = []
    ids: set[str] = set()
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(number, f"invalid JSON: {exc}") from exc
        if not isinstance(obj, dict) or not {"id", "path", "label"} <= obj.keys():
            raise ManifestError(number, "needs fields id, path, label")
        item_id = str(obj["id"])
        if item_id in ids:
            raise ManifestError(number, f"duplicate id {item_id!r}")
        ids.add(item_id)
        label = obj["label"]
        if not isinstance(label, (int, str)) or isinstance(label, bool):
            raise ManifestError(number, "label must be an integer index or a class name")
        records.append((item_id, path.parent / obj["path"], label))
    if not records:
        raise ManifestError(0, "manifest holds no items")

    labels = [r[2] for r in records]
    if all(isinstance(lbl, str) for lbl in labels):
        class_names = sorted(set(labels))
        index = {name: i for i, name in enumerate(class_names)}
        items = [DatasetItem(id=i, label=index[lbl], path=p) for i, p, lbl in records]
    elif all(isinstance(lbl, int) for lbl in labels):
        class_names = [str(c) for c in range(max(labels) + 1)]
        items = [DatasetItem(id=i, label=lbl, path=p) for i, p, lbl in records]
    else:
        raise ManifestError(0, "labels mix integer indices and class names")
    return LabeledDataset(items=items, class_names=class_names)


def stratified_folds(dataset: LabeledDataset, k: int, rng: np.random.Generator) -> FoldPlan:
    """Assign items to k folds with per-class counts differing by at most 1."""
    if k < 2:
        raise ConfigError("k must be >= 2: a single fold would validate on the whole dataset")
    assignment: dict[str, int] = {}
    for label, members in dataset.items_by_class().items():
        if len(members) < k:
            raise TooFewItemsError(
                f"class {dataset.class_names[label]!r} has {len(members)} items, needs >= {k}"
            )
        order = rng.permutation(len(members))
        offset = label % k  # rotate remainders so fold sizes stay balanced
        for j, idx in enumerate(order):
            assignment[members[idx].id] = (j + offset) % k
    return FoldPlan(k=k, assignment=assignment)


def sample_fewshot(
    dataset: LabeledDataset, n_way: int, k_shot: int, rng: np.random.Generator
) -> LabeledDataset:
    """Draw n_way classes with k_shot items each, relabeled 0..n_way-1."""
    if n_way < 1 or k_shot < 1:
        raise ConfigError("n_way and k_shot must be positive")
    by_class = dataset.items_by_class()
    eligible = sorted(c for c, members in by_class.items() if len(members) >= k_shot)
    if len(eligible) < n_way:
        if dataset.num_classes < n_way:
            raise TooFewClassesError(
                f"dataset has {dataset.num_classes} classes, needs >= {n_way}"
            )
        raise TooFewItemsError(
            f"only {len(eligible)} classes hold >= {k_shot} items, needs {n_way}"
        )
    chosen = sorted(rng.choice(eligible, size=n_way, replace=False).tolist())
    items: list[DatasetItem] = []
    for new_label, old_label in enumerate(chosen):
        members = by_class[old_label]
        picks = rng.permutation(len(members))[:k_shot]
        for idx in sorted(int(i) for i in picks):
            src = members[idx]
            items.append(
                DatasetItem(id=src.id, label=new_label, image=src.image, path=src.path)
            )
    return LabeledDataset(items=items, class_names=[dataset.class_names[c] for c in chosen])


def hardest_subset(
    dataset: LabeledDataset,
    n_way: int,
    k_shot: int,
    trials: int,
    baseline,
    rng: np.random.Generator,
) -> LabeledDataset:
    """Repeatedly draw few-shot subsets and keep the one the baseline finds hardest.

    The baseline classifier trains on each candidate subset and is scored on
    the held-out items of the same classes; the subset with the lowest
    held-out accuracy wins (first occurrence on ties).
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    best: LabeledDataset | None = None
    best_acc = float("inf")
    for _ in range(trials):
        subset = sample_fewshot(dataset, n_way, k_shot, rng)
        if trials == 1:
            return subset
        acc = _heldout_accuracy(dataset, subset, baseline)
        if acc < best_acc:
            best, best_acc = subset, acc
    assert best is not None
    return best


def _heldout_accuracy(dataset: LabeledDataset, subset: LabeledDataset, baseline) -> float:
    # Local imports: fitness and embedding sit above this module in the layering.
    from .embedding import embed_items
    from .fitness import eval_head, train_head

    name_to_new = {name: lbl for lbl, name in enumerate(subset.class_names)}
    subset_ids = {item.id for item in subset.items}
    held_out = [
        item
        for item in dataset.items
        if dataset.class_names[item.label] in name_to_new and item.id not in subset_ids
    ]
    if not held_out:
        raise TooFewItemsError(
            "hardest_subset needs held-out items: every drawn class is exhausted by the subset"
        )
    train_m = embed_items(baseline.provider, [(i.id, i.load()) for i in subset.items])
    train_y = np.array([i.label for i in subset.items])
    head = train_head(train_m.rows, train_y, subset.num_classes, baseline.classifier)
    val_m = embed_items(baseline.provider, [(i.id, i.load()) for i in held_out])
    val_y = np.array([name_to_new[dataset.class_names[i.label]] for i in held_out])
    return eval_head(head, val_m.rows, val_y).accuracy
