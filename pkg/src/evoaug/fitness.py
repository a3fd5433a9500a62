"""Fitness functions for augmentation trees, plus the metrics they ride on.

Four scoring strategies, all "higher is better":

  kfold_fitness      mean negative validation loss over stratified folds
  clustering_fitness silhouette minus a radius penalty on class-label clusters
  double_aug_fitness k-fold fitness on a classically expanded one-shot dataset
  trainloss_fitness  negative training loss after a fixed number of epochs

The classifier is a softmax head over embeddings trained by full-batch
gradient descent: small enough to gradient-check, structured like the real
thing (train on augmented data, score on held-out data).

Every fitness value is a pure function of (tree, context): all randomness is
derived from the context seed and the tree's canonical text, so evaluations
of distinct trees can run in parallel and caches stay coherent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .augtree import AugmentationTree, apply_tree, serialize_tree
from .dataset import DatasetItem, LabeledDataset, stratified_folds
from .embedding import ProviderSpec, embed_items
from .errors import (
    CoincidentCentroidsError,
    ConfigError,
    DimensionMismatchError,
    SingleClusterError,
)
from .operators import OperatorRegistry
from .raster import apply_transform, sample_classical_spec
from .rng import derive_rng


@dataclass(frozen=True)
class ClassifierConfig:
    epochs: int = 20
    learning_rate: float = 1e-3
    l2: float = 0.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")


@dataclass(frozen=True)
class ClusterWeights:
    """Weights (w_S, w_d) in the score w_S*S - w_d/d."""

    silhouette: float = 1.0
    radius_penalty: float = 1.0

    def __post_init__(self):
        if self.silhouette < 0 or self.radius_penalty < 0:
            raise ConfigError("cluster weights must be >= 0")
        if self.silhouette == 0 and self.radius_penalty == 0:
            raise ConfigError("cluster weights must not both be zero")


CLUSTER_METRICS = ("silhouette_radius", "inverse_davies_bouldin")


@dataclass
class FitnessContext:
    """Everything a fitness function needs besides the tree itself."""

    dataset: LabeledDataset
    registry: OperatorRegistry
    provider: ProviderSpec
    folds: int | None = None  # default: min per-class count (leave-one-shot-out)
    augment_multiplier: int = 2
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    cluster_weights: ClusterWeights = field(default_factory=ClusterWeights)
    cluster_metric: str = "silhouette_radius"
    seed: int = 0

    def __post_init__(self):
        if self.augment_multiplier < 1:
            raise ConfigError("augment_multiplier must be >= 1")
        if self.cluster_metric not in CLUSTER_METRICS:
            raise ConfigError(f"cluster_metric must be one of {CLUSTER_METRICS}")

    def effective_folds(self) -> int:
        return self.folds if self.folds is not None else self.dataset.min_class_count()


@dataclass(frozen=True)
class SoftmaxHead:
    weights: np.ndarray  # (num_classes, dim)
    bias: np.ndarray  # (num_classes,)


@dataclass(frozen=True)
class EvalResult:
    loss: float
    accuracy: float


@dataclass(frozen=True)
class FitnessReport:
    score: float
    per_fold: tuple[float, ...]
    diagnostics: dict

    def to_json(self) -> str:
        return json.dumps(
            {"score": self.score, "per_fold": list(self.per_fold), "diagnostics": self.diagnostics},
            indent=2,
        )


# ---------------------------------------------------------------------------
# Softmax head
# ---------------------------------------------------------------------------


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_and_gradients(
    weights: np.ndarray,
    bias: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Cross-entropy + (l2/2)*||W||^2 and its exact gradients."""
    n = features.shape[0]
    logits = features @ weights.T + bias
    log_p = _log_softmax(logits)
    loss = -log_p[np.arange(n), labels].mean() + 0.5 * l2 * float((weights**2).sum())
    probs = np.exp(log_p)
    probs[np.arange(n), labels] -= 1.0
    probs /= n
    grad_w = probs.T @ features + l2 * weights
    grad_b = probs.sum(axis=0)
    return float(loss), grad_w, grad_b


def train_head(
    features: np.ndarray,
    labels: np.ndarray,
    num_classes: int,
    cfg: ClassifierConfig,
) -> SoftmaxHead:
    """Multinomial logistic regression by full-batch gradient descent.

    Zero initialization and a fixed update rule make training deterministic;
    zero epochs returns the zero head (uniform predictions).
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2 or features.shape[0] != labels.shape[0]:
        raise DimensionMismatchError(
            f"features {features.shape} do not match {labels.shape[0]} labels"
        )
    weights = np.zeros((num_classes, features.shape[1]))
    bias = np.zeros(num_classes)
    for _ in range(cfg.epochs):
        _, grad_w, grad_b = loss_and_gradients(weights, bias, features, labels, cfg.l2)
        weights = weights - cfg.learning_rate * grad_w
        bias = bias - cfg.learning_rate * grad_b
    return SoftmaxHead(weights=weights, bias=bias)


def eval_head(head: SoftmaxHead, features: np.ndarray, labels: np.ndarray) -> EvalResult:
    """Mean cross-entropy and argmax accuracy (argmax ties go to the lowest class)."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.shape[1] != head.weights.shape[1]:
        raise DimensionMismatchError(
            f"features dim {features.shape[1]} != head dim {head.weights.shape[1]}"
        )
    logits = features @ head.weights.T + head.bias
    log_p = _log_softmax(logits)
    loss = -log_p[np.arange(features.shape[0]), labels].mean()
    accuracy = float((logits.argmax(axis=1) == labels).mean())
    return EvalResult(loss=float(loss), accuracy=accuracy)


# ---------------------------------------------------------------------------
# Clustering metrics
# ---------------------------------------------------------------------------


def _pairwise_distances(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def silhouette(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette coefficient with Euclidean distances.

    Conventions: singleton clusters score 0; s = 1 when a = 0 < b; s = 0 when
    a = b = 0 (handled by the max(a, b) = 0 guard).
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    unique = np.unique(labels)
    if unique.shape[0] < 2:
        raise SingleClusterError("silhouette needs at least two clusters")
    dist = _pairwise_distances(points)
    scores = np.zeros(points.shape[0])
    masks = {c: labels == c for c in unique}
    for i in range(points.shape[0]):
        own = masks[labels[i]]
        own_size = own.sum()
        if own_size == 1:
            scores[i] = 0.0
            continue
        a = dist[i, own].sum() / (own_size - 1)  # excludes the zero self-distance
        b = min(dist[i, masks[c]].mean() for c in unique if c != labels[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())


def _cluster_spread(members: np.ndarray) -> float:
    """Mean member-to-centroid distance; exactly 0 for coincident members.

    The explicit guard matters because the float mean of identical vectors
    can differ from them in the last ulp, and downstream rules key on d == 0.
    """
    if np.all(members == members[0]):
        return 0.0
    centroid = members.mean(axis=0)
    return float(np.sqrt(((members - centroid) ** 2).sum(axis=1)).mean())


def mean_cluster_radius(points: np.ndarray, labels: np.ndarray) -> float:
    """Unweighted mean over clusters of the mean member-to-centroid distance."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    radii = [_cluster_spread(points[labels == c]) for c in np.unique(labels)]
    return float(np.mean(radii))


def davies_bouldin(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean over clusters of the worst (sigma_i + sigma_j) / dist(c_i, c_j)."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    unique = np.unique(labels)
    if unique.shape[0] < 2:
        raise SingleClusterError("davies_bouldin needs at least two clusters")
    centroids = np.stack([points[labels == c].mean(axis=0) for c in unique])
    sigmas = np.array([_cluster_spread(points[labels == c]) for c in unique])
    sep = _pairwise_distances(centroids)
    if np.any(sep[~np.eye(len(unique), dtype=bool)] == 0.0):
        raise CoincidentCentroidsError("two cluster centroids coincide")
    worst = []
    for i in range(len(unique)):
        ratios = [
            (sigmas[i] + sigmas[j]) / sep[i, j] for j in range(len(unique)) if j != i
        ]
        worst.append(max(ratios))
    return float(np.mean(worst))


# ---------------------------------------------------------------------------
# Augmentation plumbing shared by the fitness functions
# ---------------------------------------------------------------------------


def tree_key(tree: AugmentationTree) -> str:
    """Canonical text form; the cache key and RNG label for a genome."""
    return serialize_tree(tree, "text")


def _augmented_pairs(
    tree: AugmentationTree,
    items: list[DatasetItem],
    ctx: FitnessContext,
    stream: str,
) -> tuple[list[tuple[str, object]], np.ndarray]:
    """Originals plus augment_multiplier tree-augmented copies of each item."""
    key = tree_key(tree)
    pairs: list[tuple[str, object]] = [(item.id, item.load()) for item in items]
    labels = [item.label for item in items]
    for item in items:
        for copy in range(ctx.augment_multiplier):
            rng = derive_rng(ctx.seed, stream, key, item.id, copy)
            pairs.append((f"{item.id}#aug{copy}", apply_tree(tree, item.load(), ctx.registry, rng)))
            labels.append(item.label)
    return pairs, np.array(labels)


# ---------------------------------------------------------------------------
# Fitness functions
# ---------------------------------------------------------------------------


def kfold_fitness(tree: AugmentationTree, ctx: FitnessContext) -> FitnessReport:
    """Mean negative validation loss over stratified folds.

    Per fold: train the head on the fold's training items plus their
    tree-augmented copies, then score the untouched validation fold.  The fold
    plan depends only on the context seed, so every tree faces the same
    splits.
    """
    k = ctx.effective_folds()
    plan = stratified_folds(ctx.dataset, k, derive_rng(ctx.seed, "folds", k))
    per_fold = []
    losses = []
    accuracies = []
    for fold in range(k):
        train_items, val_items = plan.split(ctx.dataset, fold)
        pairs, labels = _augmented_pairs(tree, train_items, ctx, f"kfold{fold}")
        train_m = embed_items(ctx.provider, pairs)
        head = train_head(train_m.rows, labels, ctx.dataset.num_classes, ctx.classifier)
        val_m = embed_items(ctx.provider, [(i.id, i.load()) for i in val_items])
        val_y = np.array([i.label for i in val_items])
        result = eval_head(head, val_m.rows, val_y)
        per_fold.append(-result.loss)
        losses.append(result.loss)
        accuracies.append(result.accuracy)
    score = float(np.mean(per_fold))
    return FitnessReport(
        score=score,
        per_fold=tuple(per_fold),
        diagnostics={
            "mean_loss": float(np.mean(losses)),
            "accuracy": float(np.mean(accuracies)),
        },
    )


def cluster_score(s: float, d: float, weights: ClusterWeights) -> float:
    """w_S * s - w_d / d, with -inf when the penalty is active and d = 0."""
    if weights.radius_penalty > 0 and d == 0.0:
        return -math.inf
    penalty = weights.radius_penalty / d if weights.radius_penalty > 0 else 0.0
    return weights.silhouette * s - penalty


def clustering_fitness(tree: AugmentationTree, ctx: FitnessContext) -> FitnessReport:
    """Label-cluster quality of originals plus augmentations.

    score = w_S * S - w_d / d where S is the silhouette over class-label
    clusters and d the mean cluster radius.  When every cluster collapses to
    a point (d = 0) and the radius penalty is active, the score is -inf: exact
    duplicates must not win.  With cluster_metric="inverse_davies_bouldin" the
    score is 1/DB instead.
    """
    if ctx.dataset.num_classes < 2:
        raise SingleClusterError("clustering fitness needs at least two classes")
    pairs, labels = _augmented_pairs(tree, ctx.dataset.items, ctx, "cluster")
    matrix = embed_items(ctx.provider, pairs)
    if ctx.cluster_metric == "inverse_davies_bouldin":
        db = davies_bouldin(matrix.rows, labels)
        score = math.inf if db == 0.0 else 1.0 / db
        return FitnessReport(
            score=score, per_fold=(), diagnostics={"davies_bouldin": db}
        )
    s = silhouette(matrix.rows, labels)
    d = mean_cluster_radius(matrix.rows, labels)
    score = cluster_score(s, d, ctx.cluster_weights)
    return FitnessReport(
        score=score,
        per_fold=(),
        diagnostics={"silhouette": s, "mean_radius": d},
    )


def double_aug_fitness(tree: AugmentationTree, ctx: FitnessContext) -> FitnessReport:
    """One-shot strategy: classically expand each image into k copies, then k-fold.

    The expansion is tree-independent (seeded only by the context), so every
    tree is judged on the same expanded dataset.
    """
    by_class = ctx.dataset.items_by_class()
    if any(len(members) != 1 for members in by_class.values()):
        raise ConfigError("double augmentation expects a one-shot dataset")
    k = ctx.folds if ctx.folds is not None else 2
    if k < 2:
        raise ConfigError("double augmentation needs k >= 2 splits")
    items: list[DatasetItem] = []
    for item in ctx.dataset.items:
        for copy in range(k):
            rng = derive_rng(ctx.seed, "double_aug", item.id, copy)
            spec = sample_classical_spec(rng, ctx.registry.classical_config)
            items.append(
                DatasetItem(
                    id=f"{item.id}~ca{copy}",
                    label=item.label,
                    image=apply_transform(item.load(), spec),
                )
            )
    expanded = LabeledDataset(items=items, class_names=list(ctx.dataset.class_names))
    return kfold_fitness(tree, replace(ctx, dataset=expanded, folds=k))


def trainloss_fitness(tree: AugmentationTree, ctx: FitnessContext) -> FitnessReport:
    """Negative training loss after the configured number of epochs.

    A proxy: easy-to-fit augmentations score well, which favors minor
    perturbations over destructive ones.
    """
    pairs, labels = _augmented_pairs(tree, ctx.dataset.items, ctx, "trainloss")
    matrix = embed_items(ctx.provider, pairs)
    head = train_head(matrix.rows, labels, ctx.dataset.num_classes, ctx.classifier)
    result = eval_head(head, matrix.rows, labels)
    return FitnessReport(
        score=-result.loss,
        per_fold=(),
        diagnostics={"mean_loss": result.loss, "accuracy": result.accuracy},
    )


FITNESS_FUNCTIONS = {
    "kfold": kfold_fitness,
    "clustering": clustering_fitness,
    "double_aug": double_aug_fitness,
    "trainloss": trainloss_fitness,
}
