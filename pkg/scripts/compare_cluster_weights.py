#!/usr/bin/env python3
"""Study how the clustering-fitness weighting shapes the learned tree.

Runs the same seeded search under four scoring variants: silhouette alone,
silhouette with a 1/d radius penalty, a doubled penalty, and inverse
Davies-Bouldin.  Silhouette-only and 1/DB both collapse to trees of exact
duplicates (every class cluster shrinks to a point, which those metrics score
as perfect); the radius-penalized variants keep real augmentations alive.

Example:
    python scripts/compare_cluster_weights.py --seeds 5
"""

import argparse

from evoaug.augtree import modal_path, serialize_tree
from evoaug.embedding import PixelProvider
from evoaug.evolution import EvolutionConfig, run
from evoaug.fitness import ClusterWeights, FitnessContext, clustering_fitness
from evoaug.operators import OperatorRegistry
from evoaug.synth import blob_dataset

VARIANTS = (
    ("S only", ClusterWeights(1.0, 0.0), "silhouette_radius"),
    ("S - 1/d", ClusterWeights(1.0, 1.0), "silhouette_radius"),
    ("S - 2/d", ClusterWeights(1.0, 2.0), "silhouette_radius"),
    ("1/DB", ClusterWeights(1.0, 0.0), "inverse_davies_bouldin"),
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--generations", type=int, default=10)
    args = parser.parse_args()

    for name, weights, metric in VARIANTS:
        duplicates = 0
        examples = []
        for seed in range(args.seeds):
            registry = OperatorRegistry()
            registry.register_mock("gaussian_noise", "gaussian_noise", sigma=60.0)
            registry.register_mock("channel_shuffle", "channel_shuffle")
            ctx = FitnessContext(
                dataset=blob_dataset(classes=5, shots=1, size=16, seed=seed),
                registry=registry,
                provider=PixelProvider(target_size=8),
                augment_multiplier=2,
                cluster_weights=weights,
                cluster_metric=metric,
                seed=seed,
            )
            cfg = EvolutionConfig(
                population_size=8,
                generations=args.generations,
                children_per_gen=8,
                crossovers_per_gen=6,
                mutation_prob=0.1,
                max_depth=2,
                seed=seed,
            )
            best, _ = run(cfg, registry, clustering_fitness, ctx)
            if all(op == "NoOp" for op in modal_path(best)):
                duplicates += 1
            examples.append(serialize_tree(best, "text"))
        print(f"{name:8s} duplicate-collapsed {duplicates}/{args.seeds}")
        for text in examples:
            print(f"         {text}")


if __name__ == "__main__":
    main()
