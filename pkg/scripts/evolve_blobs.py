#!/usr/bin/env python3
"""End-to-end demo: evolve an augmentation policy on synthetic color blobs.

The registry holds the two native operators plus a label-preserving noise
mock and a class-destroying channel-shuffle mock.  A good search keeps the
shuffle off every meaningfully reachable path of the winning tree.

Example:
    python scripts/evolve_blobs.py --seed 3 --generations 10 --out runs/demo
"""

import argparse
from pathlib import Path

from evoaug.augtree import reachable_ops, serialize_tree
from evoaug.embedding import PixelProvider
from evoaug.evolution import EvolutionConfig, run
from evoaug.fitness import ClusterWeights, FitnessContext, clustering_fitness
from evoaug.operators import OperatorRegistry
from evoaug.synth import blob_dataset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--generations", type=int, default=10)
    parser.add_argument("--classes", type=int, default=5)
    parser.add_argument("--noise-sigma", type=float, default=60.0)
    parser.add_argument("--w-silhouette", type=float, default=1.0)
    parser.add_argument("--w-radius", type=float, default=1.0)
    parser.add_argument("--out", type=Path, default=None)
    args = parser.parse_args()

    registry = OperatorRegistry()
    registry.register_mock("gaussian_noise", "gaussian_noise", sigma=args.noise_sigma)
    registry.register_mock("channel_shuffle", "channel_shuffle")

    ctx = FitnessContext(
        dataset=blob_dataset(classes=args.classes, shots=1, size=16, seed=args.seed),
        registry=registry,
        provider=PixelProvider(target_size=8),
        augment_multiplier=2,
        cluster_weights=ClusterWeights(args.w_silhouette, args.w_radius),
        seed=args.seed,
    )
    cfg = EvolutionConfig(
        population_size=2 * len(registry.tags()),
        generations=args.generations,
        children_per_gen=8,
        crossovers_per_gen=6,
        mutation_prob=0.1,
        max_depth=2,
        seed=args.seed,
    )
    best, trace = run(cfg, registry, clustering_fitness, ctx)

    print(f"best tree: {serialize_tree(best, 'text')}")
    print(f"best fitness: {trace.generations[-1].best_fitness:.6f}")
    print(f"reachable ops (p > 0.05): {sorted(reachable_ops(best, 0.05))}")
    print("fitness by generation:", [round(b, 4) for b in trace.best_per_generation()])
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "best_tree.txt").write_text(serialize_tree(best, "text") + "\n")
        trace.write_csv(args.out / "trace.csv")
        trace.write_summary(args.out / "summary.json", cfg)
        print(f"artifacts in {args.out}")


if __name__ == "__main__":
    main()
