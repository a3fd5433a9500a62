"""Evolutionary search over augmentation trees.

Each generation produces children by crossover-plus-mutation and by mutation
alone, evaluates every genome it has not scored before (fitness is cached by
canonical text, which also makes elitism well defined), and keeps the top
population_size trees of parents plus children.  Ties break toward older
genomes, then canonical text order; genomes whose evaluation raised an
operator failure rank below every scored genome.
"""

from __future__ import annotations

import csv
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .augtree import AugmentationTree, TreeNode, validate_tree
from .errors import ConfigError, DepthMismatchError, OperatorError
from .fitness import FitnessContext, FitnessReport, tree_key
from .operators import OperatorRegistry
from .rng import derive_rng

FitnessFn = Callable[[AugmentationTree, FitnessContext], FitnessReport]


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 14
    generations: int = 10
    children_per_gen: int = 8
    crossovers_per_gen: int | None = 6
    mutation_prob: float = 0.10
    crossover_prob: float | None = None  # used only when crossovers_per_gen is None
    max_depth: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ConfigError("population_size must be >= 2")
        if self.generations < 0:
            raise ConfigError("generations must be >= 0")
        if self.children_per_gen < 0:
            raise ConfigError("children_per_gen must be >= 0")
        if self.crossovers_per_gen is not None and not (
            0 <= self.crossovers_per_gen <= self.children_per_gen
        ):
            raise ConfigError("crossovers_per_gen must lie in [0, children_per_gen]")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ConfigError("mutation_prob must lie in [0, 1]")
        if self.crossover_prob is not None and not 0.0 <= self.crossover_prob <= 1.0:
            raise ConfigError("crossover_prob must lie in [0, 1]")
        if self.crossovers_per_gen is None and self.crossover_prob is None:
            raise ConfigError("set crossovers_per_gen or crossover_prob")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")


@dataclass(frozen=True)
class TraceRow:
    generation: int
    tree_text: str
    fitness: float | None  # None: evaluation failed
    origin: str  # init | mutation | crossover
    parent1: str = ""
    parent2: str = ""


@dataclass
class GenerationRecord:
    generation: int
    candidates: list[TraceRow]
    survivors: list[str]
    best_text: str
    best_fitness: float


@dataclass
class EvolutionTrace:
    generations: list[GenerationRecord] = field(default_factory=list)

    def rows(self) -> list[TraceRow]:
        return [row for record in self.generations for row in record.candidates]

    def best_per_generation(self) -> list[float]:
        return [record.best_fitness for record in self.generations]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["generation", "tree_text", "fitness", "origin", "parent1", "parent2"])
            for row in self.rows():
                fitness = "failed" if row.fitness is None else repr(row.fitness)
                writer.writerow(
                    [row.generation, row.tree_text, fitness, row.origin, row.parent1, row.parent2]
                )

    def summary(self, config: EvolutionConfig) -> dict:
        final = self.generations[-1]
        return {
            "best_tree": final.best_text,
            "best_fitness": final.best_fitness,
            "config": asdict(config),
            "best_per_generation": self.best_per_generation(),
        }

    def write_summary(self, path: str | Path, config: EvolutionConfig) -> None:
        Path(path).write_text(json.dumps(self.summary(config), indent=2) + "\n")


class FitnessCache:
    """Score per canonical tree text, with insertion order as genome age."""

    def __init__(self):
        self._scores: dict[str, float | None] = {}
        self._birth: dict[str, int] = {}
        self._reports: dict[str, FitnessReport] = {}
        self._lock = threading.Lock()

    def __contains__(self, key: str) -> bool:
        with self._lock:
            return key in self._scores

    def record(self, key: str, score: float | None, report: FitnessReport | None) -> None:
        with self._lock:
            if key in self._scores:
                return
            self._birth[key] = len(self._birth)
            self._scores[key] = score
            if report is not None:
                self._reports[key] = report

    def score(self, key: str) -> float | None:
        return self._scores[key]

    def birth(self, key: str) -> int:
        return self._birth[key]

    def sort_key(self, key: str):
        """Descending fitness, failed last; ties: older first, then text order."""
        score = self._scores[key]
        if score is None:
            return (1, 0.0, self._birth[key], key)
        return (0, -score, self._birth[key], key)


# ---------------------------------------------------------------------------
# Variation operators
# ---------------------------------------------------------------------------


def _random_tree(root_op: str, depth: int, ops: list[str], rng: np.random.Generator) -> AugmentationTree:
    def build(level: int, op: str | None) -> TreeNode:
        chosen = op if op is not None else ops[int(rng.integers(len(ops)))]
        if level == depth:
            return TreeNode(op=chosen)
        return TreeNode(
            op=chosen,
            p_left=0.5,
            p_right=0.5,
            left=build(level + 1, None),
            right=build(level + 1, None),
        )

    return AugmentationTree(root=build(1, root_op), depth=depth)


def init_population(
    cfg: EvolutionConfig, registry: OperatorRegistry, rng: np.random.Generator
) -> list[AugmentationTree]:
    """Balanced roots: with population_size = 2 * |ops| each operator roots two
    trees; otherwise roots cycle round-robin through the registered operators.
    Non-root operators are uniform draws and every edge starts at 0.5/0.5."""
    ops = registry.tags()
    if not ops:
        raise ConfigError("registry has no operators")
    population = []
    for i in range(cfg.population_size):
        population.append(_random_tree(ops[i % len(ops)], cfg.max_depth, ops, rng))
    return population


def mutate(
    tree: AugmentationTree,
    mutation_prob: float,
    registry: OperatorRegistry,
    rng: np.random.Generator,
) -> AugmentationTree:
    """Independent per-locus mutation.

    Each node's operator switches to a uniformly drawn different operator with
    probability mutation_prob; each internal node's probability pair is
    resampled (p_left ~ U(0,1)) with the same probability.  Depth never
    changes and the input tree is untouched.
    """
    ops = registry.tags()

    def walk(node: TreeNode) -> TreeNode:
        op = node.op
        if rng.random() < mutation_prob:
            alternatives = [o for o in ops if o != op]
            if alternatives:
                op = alternatives[int(rng.integers(len(alternatives)))]
        if node.is_leaf:
            return TreeNode(op=op)
        p_left, p_right = node.p_left, node.p_right
        if rng.random() < mutation_prob:
            p_left = float(rng.uniform(0.0, 1.0))
            p_right = 1.0 - p_left
        return TreeNode(
            op=op, p_left=p_left, p_right=p_right, left=walk(node.left), right=walk(node.right)
        )

    return AugmentationTree(root=walk(tree.root), depth=tree.depth)


def _subtree_paths(node: TreeNode, prefix: tuple[str, ...] = ()) -> list[tuple[str, ...]]:
    paths = [prefix]
    if not node.is_leaf:
        paths.extend(_subtree_paths(node.left, prefix + ("L",)))
        paths.extend(_subtree_paths(node.right, prefix + ("R",)))
    return paths


def _node_at(node: TreeNode, path: tuple[str, ...]) -> TreeNode:
    for step in path:
        node = node.left if step == "L" else node.right
    return node


def _graft(node: TreeNode, path: tuple[str, ...], donor: TreeNode) -> TreeNode:
    if not path:
        return donor
    if path[0] == "L":
        return TreeNode(
            op=node.op,
            p_left=node.p_left,
            p_right=node.p_right,
            left=_graft(node.left, path[1:], donor),
            right=node.right,
        )
    return TreeNode(
        op=node.op,
        p_left=node.p_left,
        p_right=node.p_right,
        left=node.left,
        right=_graft(node.right, path[1:], donor),
    )


def crossover(
    a: AugmentationTree, b: AugmentationTree, rng: np.random.Generator
) -> AugmentationTree:
    """Splice: copy of ``a`` with one uniformly chosen proper subtree replaced
    by a uniformly chosen equally deep subtree of ``b``.

    Structurally equal parents (including depth-1 trees, which have no proper
    subtree) yield a copy of the genome itself.
    """
    if a.depth != b.depth:
        raise DepthMismatchError(f"parents have depths {a.depth} and {b.depth}")
    from .augtree import trees_equal

    if trees_equal(a, b):
        return AugmentationTree(root=a.root, depth=a.depth)
    if a.depth == 1:
        return AugmentationTree(root=b.root, depth=b.depth)
    slots = [p for p in _subtree_paths(a.root) if p]  # proper subtrees only
    slot = slots[int(rng.integers(len(slots)))]
    donors = [p for p in _subtree_paths(b.root) if len(p) == len(slot)]
    donor_path = donors[int(rng.integers(len(donors)))]
    child = AugmentationTree(
        root=_graft(a.root, slot, _node_at(b.root, donor_path)), depth=a.depth
    )
    validate_tree(child)
    return child


# ---------------------------------------------------------------------------
# Generation loop
# ---------------------------------------------------------------------------


def _evaluate_into_cache(
    trees: list[AugmentationTree],
    fitness_fn: FitnessFn,
    ctx: FitnessContext,
    cache: FitnessCache,
    jobs: int,
) -> None:
    """Score every tree not already cached; operator failures mark the genome
    failed instead of aborting the run."""
    fresh: list[tuple[str, AugmentationTree]] = []
    seen: set[str] = set()
    for tree in trees:
        key = tree_key(tree)
        if key not in cache and key not in seen:
            seen.add(key)
            fresh.append((key, tree))

    def evaluate(tree: AugmentationTree):
        try:
            report = fitness_fn(tree, ctx)
            return report.score, report
        except OperatorError:
            return None, None

    if jobs > 1 and len(fresh) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(evaluate, [t for _, t in fresh]))
    else:
        results = [evaluate(t) for _, t in fresh]
    for (key, _), (score, report) in zip(fresh, results):
        cache.record(key, score, report)


def step_generation(
    population: list[AugmentationTree],
    cfg: EvolutionConfig,
    registry: OperatorRegistry,
    fitness_fn: FitnessFn,
    ctx: FitnessContext,
    cache: FitnessCache,
    rng: np.random.Generator,
    generation: int,
    jobs: int = 1,
) -> tuple[list[AugmentationTree], GenerationRecord]:
    """One generation: children, evaluation, elitist top-p selection."""
    children: list[tuple[AugmentationTree, str, str, str]] = []
    for j in range(cfg.children_per_gen):
        if cfg.crossovers_per_gen is not None:
            cross = j < cfg.crossovers_per_gen
        else:
            cross = rng.random() < cfg.crossover_prob
        if cross and len(population) >= 2:
            i1 = int(rng.integers(len(population)))
            i2 = int(rng.integers(len(population) - 1))
            if i2 >= i1:
                i2 += 1
            child = mutate(
                crossover(population[i1], population[i2], rng),
                cfg.mutation_prob,
                registry,
                rng,
            )
            children.append(
                (child, "crossover", tree_key(population[i1]), tree_key(population[i2]))
            )
        else:
            i = int(rng.integers(len(population)))
            child = mutate(population[i], cfg.mutation_prob, registry, rng)
            children.append((child, "mutation", tree_key(population[i]), ""))

    _evaluate_into_cache([c for c, _, _, _ in children], fitness_fn, ctx, cache, jobs)

    rows = [
        TraceRow(
            generation=generation,
            tree_text=tree_key(child),
            fitness=cache.score(tree_key(child)),
            origin=origin,
            parent1=p1,
            parent2=p2,
        )
        for child, origin, p1, p2 in children
    ]

    combined = population + [c for c, _, _, _ in children]
    combined.sort(key=lambda t: cache.sort_key(tree_key(t)))
    survivors = combined[: cfg.population_size]
    best = survivors[0]
    record = GenerationRecord(
        generation=generation,
        candidates=rows,
        survivors=[tree_key(t) for t in survivors],
        best_text=tree_key(best),
        best_fitness=_finite_or_nan(cache.score(tree_key(best))),
    )
    return survivors, record


def _finite_or_nan(score: float | None) -> float:
    return float("nan") if score is None else score


def run(
    cfg: EvolutionConfig,
    registry: OperatorRegistry,
    fitness_fn: FitnessFn,
    ctx: FitnessContext,
    jobs: int = 1,
) -> tuple[AugmentationTree, EvolutionTrace]:
    """Full search: returns the best-ever tree and the complete trace.

    Bit-deterministic for a fixed config seed: population init, variation, and
    every fitness evaluation derive their streams from it.
    """
    rng = derive_rng(cfg.seed, "evolution")
    population = init_population(cfg, registry, derive_rng(cfg.seed, "init"))
    cache = FitnessCache()
    trace = EvolutionTrace()

    _evaluate_into_cache(population, fitness_fn, ctx, cache, jobs)
    ranked = sorted(population, key=lambda t: cache.sort_key(tree_key(t)))
    trace.generations.append(
        GenerationRecord(
            generation=0,
            candidates=[
                TraceRow(0, tree_key(t), cache.score(tree_key(t)), "init") for t in population
            ],
            survivors=[tree_key(t) for t in population],
            best_text=tree_key(ranked[0]),
            best_fitness=_finite_or_nan(cache.score(tree_key(ranked[0]))),
        )
    )

    for generation in range(1, cfg.generations + 1):
        population, record = step_generation(
            population, cfg, registry, fitness_fn, ctx, cache, rng, generation, jobs
        )
        trace.generations.append(record)

    best = min(population, key=lambda t: cache.sort_key(tree_key(t)))
    return best, trace
