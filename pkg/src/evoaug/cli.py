"""Command-line driver: evolve, apply, score, folds, version.

Configuration is TOML; every command exits 0 on success and 1 with a
diagnostic on stderr otherwise.  All randomness flows from the single config
seed (overridable with --seed), so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .augtree import apply_tree, load_tree_text, serialize_tree, validate_tree
from .dataset import LabeledDataset, hardest_subset, load_dataset, sample_fewshot, stratified_folds
from .embedding import (
    PixelProvider,
    PrecomputedProvider,
    ProviderSpec,
    RandProjProvider,
    RemoteProvider,
)
from .errors import ConfigError, EvoAugError, IoError
from .evolution import EvolutionConfig, run
from .fitness import (
    FITNESS_FUNCTIONS,
    ClassifierConfig,
    ClusterWeights,
    FitnessContext,
)
from .operators import OperatorRegistry
from .raster import ClassicalAugConfig, save_image
from .rng import derive_rng
from .synth import blob_dataset
from .worker_client import RemoteOperatorConfig, WorkerClient

WORKER_ENV_VAR = "EVOAUG_WORKER"

DEFAULT_REMOTE_TAGS = ("Canny", "Segment", "Depth", "Color", "NeRF")


@dataclasses.dataclass
class RunConfig:
    """Parsed TOML plus command-line overrides."""

    seed: int
    out_dir: Path | None
    dataset: dict
    fewshot: dict | None
    operators: dict
    provider: dict
    fitness: dict
    evolution: dict

    @classmethod
    def load(cls, path: str | Path, seed_override: int | None = None) -> "RunConfig":
        try:
            with open(path, "rb") as handle:
                raw = tomllib.load(handle)
        except OSError as exc:
            raise IoError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        seed = seed_override if seed_override is not None else int(raw.get("seed", 0))
        out_dir = raw.get("out_dir")
        return cls(
            seed=seed,
            out_dir=Path(out_dir) if out_dir else None,
            dataset=raw.get("dataset", {}),
            fewshot=raw.get("fewshot"),
            operators=raw.get("operators", {}),
            provider=raw.get("provider", {"kind": "pixel"}),
            fitness=raw.get("fitness", {"kind": "clustering"}),
            evolution=raw.get("evolution", {}),
        )


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_registry(
    config: RunConfig, worker_override: str | None = None
) -> tuple[OperatorRegistry, WorkerClient | None]:
    section = config.operators
    classical_cfg = ClassicalAugConfig(**section.get("classical", {}))
    registry = OperatorRegistry(classical_config=classical_cfg)
    for mock in section.get("mocks", []):
        if "name" not in mock or "behavior" not in mock:
            raise ConfigError("each [[operators.mocks]] entry needs name and behavior")
        registry.register_mock(
            mock["name"], mock["behavior"], sigma=float(mock.get("sigma", 0.0))
        )
    endpoint = (
        worker_override
        or os.environ.get(WORKER_ENV_VAR)
        or section.get("worker")
        or None
    )
    remote_tags = section.get("remote", [])
    client = None
    if remote_tags:
        if not endpoint:
            raise ConfigError(
                f"remote operators {remote_tags} need a worker endpoint "
                f"([operators].worker, --worker, or ${WORKER_ENV_VAR})"
            )
        client = WorkerClient(
            RemoteOperatorConfig.from_endpoint(
                endpoint,
                timeout=float(section.get("worker_timeout", 30.0)),
                max_retries=int(section.get("worker_retries", 2)),
            )
        )
        registry.register_remote(list(remote_tags), client)
    return registry, client


def build_dataset(config: RunConfig, baseline_ctx_factory=None) -> LabeledDataset:
    section = dict(config.dataset)
    kind = section.pop("kind", None)
    if kind == "blobs":
        dataset = blob_dataset(
            classes=int(section.get("classes", 5)),
            shots=int(section.get("shots", 1)),
            size=int(section.get("image_size", 16)),
            noise_sigma=float(section.get("noise_sigma", 8.0)),
            seed=int(section.get("seed", config.seed)),
        )
    elif kind in ("directory", "manifest"):
        if "path" not in section:
            raise ConfigError(f"[dataset] kind={kind!r} needs a path")
        dataset = load_dataset(section["path"])
    else:
        raise ConfigError("[dataset].kind must be one of: blobs, directory, manifest")
    if config.fewshot:
        few = config.fewshot
        n_way = int(few.get("n_way", dataset.num_classes))
        k_shot = int(few.get("k_shot", 1))
        trials = int(few.get("trials", 1))
        rng = derive_rng(config.seed, "fewshot")
        if trials > 1:
            if baseline_ctx_factory is None:
                raise ConfigError("hardest-subset selection needs a baseline context")
            dataset = hardest_subset(
                dataset, n_way, k_shot, trials, baseline_ctx_factory(dataset), rng
            )
        else:
            dataset = sample_fewshot(dataset, n_way, k_shot, rng)
    return dataset


def build_provider(config: RunConfig, client: WorkerClient | None) -> ProviderSpec:
    section = config.provider
    kind = section.get("kind", "pixel")
    if kind == "pixel":
        return PixelProvider(target_size=int(section.get("target_size", 8)))
    if kind == "randproj":
        if "dim" not in section:
            raise ConfigError("[provider] kind=randproj needs dim")
        return RandProjProvider(
            dim=int(section["dim"]),
            seed=int(section.get("seed", 0)),
            target_size=int(section.get("target_size", 8)),
        )
    if kind == "precomputed":
        if "path" not in section:
            raise ConfigError("[provider] kind=precomputed needs path")
        path = Path(section["path"])
        if not path.exists():
            raise ConfigError(f"[provider].path {path} does not exist")
        return PrecomputedProvider(path=path)
    if kind == "remote":
        if client is None:
            raise ConfigError("[provider] kind=remote needs a worker endpoint")
        return RemoteProvider(client=client)
    raise ConfigError("[provider].kind must be one of: pixel, randproj, precomputed, remote")


def build_context(
    config: RunConfig,
    dataset: LabeledDataset,
    registry: OperatorRegistry,
    provider: ProviderSpec,
) -> FitnessContext:
    section = config.fitness
    folds = section.get("folds")
    return FitnessContext(
        dataset=dataset,
        registry=registry,
        provider=provider,
        folds=int(folds) if folds is not None else None,
        augment_multiplier=int(section.get("augment_multiplier", 2)),
        classifier=ClassifierConfig(
            epochs=int(section.get("epochs", 20)),
            learning_rate=float(section.get("learning_rate", 1e-3)),
            l2=float(section.get("l2", 0.0)),
        ),
        cluster_weights=ClusterWeights(
            silhouette=float(section.get("w_silhouette", 1.0)),
            radius_penalty=float(section.get("w_radius", 1.0)),
        ),
        cluster_metric=section.get("cluster_metric", "silhouette_radius"),
        seed=config.seed,
    )


def build_evolution_config(config: RunConfig) -> EvolutionConfig:
    section = config.evolution
    crossovers = section.get("crossovers_per_gen", 6)
    return EvolutionConfig(
        population_size=int(section.get("population_size", 14)),
        generations=int(section.get("generations", 10)),
        children_per_gen=int(section.get("children_per_gen", 8)),
        crossovers_per_gen=int(crossovers) if crossovers is not None else None,
        mutation_prob=float(section.get("mutation_prob", 0.10)),
        crossover_prob=(
            float(section["crossover_prob"]) if "crossover_prob" in section else None
        ),
        max_depth=int(section.get("max_depth", 2)),
        seed=config.seed,
    )


def _fitness_fn(config: RunConfig):
    kind = config.fitness.get("kind", "clustering")
    if kind not in FITNESS_FUNCTIONS:
        raise ConfigError(f"[fitness].kind must be one of {sorted(FITNESS_FUNCTIONS)}")
    return FITNESS_FUNCTIONS[kind]


def _assemble(config: RunConfig, worker_override: str | None):
    registry, client = build_registry(config, worker_override)
    provider = build_provider(config, client)

    def baseline_factory(dataset):
        return build_context(config, dataset, registry, provider)

    dataset = build_dataset(config, baseline_ctx_factory=baseline_factory)
    ctx = build_context(config, dataset, registry, provider)
    return registry, client, dataset, ctx


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_evolve(args) -> int:
    config = RunConfig.load(args.config, args.seed)
    out_dir = Path(args.out) if args.out else config.out_dir
    if out_dir is None:
        raise ConfigError("no output directory: set out_dir in the config or pass --out")
    out_dir.mkdir(parents=True, exist_ok=True)
    registry, client, _, ctx = _assemble(config, args.worker)
    try:
        evo_cfg = build_evolution_config(config)
        best, trace = run(evo_cfg, registry, _fitness_fn(config), ctx, jobs=args.jobs)
    finally:
        if client is not None:
            client.close()
    (out_dir / "best_tree.txt").write_text(serialize_tree(best, "text") + "\n")
    trace.write_csv(out_dir / "trace.csv")
    trace.write_summary(out_dir / "summary.json", evo_cfg)
    print(serialize_tree(best, "text"))
    return 0


def cmd_apply(args) -> int:
    tree_path = Path(args.tree)
    try:
        tree = load_tree_text(tree_path.read_text())
    except OSError as exc:
        raise IoError(f"cannot read tree {tree_path}: {exc}") from exc
    if args.config:
        config = RunConfig.load(args.config, args.seed)
        registry, client = build_registry(config, args.worker)
    else:
        config = None
        registry, client = build_registry(
            RunConfig(
                seed=args.seed or 0,
                out_dir=None,
                dataset={},
                fewshot=None,
                operators=(
                    {"remote": list(DEFAULT_REMOTE_TAGS), "worker": args.worker}
                    if args.worker or os.environ.get(WORKER_ENV_VAR)
                    else {}
                ),
                provider={},
                fitness={},
                evolution={},
            ),
            args.worker,
        )
    try:
        validate_tree(tree, known_ops=set(registry.tags()))
        dataset = load_dataset(args.dataset)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        seed = args.seed if args.seed is not None else 0
        manifest_rows = []
        for item in dataset.items:
            safe_id = item.id.replace("/", "_")
            for copy in range(args.multiplier):
                rng = derive_rng(seed, "apply", item.id, copy)
                out_img = apply_tree(tree, item.load(), registry, rng)
                filename = f"{safe_id}_aug{copy}.png"
                save_image(out_img, out_dir / filename)
                manifest_rows.append(
                    {
                        "id": f"{item.id}#aug{copy}",
                        "path": filename,
                        "label": dataset.class_names[item.label],
                    }
                )
        manifest = out_dir / "manifest.jsonl"
        manifest.write_text("\n".join(json.dumps(row) for row in manifest_rows) + "\n")
        print(f"wrote {len(manifest_rows)} images and {manifest}")
    finally:
        if client is not None:
            client.close()
    return 0


def cmd_score(args) -> int:
    config = RunConfig.load(args.config, args.seed)
    tree_path = Path(args.tree)
    try:
        tree = load_tree_text(tree_path.read_text())
    except OSError as exc:
        raise IoError(f"cannot read tree {tree_path}: {exc}") from exc
    registry, client, _, ctx = _assemble(config, args.worker)
    try:
        validate_tree(tree, known_ops=set(registry.tags()))
        report = _fitness_fn(config)(tree, ctx)
    finally:
        if client is not None:
            client.close()
    print(report.to_json())
    return 0


def cmd_folds(args) -> int:
    config = RunConfig.load(args.config, args.seed)
    registry, client, dataset, ctx = _assemble(config, None)
    if client is not None:
        client.close()
    k = ctx.effective_folds()
    plan = stratified_folds(dataset, k, derive_rng(ctx.seed, "folds", k))
    folds = {str(f): sorted(plan.fold_ids(f)) for f in range(plan.k)}
    print(json.dumps({"k": plan.k, "folds": folds}, indent=2))
    return 0


def cmd_version(_args) -> int:
    print(__version__)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="evoaug",
        description="Evolve stochastic augmentation trees for few-shot image datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    evolve = sub.add_parser("evolve", help="run the evolutionary search")
    evolve.add_argument("--config", required=True)
    evolve.add_argument("--seed", type=int, default=None, help="override the config seed")
    evolve.add_argument("--jobs", type=int, default=1, help="parallel fitness evaluations")
    evolve.add_argument("--out", default=None, help="output directory (overrides out_dir)")
    evolve.add_argument("--worker", default=None, help="worker endpoint override")
    evolve.set_defaults(func=cmd_evolve)

    apply_p = sub.add_parser("apply", help="augment a dataset with a saved tree")
    apply_p.add_argument("tree", help="tree file (text or JSON format)")
    apply_p.add_argument("--dataset", required=True)
    apply_p.add_argument("--multiplier", type=int, default=2)
    apply_p.add_argument("--out", required=True)
    apply_p.add_argument("--seed", type=int, default=0)
    apply_p.add_argument("--config", default=None, help="config supplying the operator registry")
    apply_p.add_argument("--worker", default=None)
    apply_p.set_defaults(func=cmd_apply)

    score = sub.add_parser("score", help="score one tree with the configured fitness")
    score.add_argument("tree")
    score.add_argument("--config", required=True)
    score.add_argument("--seed", type=int, default=None)
    score.add_argument("--worker", default=None)
    score.set_defaults(func=cmd_score)

    folds = sub.add_parser("folds", help="print the stratified fold plan")
    folds.add_argument("--config", required=True)
    folds.add_argument("--seed", type=int, default=None)
    folds.set_defaults(func=cmd_folds)

    version = sub.add_parser("version", help="print the package version")
    version.set_defaults(func=cmd_version)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EvoAugError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
