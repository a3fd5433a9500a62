"""Evolutionary search over stochastic augmentation trees."""

from .augtree import (
    AugmentationTree,
    TreeNode,
    apply_tree,
    modal_path,
    parse_tree,
    parse_tree_json,
    reachable_ops,
    sample_path,
    serialize_tree,
    validate_tree,
)
from .dataset import (
    DatasetItem,
    FoldPlan,
    LabeledDataset,
    hardest_subset,
    load_dataset,
    sample_fewshot,
    stratified_folds,
)
from .embedding import (
    EmbeddingMatrix,
    PixelProvider,
    PrecomputedProvider,
    RandProjProvider,
    RemoteProvider,
    embed_items,
)
from .evolution import (
    EvolutionConfig,
    EvolutionTrace,
    FitnessCache,
    crossover,
    init_population,
    mutate,
    run,
    step_generation,
)
from .fitness import (
    ClassifierConfig,
    ClusterWeights,
    FitnessContext,
    FitnessReport,
    SoftmaxHead,
    clustering_fitness,
    davies_bouldin,
    double_aug_fitness,
    eval_head,
    kfold_fitness,
    mean_cluster_radius,
    silhouette,
    train_head,
    trainloss_fitness,
)
from .operators import OperatorRegistry
from .raster import (
    ClassicalAugConfig,
    ClassicalTransformSpec,
    RasterImage,
    apply_transform,
    load_image,
    sample_classical_spec,
    save_image,
)
from .worker_client import RemoteOperatorConfig, WorkerClient, probe_worker

__version__ = "0.1.0"
