"""Episodic few-shot classification over embedding banks.

The pipeline enriches each episode's support set with multi-view visual
features, semantic text-variant features and a synthetic uncertain class,
then trains a multinomial logistic classifier and scores the queries.
Pretrained encoders stay behind an HTTP provider protocol (with offline toy
encoders for testing), so the core is fully deterministic and testable.
"""

from .auca import (
    AucaConfig,
    LambdaMode,
    SimilarityMatrix,
    UncertainBatch,
    compute_lambda,
    generate_uncertain,
    normalize_similarities,
    sample_gaussian,
    sample_interpolated,
    similarity_matrix,
)
from .bank import Bank, Manifest, load_bank, read_bank, write_bank
from .classifier import (
    SoftmaxRegression,
    UncertainPolicy,
    loss_and_gradient,
    score_queries,
)
from .episodes import (
    Episode,
    PipelineFlags,
    RunConfig,
    RunReport,
    ablation_run,
    assemble_support,
    evaluate_episode,
    lambda_statistics,
    run_evaluation,
    sample_episode,
)
from .hma import (
    JitterSpec,
    Raster,
    ToyImageEncoder,
    ViewPlan,
    center_crop,
    color_jitter,
    generate_views,
    horizontal_flip,
    rotate,
    toy_encode,
)
from .lmse import (
    SemanticVariantSet,
    ToyTextEncoder,
    VariantCache,
    VariantSource,
    build_prompt,
    fetch_variants,
    fit_dimension,
    semantic_features,
)
from .model import (
    EpisodeSpec,
    LabeledEmbedding,
    Modality,
    Prototype,
    compute_prototypes,
    cosine_similarity,
    l2_normalize,
    mean_prototype,
)
from .provider import ProviderClient, ProviderConfig
from .synth import make_synthetic_bank

__version__ = "0.1.0"

__all__ = [
    "AucaConfig",
    "Bank",
    "Episode",
    "EpisodeSpec",
    "JitterSpec",
    "LabeledEmbedding",
    "LambdaMode",
    "Manifest",
    "Modality",
    "PipelineFlags",
    "Prototype",
    "ProviderClient",
    "ProviderConfig",
    "Raster",
    "RunConfig",
    "RunReport",
    "SemanticVariantSet",
    "SimilarityMatrix",
    "SoftmaxRegression",
    "ToyImageEncoder",
    "ToyTextEncoder",
    "UncertainBatch",
    "UncertainPolicy",
    "VariantCache",
    "VariantSource",
    "ViewPlan",
    "ablation_run",
    "assemble_support",
    "build_prompt",
    "center_crop",
    "color_jitter",
    "compute_lambda",
    "compute_prototypes",
    "cosine_similarity",
    "evaluate_episode",
    "fetch_variants",
    "fit_dimension",
    "generate_uncertain",
    "generate_views",
    "horizontal_flip",
    "l2_normalize",
    "lambda_statistics",
    "load_bank",
    "loss_and_gradient",
    "make_synthetic_bank",
    "mean_prototype",
    "normalize_similarities",
    "read_bank",
    "rotate",
    "run_evaluation",
    "sample_episode",
    "sample_gaussian",
    "sample_interpolated",
    "score_queries",
    "semantic_features",
    "similarity_matrix",
    "toy_encode",
    "write_bank",
]
