"""Incomplete bi-view clustering via prototype attention and imputation."""

from .clustering import (
    ClusteringResult,
    MetricScores,
    accuracy,
    ari,
    assemble_representation,
    kmeans,
    nmi,
    score,
)
from .data import (
    MultiViewDataset,
    SyntheticSpec,
    apply_missing,
    generate_synthetic,
    load_dataset,
    save_dataset,
)
from .losses import (
    LossBreakdown,
    LossConfig,
    attention_regularizer,
    prototype_contrastive,
    sample_contrastive,
    total_loss,
)
from .model import (
    DualAttentionOutput,
    DualStreamModel,
    EncoderParams,
    ModelConfig,
    RecoveryStrategy,
    ViewParams,
    dual_attention,
    encode,
    impute,
    load_checkpoint,
    save_checkpoint,
)
from .numerics import (
    Adam,
    Matrix,
    cosine_similarity,
    gradient,
    l2_normalize_rows,
    matmul,
    softmax_rows,
)
from .training import (
    TrainConfig,
    TrainReport,
    align_prototypes,
    fit,
    make_batches,
    match_prototypes,
    train_full,
    warmup,
)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "ClusteringResult",
    "DualAttentionOutput",
    "DualStreamModel",
    "EncoderParams",
    "LossBreakdown",
    "LossConfig",
    "Matrix",
    "MetricScores",
    "ModelConfig",
    "MultiViewDataset",
    "RecoveryStrategy",
    "SyntheticSpec",
    "TrainConfig",
    "TrainReport",
    "ViewParams",
    "accuracy",
    "align_prototypes",
    "apply_missing",
    "ari",
    "assemble_representation",
    "attention_regularizer",
    "cosine_similarity",
    "dual_attention",
    "encode",
    "fit",
    "generate_synthetic",
    "gradient",
    "impute",
    "kmeans",
    "l2_normalize_rows",
    "load_checkpoint",
    "load_dataset",
    "make_batches",
    "match_prototypes",
    "matmul",
    "nmi",
    "prototype_contrastive",
    "sample_contrastive",
    "save_checkpoint",
    "save_dataset",
    "score",
    "softmax_rows",
    "total_loss",
    "train_full",
    "warmup",
]
