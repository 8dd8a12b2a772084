"""Guided in-batch negative selection for contrastive embedding training."""

from ._gist import (
    ConfigError,
    ContractError,
    DataError,
    Encoder,
    build_masks,
    contrastive_loss,
    cosine_matrix,
    count_active_negatives,
    knn_accuracy,
    lr_at,
    mean_average_precision,
    ndcg_at_k,
    run_cli,
    similarity_block,
    spearman,
    synthesize,
    tokenize,
    v_measure,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DataError",
    "Encoder",
    "build_masks",
    "contrastive_loss",
    "cosine_matrix",
    "count_active_negatives",
    "knn_accuracy",
    "lr_at",
    "mean_average_precision",
    "ndcg_at_k",
    "run_cli",
    "similarity_block",
    "spearman",
    "synthesize",
    "tokenize",
    "v_measure",
]
