"""Desk-scale multi-task neural IR with decoupled prompt training."""

from nirprompt._core import (  # noqa: F401
    CorpusIndex,
    ModelConfig,
    NirError,
    NirModel,
    PromptMode,
    Slot,
    Split,
    Stage,
    TaskDataset,
    bm25_score,
    classification_metrics,
    detokenize,
    fusion_weights,
    generate_task_data,
    in_batch_contrastive_loss,
    load_dataset,
    mask_distribution,
    ranking_metrics,
    relation_oracle,
    run_cli,
    serialize_dataset,
    tokenize,
    vocab_size,
)

__all__ = [
    "CorpusIndex",
    "ModelConfig",
    "NirError",
    "NirModel",
    "PromptMode",
    "Slot",
    "Split",
    "Stage",
    "TaskDataset",
    "bm25_score",
    "classification_metrics",
    "detokenize",
    "fusion_weights",
    "generate_task_data",
    "in_batch_contrastive_loss",
    "load_dataset",
    "mask_distribution",
    "ranking_metrics",
    "relation_oracle",
    "run_cli",
    "serialize_dataset",
    "tokenize",
    "vocab_size",
]
