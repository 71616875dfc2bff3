"""Contextual-compositional OOV embeddings for BiLSTM POS and morphology tagging."""

from ._core import (
    Corpus,
    DataError,
    EmbeddingTable,
    Error,
    Tagger,
    analyze_oov,
    default_config,
    run_cli,
    synthetic,
    temperature_softmax,
    train,
)

__all__ = [
    "Corpus",
    "DataError",
    "EmbeddingTable",
    "Error",
    "Tagger",
    "analyze_oov",
    "default_config",
    "run_cli",
    "synthetic",
    "temperature_softmax",
    "train",
]
