"""Semi-autoregressive parallel decoding with a learned commit filter."""

from ._pardec import (
    Activation,
    BlockConfig,
    CorpusReader,
    FilterModel,
    MaskPredictor,
    NGramPredictor,
    PardecError,
    ScriptedPredictor,
    StrategyConfig,
    Vocabulary,
    bce_loss,
    decode,
    load_weights,
    run_cli,
    save_weights,
    sigmoid,
    train_ngram,
)

__all__ = [
    "Activation",
    "BlockConfig",
    "CorpusReader",
    "FilterModel",
    "MaskPredictor",
    "NGramPredictor",
    "PardecError",
    "ScriptedPredictor",
    "StrategyConfig",
    "Vocabulary",
    "bce_loss",
    "decode",
    "load_weights",
    "run_cli",
    "save_weights",
    "sigmoid",
    "train_ngram",
]
