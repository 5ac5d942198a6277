"""Desk-scale pruning and post-training harness.

Trains tiny decoder-only transformers on a stdlib-source corpus, prunes
them by depth, width, or 2:4 sparsity, post-trains with mask-preserving
updates, and exports loss curves in the curve-file text format.
"""

from .data import Corpus, CorpusConfig, build_corpus
from .errors import DivergenceError, PruneError, ToyLabError
from .model import ToyModel, ToyModelConfig, build_model
from .prune import (
    PruneConfig,
    PruneResult,
    apply_semi24,
    calibration_batches,
    channel_importance,
    layer_importance,
    prune_depth,
    prune_model,
    prune_width,
)
from .train import (
    RunRecord,
    TrainConfig,
    baseline_loss,
    post_train,
    pretrain,
    write_curves,
)

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "CorpusConfig",
    "DivergenceError",
    "PruneConfig",
    "PruneError",
    "PruneResult",
    "RunRecord",
    "ToyLabError",
    "ToyModel",
    "ToyModelConfig",
    "TrainConfig",
    "apply_semi24",
    "baseline_loss",
    "build_corpus",
    "build_model",
    "calibration_batches",
    "channel_importance",
    "layer_importance",
    "post_train",
    "prune_depth",
    "prune_model",
    "prune_width",
    "pretrain",
    "write_curves",
]
