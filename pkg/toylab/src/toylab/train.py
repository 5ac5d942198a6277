"""Training loops and curve-file output.

post_train implements the masked update rule for 2:4 models: after every
optimizer step the masked weights are multiplied by their mask, which is
algebraically the same as masking the weight delta, so sparsity is exact
at every recorded checkpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .data import Corpus, batch_iterator, eval_batches
from .errors import DivergenceError, ToyLabError
from .model import ToyModel, language_model_loss

DIVERGENCE_FACTOR = 10.0
DEFAULT_LR = 2e-4
DEFAULT_BATCH_TOKENS = 32_768
DEFAULT_EVAL_BATCHES = 8


@dataclass
class TrainConfig:
    lr: float = DEFAULT_LR
    batch_tokens: int = DEFAULT_BATCH_TOKENS
    eval_n_batches: int = DEFAULT_EVAL_BATCHES

    def __post_init__(self):
        if self.lr <= 0 or self.batch_tokens < 1 or self.eval_n_batches < 1:
            raise ToyLabError("lr, batch_tokens, eval_n_batches must be "
                              "positive")


@dataclass
class RunRecord:
    run_id: str
    family: str
    method: str
    n0: int
    rho: float
    l0: float
    n_after: int
    tokens: list[int] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    aborted: bool = False


def evaluate_loss(model: ToyModel, batches) -> float:
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for batch in batches:
            tokens = torch.from_numpy(batch.astype(np.int64))
            total += float(language_model_loss(model, tokens))
            count += 1
    model.train()
    return total / count


def _eval_set(corpus: Corpus, model: ToyModel, config: TrainConfig):
    return eval_batches(corpus.eval_tokens, model.config.context,
                        config.batch_tokens, config.eval_n_batches)


def baseline_loss(model: ToyModel, corpus: Corpus,
                  config: TrainConfig = TrainConfig()) -> float:
    """Loss of a model on the evaluation split (the l0 measurement)."""
    return evaluate_loss(model, _eval_set(corpus, model, config))


def pretrain(model: ToyModel, corpus: Corpus, token_budget: int,
             config: TrainConfig = TrainConfig(), seed: int = 0) -> ToyModel:
    """Plain language-model training for the unpruned base model."""
    _run_training(model, corpus, token_budget, config, seed, masks=None,
                  record=None)
    return model


def post_train(model: ToyModel, corpus: Corpus, token_budget: int,
               record_every: int, run: RunRecord,
               config: TrainConfig = TrainConfig(), seed: int = 0,
               masks: dict[str, torch.Tensor] | None = None) -> RunRecord:
    """Train a pruned model, appending an eval-loss checkpoint to run
    every record_every tokens (plus a baseline point at zero tokens).

    Raises DivergenceError after flagging the partial curve when the
    training loss exceeds 10x its initial value.
    """
    if record_every < 1 or token_budget < record_every:
        raise ToyLabError("need token_budget >= record_every >= 1")
    eval_set = _eval_set(corpus, model, config)
    run.tokens.append(0)
    run.losses.append(evaluate_loss(model, eval_set))

    def record(cumulative):
        run.tokens.append(cumulative)
        run.losses.append(evaluate_loss(model, eval_set))

    try:
        _run_training(model, corpus, token_budget, config, seed,
                      masks=masks, record=(record, record_every))
    except DivergenceError:
        run.aborted = True
        raise
    return run


def _run_training(model: ToyModel, corpus: Corpus, token_budget: int,
                  config: TrainConfig, seed: int, masks, record):
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    params = dict(model.named_parameters())
    if masks:
        unknown = set(masks) - set(params)
        if unknown:
            raise ToyLabError(f"masks name unknown parameters: "
                              f"{sorted(unknown)}")
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.lr)
    batches = batch_iterator(corpus.train_tokens, model.config.context,
                             config.batch_tokens, rng)
    tokens_per_step = (max(1, config.batch_tokens // model.config.context)
                       * model.config.context)
    model.train()
    cumulative = 0
    next_record = None if record is None else record[1]
    initial_loss = None
    while cumulative < token_budget:
        batch = torch.from_numpy(next(batches).astype(np.int64))
        loss = language_model_loss(model, batch)
        value = float(loss.detach())
        if initial_loss is None:
            initial_loss = value
        if value > DIVERGENCE_FACTOR * initial_loss:
            raise DivergenceError(
                f"training loss {value:.3f} exceeds "
                f"{DIVERGENCE_FACTOR:g}x initial {initial_loss:.3f} at "
                f"{cumulative} tokens")
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        if masks:
            with torch.no_grad():
                for name, mask in masks.items():
                    params[name].mul_(mask)
        cumulative += tokens_per_step
        if record is not None and cumulative >= next_record:
            record[0](cumulative)
            next_record += record[1]


# =====================================================================
# Curve file output
# =====================================================================

def write_curves(path, runs: list[RunRecord],
                 comments: tuple[str, ...] = ()) -> None:
    """Emit runs in the loss-curve text format: a ##-comment header, one
    #run manifest per run, then run_id,tokens,loss checkpoint lines."""
    if not runs:
        raise ToyLabError("no runs to write")
    methods = {run.method for run in runs}
    if len(methods) > 1:
        raise ToyLabError(f"one file holds one method, got {methods}")
    lines = [f"## {text}" for text in comments]
    for run in runs:
        lines.append(
            f"#run {run.run_id} family={run.family} method={run.method} "
            f"n0={run.n0} rho={run.rho!r} l0={run.l0!r} "
            f"n_after={run.n_after}")
        if run.aborted:
            lines.append(f"## {run.run_id} aborted: divergence, "
                         "partial curve")
    for run in runs:
        for tokens, loss in zip(run.tokens, run.losses):
            lines.append(f"{run.run_id},{tokens},{loss!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")
